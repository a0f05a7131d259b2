"""Run configuration: a YAML (or JSON) file mapped onto dataclasses."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from ..metrics import DEFAULT_WINDOW
from ..mtfglp import GAIN_MODES
from ..raster import PAD_MODES
from .protocols import METHODS

PROTOCOLS = ("wald", "full_resolution")
SENSOR_MODES = ("default", "estimate", "file")


class ConfigError(ValueError):
    pass


@dataclass
class BandScreenConfig:
    intervals: list = field(default_factory=list)  # [[lo_nm, hi_nm], ...]
    snr_threshold: float = 0.0
    drop_indices: list = field(default_factory=list)


@dataclass
class SensorConfig:
    mode: str = "default"
    ratio: Optional[int] = None  # inferred from the raster dims when omitted
    gain: float = 0.3
    psf_size: Optional[int] = None
    path: Optional[str] = None  # JSON SensorModel for mode "file"
    smooth_r: float = 1e-4
    smooth_b: float = 1e-4


@dataclass
class PcaConfig:
    enabled: bool = False
    band_range: Optional[list] = field(default_factory=lambda: [400.0, 1010.0])
    pcs: list = field(default_factory=lambda: [0, 1, 2])
    stretch: list = field(default_factory=lambda: [2.0, 98.0])


@dataclass
class RunConfig:
    hs: str
    pan: str
    output_dir: str
    methods: list = field(default_factory=lambda: ["gsa", "mtfglp", "hysure"])
    method_params: dict = field(default_factory=dict)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    band_screen: BandScreenConfig = field(default_factory=BandScreenConfig)
    tile_size: int = 360
    pad_mode: str = "reflect"
    protocols: list = field(default_factory=lambda: ["full_resolution"])
    pca: PcaConfig = field(default_factory=PcaConfig)
    window: int = DEFAULT_WINDOW
    seed: int = 0
    threads: Optional[int] = None

    def validate(self) -> "RunConfig":
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"invalid method(s) {bad or self.methods}; "
                              f"valid methods: {', '.join(METHODS)}")
        for name, params in self.method_params.items():
            if name not in METHODS or not isinstance(params, dict):
                raise ConfigError(f"method_params entry {name!r} must map a method to a dict")
        mode = self.method_params.get("mtfglp", {}).get("gain_mode", "regression")
        if mode not in GAIN_MODES:
            raise ConfigError(f"gain_mode must be one of {GAIN_MODES}, got {mode!r}")
        bad = [p for p in self.protocols if p not in PROTOCOLS]
        if bad:
            raise ConfigError(f"invalid protocol(s) {bad}; valid: {', '.join(PROTOCOLS)}")
        if self.sensor.mode not in SENSOR_MODES:
            raise ConfigError(f"sensor mode must be one of {SENSOR_MODES}")
        if self.sensor.mode == "file" and not self.sensor.path:
            raise ConfigError("sensor mode 'file' needs a path")
        if self.pad_mode not in PAD_MODES:
            raise ConfigError(f"pad_mode must be one of {PAD_MODES}")
        if self.tile_size <= 0 or self.window < 2:
            raise ConfigError("tile_size must be positive and window >= 2")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if len(self.pca.pcs) != 3 or len(set(self.pca.pcs)) != 3:
            raise ConfigError("pca.pcs must hold 3 distinct component indices")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = dict(data)
    nested = {"sensor": SensorConfig, "band_screen": BandScreenConfig, "pca": PcaConfig}
    for key, cls in nested.items():
        data[key] = _build(cls, data.get(key), key)
    for key in ("hs", "pan", "output_dir"):
        if key not in data:
            raise ConfigError(f"config missing required key {key!r}")
    try:
        cfg = _build(RunConfig, data, "config")
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path) -> RunConfig:
    """Parse a YAML/JSON run config; relative raster paths resolve against it."""
    path = Path(path)
    data = yaml.safe_load(path.read_text())
    cfg = config_from_dict(data)
    base = path.parent
    for key in ("hs", "pan", "output_dir"):
        value = Path(getattr(cfg, key))
        if not value.is_absolute():
            setattr(cfg, key, str(base / value))
    if cfg.sensor.path and not Path(cfg.sensor.path).is_absolute():
        cfg.sensor.path = str(base / cfg.sensor.path)
    return cfg
