"""Reduced-scale (UIQI, SAM, ERGAS) and full-scale (D_lambda^K, D_S^*, Q^*) indices."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .preprocess import SensorModel, degrade
from .raster import HyperCube, PanImage

DEFAULT_WINDOW = 32
_TINY = 1e-12


class MetricError(ValueError):
    pass


def fmt(value) -> str:
    """Five significant digits, trailing zeros kept (1.0000, 0.0084400)."""
    return f"{value:#.5g}"


@dataclass
class QualityReport:
    context: str  # "wald" | "full_resolution"
    uiqi: Optional[float] = None
    sam_deg: Optional[float] = None
    ergas: Optional[float] = None
    d_lambda_k: Optional[float] = None
    d_s_star: Optional[float] = None
    q_star: Optional[float] = None
    parameters: dict = field(default_factory=dict)

    METRICS = ("uiqi", "sam_deg", "ergas", "d_lambda_k", "d_s_star", "q_star")

    def __post_init__(self):
        if self.context not in ("wald", "full_resolution"):
            raise ValueError(f"unknown report context {self.context!r}")

    def values(self) -> dict:
        return {k: getattr(self, k) for k in self.METRICS if getattr(self, k) is not None}

    def to_text(self) -> str:
        """Flat ``key = value`` block."""
        lines = [f"context = {self.context}"]
        lines += [f"{k} = {fmt(v)}" for k, v in self.values().items()]
        lines += [f"{k} = {v}" for k, v in sorted(self.parameters.items())]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return asdict(self)


def _pair(ref, test):
    a = np.asarray(getattr(ref, "data", ref), dtype=np.float64)
    b = np.asarray(getattr(test, "data", test), dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    return a, b


def _blocks(x: np.ndarray, window: int) -> np.ndarray:
    bands, rows, cols = x.shape
    nr, nc = rows // window, cols // window
    x = x[:, :nr * window, :nc * window]
    return x.reshape(bands, nr, window, nc, window).transpose(0, 1, 3, 2, 4) \
            .reshape(bands, nr * nc, window * window)


def uiqi_per_band(ref, test, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Mean block UIQI of each band (NaN where every block was degenerate)."""
    a, b = _pair(ref, test)
    if window < 2 or window > min(a.shape[1:]):
        raise MetricError(f"window {window} outside [2, {min(a.shape[1:])}]")
    ba, bb = _blocks(a, window), _blocks(b, window)
    mu_a, mu_b = ba.mean(axis=2), bb.mean(axis=2)
    da, db = ba - mu_a[..., None], bb - mu_b[..., None]
    var_a, var_b = (da ** 2).mean(axis=2), (db ** 2).mean(axis=2)
    cov = (da * db).mean(axis=2)
    den = (var_a + var_b) * (mu_a ** 2 + mu_b ** 2)
    ok = den >= _TINY
    q = np.where(ok, 4 * cov * mu_a * mu_b / np.where(ok, den, 1.0), 0.0)
    counts = ok.sum(axis=1)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, q.sum(axis=1) / np.maximum(counts, 1), np.nan)


def uiqi(ref, test, window: int = DEFAULT_WINDOW) -> float:
    per_band = uiqi_per_band(ref, test, window)
    valid = per_band[~np.isnan(per_band)]
    if valid.size == 0:
        raise MetricError("every UIQI window is degenerate")
    return float(valid.mean())


def sam(ref, test) -> float:
    """Mean spectral angle in degrees over non-degenerate pixels.

    Evaluated as 2*atan2(|u - v|, |u + v|) on unit spectra, which equals
    arccos(<u, v>) but keeps full precision near zero.
    """
    a, b = _pair(ref, test)
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    na, nb = np.linalg.norm(a, axis=0), np.linalg.norm(b, axis=0)
    ok = (na >= _TINY) & (nb >= _TINY)
    if not ok.any():
        raise MetricError("every pixel has a zero spectrum")
    u, v = a[:, ok] / na[ok], b[:, ok] / nb[ok]
    angle = 2 * np.arctan2(np.linalg.norm(u - v, axis=0), np.linalg.norm(u + v, axis=0))
    return float(np.degrees(angle).mean())


def ergas(ref, test, ratio: int) -> float:
    a, b = _pair(ref, test)
    mu = a.reshape(a.shape[0], -1).mean(axis=1)
    if np.any(mu == 0):
        raise MetricError("ERGAS undefined for a zero-mean reference band")
    rmse = np.sqrt(((a - b) ** 2).reshape(a.shape[0], -1).mean(axis=1))
    return float(100.0 / ratio * np.sqrt(np.mean((rmse / mu) ** 2)))


def d_lambda_k(fused: HyperCube, hs: HyperCube, model: SensorModel,
               window: int = DEFAULT_WINDOW) -> float:
    r = model.ratio
    if fused.shape != (hs.bands, hs.rows * r, hs.cols * r):
        raise MetricError(f"fused {fused.shape} inconsistent with hs {hs.shape} at ratio {r}")
    return float(np.clip(1.0 - uiqi(hs, degrade(fused, model), window), 0.0, 1.0))


def d_s_star(fused: HyperCube, pan: PanImage) -> float:
    """1 - R^2 of the least-squares fit of pan on the fused bands plus intercept."""
    if fused.shape[1:] != pan.shape:
        raise MetricError(f"fused {fused.shape[1:]} and pan {pan.shape} dims differ")
    y = pan.data.astype(np.float64).ravel()
    sst = np.sum((y - y.mean()) ** 2)
    if not sst > 0:
        raise MetricError("D_S* undefined for a constant panchromatic image")
    design = np.empty((y.size, fused.bands + 1))
    design[:, :-1] = fused.data.reshape(fused.bands, -1).T
    design[:, -1] = 1.0
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    sse = np.sum((y - design @ coef) ** 2)
    return float(np.clip(sse / sst, 0.0, 1.0))


def q_star(d_lambda: float, d_s: float) -> float:
    if not (0 <= d_lambda <= 1 and 0 <= d_s <= 1):
        raise MetricError(f"distortions must lie in [0, 1], got {d_lambda}, {d_s}")
    return (1.0 - d_lambda) * (1.0 - d_s)
