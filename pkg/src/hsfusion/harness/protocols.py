"""Method registry and the two evaluation protocols."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .. import metrics
from ..gsa import gsa_sharpen
from ..hysure import HysureParams, hysure_sharpen, vca
from ..metrics import QualityReport
from ..mtfglp import mtfglp_sharpen
from ..preprocess import SensorModel, degrade, upsample
from ..raster import HyperCube, PanImage

FUSION_METHODS = ("gsa", "mtfglp", "hysure")


def _run_gsa(hs, pan, model, params, seed):
    fused, art = gsa_sharpen(hs, pan, model)
    return fused, {"weights": art.weights.tolist(), "gains": art.gains.tolist()}


def _run_mtfglp(hs, pan, model, params, seed):
    mode = params.get("gain_mode", "regression")
    fused, art = mtfglp_sharpen(hs, pan, model, mode)
    return fused, {"gain_mode": mode}


def hysure_params(params: dict) -> HysureParams:
    known = HysureParams.__dataclass_fields__
    return HysureParams(**{k: v for k, v in params.items() if k in known})


def _run_hysure(hs, pan, model, params, seed):
    hp = hysure_params(params)
    subspace = vca(hs, min(hp.subspace_dim, hs.bands, hs.rows * hs.cols), seed=seed)
    fused, trace = hysure_sharpen(hs, pan, model, subspace, hp)
    return fused, {"trace": trace.to_dict()}


def _run_upsample(hs, pan, model, params, seed):
    return upsample(hs, model.ratio, offset=model.phase), {}


METHODS = {
    "gsa": _run_gsa,
    "mtfglp": _run_mtfglp,
    "hysure": _run_hysure,
    "upsample": _run_upsample,
}


def run_method(name: str, hs: HyperCube, pan: PanImage, model: SensorModel,
               params: Optional[dict] = None, seed: int = 0):
    """Fuse one (hs, pan) pair; returns (fused cube, JSON-friendly info)."""
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; valid methods: {', '.join(METHODS)}")
    return METHODS[name](hs, pan, model, dict(params or {}), seed)


def checksum(*rasters) -> str:
    h = hashlib.sha256()
    for r in rasters:
        h.update(np.ascontiguousarray(r.data, dtype="<f4").tobytes())
    return h.hexdigest()


@dataclass
class WaldRun:
    method: str
    model: SensorModel
    report: QualityReport
    degraded_inputs_checksum: str
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.report.context != "wald":
            raise ValueError("a WaldRun must carry a wald-context report")


def wald_protocol(hs: HyperCube, pan: PanImage, method: Union[str, Callable],
                  model: SensorModel, method_params: Optional[dict] = None, *,
                  window: int = metrics.DEFAULT_WINDOW, seed: int = 0) -> WaldRun:
    """Degrade both inputs by the model, fuse, and score against the original hs.

    ``method`` is a registry name, ``"oracle"`` (returns the reference itself,
    a sanity check of the protocol), or a callable with the registry signature.
    """
    degraded_hs = degrade(hs, model)
    degraded_pan = degrade(pan, model)
    if method == "oracle":
        fused, info, name = hs, {}, "oracle"
    elif callable(method):
        fused, info = method(degraded_hs, degraded_pan, model, dict(method_params or {}),
                             seed)
        name = getattr(method, "__name__", "custom")
    else:
        fused, info = run_method(method, degraded_hs, degraded_pan, model,
                                 method_params, seed)
        name = method
    win = min(window, hs.rows, hs.cols)
    report = QualityReport(
        "wald",
        uiqi=metrics.uiqi(hs, fused, win),
        sam_deg=metrics.sam(hs, fused),
        ergas=metrics.ergas(hs, fused, model.ratio),
        parameters={"method": name, "window": win, "ratio": model.ratio},
    )
    return WaldRun(name, model, report, checksum(degraded_hs, degraded_pan), info)


def full_resolution_eval(fused: HyperCube, hs: HyperCube, pan: PanImage,
                         model: SensorModel, window: int = metrics.DEFAULT_WINDOW,
                         method: str = "") -> QualityReport:
    win = min(window, hs.rows, hs.cols)
    dl = metrics.d_lambda_k(fused, hs, model, win)
    ds = metrics.d_s_star(fused, pan)
    params = {"window": win, "ratio": model.ratio, "d_lambda_variant": "mean_band_uiqi"}
    if method:
        params["method"] = method
    return QualityReport("full_resolution", d_lambda_k=dl, d_s_star=ds,
                         q_star=metrics.q_star(dl, ds), parameters=params)
