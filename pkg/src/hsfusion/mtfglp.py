"""MTF-matched generalized Laplacian pyramid (MTF-GLP) pansharpening.

A single pyramid level: the panchromatic band is low-passed with a Gaussian
matched to each hyperspectral band's MTF, decimated by the full ratio and
re-expanded. Whatever the sensor could not see is injected as detail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import SensorModel, circular_convolve, mtf_kernel, upsample
from .raster import HyperCube, PanImage, RasterError

GAIN_MODES = ("unit", "regression", "hpm")


class DegenerateLowpassError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GlpArtifacts:
    pan_lowpass: np.ndarray
    details: np.ndarray
    gains: np.ndarray  # per band; (bands, rows, cols) in hpm mode
    gain_mode: str


def _lowpass(plane: np.ndarray, gain: float, model: SensorModel) -> np.ndarray:
    r = model.ratio
    kernel = mtf_kernel(gain, r)
    low = circular_convolve(plane, kernel)[model.phase::r, model.phase::r]
    return np.asarray(upsample(PanImage(low), r, offset=model.phase).data, dtype=np.float64)


def glp_lowpass(pan: PanImage, model: SensorModel, band: int = 0) -> PanImage:
    r = model.ratio
    if pan.rows % r or pan.cols % r:
        raise RasterError(f"pan dims {pan.shape} not divisible by ratio {r}")
    return pan.with_data(_lowpass(pan.data, model.mtf_gain_nyquist[band], model))


def mtfglp_sharpen(hs: HyperCube, pan: PanImage, model: SensorModel,
                   gain_mode: str = "regression"):
    if gain_mode not in GAIN_MODES:
        raise ValueError(f"gain_mode must be one of {GAIN_MODES}, got {gain_mode!r}")
    r = model.ratio
    if pan.shape != (hs.rows * r, hs.cols * r):
        raise ValueError(f"pan {pan.shape} must be hs {hs.shape[1:]} times ratio {r}")
    if model.bands != hs.bands:
        raise ValueError(f"sensor model covers {model.bands} bands, cube has {hs.bands}")

    up = np.asarray(upsample(hs, r, offset=model.phase).data, dtype=np.float64)
    p = pan.data.astype(np.float64)
    p_centred, p_std = p - p.mean(), p.std()
    lowpass = np.empty_like(up)
    details = np.empty_like(up)
    gains = np.empty(hs.bands) if gain_mode != "hpm" else np.empty_like(up)
    # bands sharing a gain share the filtered pan up to the affine matching
    cache = {}
    for k in range(hs.bands):
        band = up[k]
        scale = band.std() / p_std if p_std > 0 else 0.0
        matched = p_centred * scale + band.mean()
        g = float(model.mtf_gain_nyquist[k])
        if g not in cache:
            cache[g] = _lowpass(p_centred, g, model)
        low = cache[g] * scale + band.mean()
        lowpass[k] = low
        details[k] = matched - low
        if gain_mode == "unit":
            gains[k] = 1.0
        elif gain_mode == "regression":
            var = low.var()
            # relative test: a flat low-pass still carries rounding noise
            if var > 1e-12 * matched.var():
                gains[k] = np.mean((band - band.mean()) * (low - low.mean())) / var
            elif np.any(details[k]):
                raise DegenerateLowpassError(f"band {k}: low-pass pan has zero variance")
            else:
                gains[k] = 0.0
        else:
            eps = 1e-6 * np.mean(np.abs(low))
            gains[k] = band / np.maximum(low, eps)
    if gain_mode == "hpm":
        fused = up + gains * details
    else:
        fused = up + gains[:, None, None] * details
    return (hs.with_data(fused, gsd_m=pan.gsd_m),
            GlpArtifacts(lowpass, details, gains, gain_mode))
