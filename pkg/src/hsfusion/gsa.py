"""Gram-Schmidt Adaptive (GSA) component-substitution pansharpening."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import SensorModel, degrade, upsample
from .raster import HyperCube, PanImage

TIKHONOV = 1e-8


class DegenerateIntensityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GsaArtifacts:
    weights: np.ndarray  # band weights followed by the intercept
    intensity: np.ndarray
    gains: np.ndarray


def gsa_weights(hs_low: HyperCube, pan_degraded: PanImage) -> np.ndarray:
    """Least-squares fit pan ~ sum_k w_k band_k + w_0; returns [w_1..w_K, w_0]."""
    if hs_low.shape[1:] != pan_degraded.shape:
        raise ValueError(f"hs {hs_low.shape[1:]} and pan {pan_degraded.shape} dims differ")
    bands = hs_low.bands
    n = hs_low.rows * hs_low.cols
    if n < bands + 1:
        raise ValueError(f"{n} pixels cannot determine {bands + 1} regression weights")
    design = np.empty((n, bands + 1))
    design[:, :bands] = hs_low.data.reshape(bands, n).T
    design[:, bands] = 1.0
    target = pan_degraded.data.astype(np.float64).ravel()
    gram = design.T @ design
    gram[np.arange(bands), np.arange(bands)] += TIKHONOV
    return np.linalg.solve(gram, design.T @ target)


def _match_moments(src: np.ndarray, ref: np.ndarray) -> np.ndarray:
    std = src.std()
    if std == 0:
        return np.full_like(src, ref.mean())
    return (src - src.mean()) * (ref.std() / std) + ref.mean()


def gsa_sharpen(hs: HyperCube, pan: PanImage, model: SensorModel):
    r = model.ratio
    if pan.shape != (hs.rows * r, hs.cols * r):
        raise ValueError(f"pan {pan.shape} must be hs {hs.shape[1:]} times ratio {r}")
    pan_low = degrade(pan, model)
    weights = gsa_weights(hs, pan_low)

    up = np.asarray(upsample(hs, r, offset=model.phase).data, dtype=np.float64)
    intensity = np.tensordot(weights[:-1], up, axes=1) + weights[-1]
    var_i = intensity.var()
    if not var_i > 0:
        raise DegenerateIntensityError("synthetic intensity has zero variance")
    detail = _match_moments(pan.data.astype(np.float64), intensity) - intensity

    centred = up - up.mean(axis=(1, 2), keepdims=True)
    gains = np.tensordot(centred, intensity - intensity.mean(), axes=((1, 2), (0, 1)))
    gains /= intensity.size * var_i
    fused = up + gains[:, None, None] * detail
    return (hs.with_data(fused, gsd_m=pan.gsd_m),
            GsaArtifacts(weights, intensity, gains))
