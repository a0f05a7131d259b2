"""Synthetic linear-mixing scenes with exact ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..preprocess import SensorModel, degrade, mtf_kernel
from ..raster import HyperCube, PanImage, RasterError


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    truth: HyperCube
    hs: HyperCube
    pan: PanImage
    model: SensorModel
    endmembers: np.ndarray  # (bands, p)
    abundances: np.ndarray  # (p, rows, cols)
    seed: int


def smooth_field(rng: np.random.Generator, rows: int, cols: int, scale: float) -> np.ndarray:
    """Periodic Gaussian random field with correlation length ``scale`` pixels,
    standardized to zero mean and unit variance."""
    noise = rng.standard_normal((rows, cols))
    fy = np.fft.fftfreq(rows)[:, None]
    fx = np.fft.fftfreq(cols)[None, :]
    spectrum = np.exp(-2 * (np.pi * scale) ** 2 * (fx ** 2 + fy ** 2))
    field = np.fft.ifft2(np.fft.fft2(noise) * spectrum).real
    field -= field.mean()
    std = field.std()
    return field / std if std > 0 else field


def smooth_spectra(rng: np.random.Generator, bands: int, p: int) -> np.ndarray:
    """p positive spectra built from a floor plus three Gaussian bumps, unit-sum."""
    x = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((bands, p))
    for j in range(p):
        s = 0.2 + 0.1 * rng.random()
        for _ in range(3):
            centre, width, height = rng.random(), 0.05 + 0.25 * rng.random(), rng.random()
            s = s + height * np.exp(-0.5 * ((x - centre) / width) ** 2)
        spectra[:, j] = s / s.sum()
    return spectra


def mixing_abundances(rng: np.random.Generator, p: int, rows: int, cols: int,
                      scale: float, transition: Optional[float] = 0.5) -> np.ndarray:
    """Non-negative, pixel-wise unit-sum abundance maps.

    With ``transition`` set, each field is thresholded ``transition`` below the
    pixel-wise maximum so that large regions hold a single pure material and
    mixtures only appear along boundaries. ``transition=None`` gives a smooth
    softmax mixture with no pure pixels.
    """
    if p == 1:
        return np.ones((1, rows, cols))
    fields = np.stack([smooth_field(rng, rows, cols, scale) for _ in range(p)])
    if transition is None:
        w = np.exp(fields - fields.max(axis=0))
    else:
        w = np.maximum(fields - (fields.max(axis=0) - transition), 0.0)
    return w / w.sum(axis=0)


def make_scene(rows: int, cols: int, bands: int, p: int, ratio: int,
               noise_std: float = 0.0, seed: int = 0, *,
               transition: Optional[float] = 0.5, scale: Optional[float] = None,
               wavelengths=None, psf_gain: float = 0.3) -> SyntheticScene:
    if rows % ratio or cols % ratio:
        raise RasterError(f"scene dims {rows}x{cols} not divisible by ratio {ratio}")
    if not 1 <= p <= bands:
        raise ValueError(f"need 1 <= p <= bands, got p={p}, bands={bands}")
    rng = np.random.default_rng(seed)
    if scale is None:
        scale = max(rows, cols) / 8
    spectra = smooth_spectra(rng, bands, p)
    abundances = mixing_abundances(rng, p, rows, cols, scale, transition)
    truth_data = np.tensordot(spectra, abundances, axes=1)
    if wavelengths is None:
        wavelengths = np.linspace(400.0, 2500.0, bands)
    truth = HyperCube(truth_data, wavelengths, gsd_m=5.0)

    x = np.linspace(-1.0, 1.0, bands)
    response = np.exp(-0.5 * (x / 0.6) ** 2)
    model = SensorModel(response / response.sum(), mtf_kernel(psf_gain, ratio), ratio,
                        np.full(bands, psf_gain))

    hs_data = np.asarray(degrade(truth, model).data, dtype=np.float64)
    pan_data = np.tensordot(model.response, truth.data.astype(np.float64), axes=1)
    if noise_std > 0:
        hs_data = hs_data + noise_std * rng.standard_normal(hs_data.shape)
        pan_data = pan_data + noise_std * rng.standard_normal(pan_data.shape)
    hs = HyperCube(hs_data, wavelengths, gsd_m=5.0 * ratio)
    pan = PanImage(pan_data, gsd_m=5.0)
    return SyntheticScene(truth, hs, pan, model, spectra, abundances, seed)
