"""Data-driven estimation of the spectral response and the PSF."""

from __future__ import annotations

import numpy as np

from ..preprocess import SensorModel
from ..raster import HyperCube, PanImage, RasterError


def _laplacian(size: int) -> np.ndarray:
    """5-point Laplacian on a size x size kernel, zero outside the support."""
    n = size * size
    lap = np.zeros((n, n))
    for i in range(size):
        for j in range(size):
            k = i * size + j
            lap[k, k] = -4.0
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < size and 0 <= jj < size:
                    lap[k, ii * size + jj] = 1.0
    return lap


def shifted_pan(pan: np.ndarray, ratio: int, size: int, phase: int = 0) -> np.ndarray:
    """Design matrix whose column (u, v) samples pan shifted by (u, v) on the
    low-resolution grid, so that ``shifted_pan @ psf.ravel()`` equals the
    periodic blur of pan by psf followed by decimation."""
    c = size // 2
    cols = [np.roll(pan, (u, v), axis=(0, 1))[phase::ratio, phase::ratio].ravel()
            for u in range(-c, c + 1) for v in range(-c, c + 1)]
    return np.stack(cols, axis=1)


def estimate_sensor(hs: HyperCube, pan: PanImage, ratio: int, psf_size: int = 9,
                    smooth_r: float = 1e-4, smooth_b: float = 1e-4, phase: int = 0,
                    max_alternations: int = 50, tol: float = 1e-6) -> SensorModel:
    """Alternate least-squares R-steps and B-steps on

        |R hs - decimate(pan * B)|^2 + smooth_r |D R|^2 + smooth_b |lap B|^2

    with B held to unit sum inside the B-step. Negative weights left by noise
    are clipped before the final renormalization.
    """
    if pan.shape != (hs.rows * ratio, hs.cols * ratio):
        raise RasterError(f"pan {pan.shape} must be hs {hs.shape[1:]} times ratio {ratio}")
    if psf_size % 2 == 0:
        raise ValueError(f"psf_size must be odd, got {psf_size}")
    bands = hs.bands
    h = hs.data.reshape(bands, -1).T.astype(np.float64)
    p = shifted_pan(pan.data.astype(np.float64), ratio, psf_size, phase)

    diff = np.diff(np.eye(bands), axis=0)
    r_system = h.T @ h + smooth_r * diff.T @ diff
    lap = _laplacian(psf_size)
    nb = psf_size * psf_size
    b_system = np.zeros((nb + 1, nb + 1))
    b_system[:nb, :nb] = p.T @ p + smooth_b * lap.T @ lap
    b_system[:nb, nb] = b_system[nb, :nb] = 1.0

    b = np.zeros(nb)
    b[nb // 2] = 1.0
    r = np.full(bands, 1.0 / bands)
    for _ in range(max_alternations):
        r_new = np.linalg.lstsq(r_system, h.T @ (p @ b), rcond=None)[0]
        rhs = np.append(p.T @ (h @ r_new), 1.0)
        b_new = np.linalg.lstsq(b_system, rhs, rcond=None)[0][:nb]
        change = (np.linalg.norm(np.concatenate([r_new - r, b_new - b]))
                  / np.linalg.norm(np.concatenate([r_new, b_new])))
        r, b = r_new, b_new
        if change < tol:
            break

    r = np.clip(r, 0.0, None)
    b = np.clip(b, 0.0, None)
    if r.sum() <= 0 or b.sum() <= 0:
        raise ValueError("sensor estimation produced an all-negative response or PSF")
    return SensorModel(r / r.sum(), (b / b.sum()).reshape(psf_size, psf_size), ratio,
                       phase=phase)
