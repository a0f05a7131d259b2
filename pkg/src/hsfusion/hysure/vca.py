"""Vertex component analysis: pure-pixel endmember extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..raster import HyperCube


@dataclass(frozen=True, eq=False)
class Subspace:
    basis: np.ndarray  # (bands, p)
    method: str = "vca"  # "vca", or "pca" when VCA fell back
    indices: tuple = ()  # selected pixel indices (row-major), VCA only

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[1] > basis.shape[0]:
            raise ValueError(f"basis must be (bands, p) with p <= bands, got {basis.shape}")
        sv = np.linalg.svd(basis, compute_uv=False)
        if sv[-1] <= 1e-6 * sv[0]:  # above float32 rounding
            raise ValueError("subspace basis columns are linearly dependent")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]


def _estimate_snr(y, mean, x_proj, p):
    bands, n = y.shape
    p_y = np.sum(y ** 2) / n
    p_x = np.sum(x_proj ** 2) / n + mean @ mean
    noise = p_y - p_x
    if noise <= 1e-12 * p_y:
        return math.inf
    return 10 * math.log10(max(p_x - p / bands * p_y, 1e-300) / noise)


def pca_subspace(pixels: np.ndarray, p: int) -> np.ndarray:
    u, _, _ = np.linalg.svd(pixels @ pixels.T / pixels.shape[1])
    return u[:, :p]


def vca(hs: HyperCube, p: int, seed: int = 0) -> Subspace:
    """Pick ``p`` observed pixel spectra at the vertices of the data simplex.

    Data are projected onto a p-dimensional signal subspace (principal
    components; projective scaling in the high-SNR regime). Each step draws a
    random direction orthogonal to the endmembers chosen so far and keeps the
    pixel with the largest absolute projection on it. A repeated pick means
    the data do not support p vertices, and the principal-component basis is
    returned instead with ``method="pca"``.
    """
    y = hs.data.reshape(hs.bands, -1).astype(np.float64)
    bands, n = y.shape
    if not 1 <= p <= min(bands, n):
        raise ValueError(f"p={p} must be between 1 and min(bands, pixels)={min(bands, n)}")
    rng = np.random.default_rng(seed)

    mean = y.mean(axis=1)
    centred = y - mean[:, None]
    ud = np.linalg.svd(centred @ centred.T / n)[0][:, :p]
    snr = _estimate_snr(y, mean, ud.T @ centred, p)
    if snr < 15 + 10 * math.log10(p):
        d = p - 1
        x = ud[:, :d].T @ centred
        c = np.sqrt((x ** 2).sum(axis=0)).max() if d else 1.0
        proj = np.vstack([x, np.full((1, n), c)])
    else:
        ud = pca_subspace(y, p)
        x = ud.T @ y
        denom = x.mean(axis=1) @ x
        denom = np.where(np.abs(denom) > 1e-300, denom, 1e-300)
        proj = x / denom

    if p == 1:
        indices = [int(np.argmax(np.linalg.norm(y, axis=0)))]
    else:
        a = np.zeros((p, p))
        a[-1, 0] = 1.0
        indices = []
        for i in range(p):
            w = rng.standard_normal(p)
            f = w - a @ np.linalg.pinv(a) @ w
            f /= np.linalg.norm(f)
            idx = int(np.argmax(np.abs(f @ proj)))
            indices.append(idx)
            a[:, i] = proj[:, idx]

    basis = y[:, indices]
    if len(set(indices)) < p:
        return Subspace(pca_subspace(y, p), "pca")
    try:
        return Subspace(basis, "vca", tuple(indices))
    except ValueError:
        return Subspace(pca_subspace(y, p), "pca")
