"""Principal components over a wavelength range and false-colour composites."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..raster import HyperCube, RgbComposite, render_composite

VNIR_NM = (400.0, 1010.0)


@dataclass(frozen=True, eq=False)
class PcaFit:
    components: np.ndarray  # (n_components, n_selected_bands), rows orthonormal
    eigenvalues: np.ndarray  # descending
    mean_spectrum: np.ndarray
    band_indices: np.ndarray  # bands of the source cube the fit uses

    def project(self, cube: HyperCube) -> np.ndarray:
        """Component scores, shape (n_components, rows, cols)."""
        x = cube.data[self.band_indices].reshape(self.band_indices.size, -1).astype(np.float64)
        scores = self.components @ (x - self.mean_spectrum[:, None])
        return scores.reshape(-1, cube.rows, cube.cols)

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        flat = scores.reshape(scores.shape[0], -1)
        out = self.components[:flat.shape[0]].T @ flat + self.mean_spectrum[:, None]
        return out.reshape(-1, *scores.shape[1:])


def select_bands(cube: HyperCube, band_range: Optional[Sequence[float]]) -> np.ndarray:
    if band_range is None:
        return np.arange(cube.bands)
    if cube.wavelengths_nm is None:
        raise ValueError("wavelength range given but the cube has no wavelengths")
    lo, hi = band_range
    return np.flatnonzero((cube.wavelengths_nm >= lo) & (cube.wavelengths_nm <= hi))


def pca_fit(cube: HyperCube, band_range: Optional[Sequence[float]] = VNIR_NM) -> PcaFit:
    idx = select_bands(cube, band_range)
    if idx.size < 3:
        raise ValueError(f"band range {band_range} selects {idx.size} bands; need at least 3")
    x = cube.data[idx].reshape(idx.size, -1).astype(np.float64)
    mean = x.mean(axis=1)
    centred = x - mean[:, None]
    cov = centred @ centred.T / x.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T
    # each component's largest-magnitude entry is made positive
    lead = comps[np.arange(comps.shape[0]), np.argmax(np.abs(comps), axis=1)]
    comps *= np.where(lead < 0, -1.0, 1.0)[:, None]
    return PcaFit(comps, evals, mean, idx)


def pca_composite(cube: HyperCube, fit: PcaFit, pcs: Sequence[int] = (0, 1, 2),
                  stretch: Sequence[float] = (2.0, 98.0)) -> RgbComposite:
    pcs = tuple(int(i) for i in pcs)
    n = fit.components.shape[0]
    if len(pcs) != 3 or len(set(pcs)) != 3 or not all(0 <= i < n for i in pcs):
        raise ValueError(f"need 3 distinct component indices in [0, {n}), got {pcs}")
    scores = fit.components[list(pcs)] @ (
        cube.data[fit.band_indices].reshape(fit.band_indices.size, -1).astype(np.float64)
        - fit.mean_spectrum[:, None])
    # numerically null components carry only rounding noise
    null = fit.eigenvalues[list(pcs)] <= 1e-12 * max(fit.eigenvalues[0], 1e-300)
    scores[null] = 0.0
    comp = render_composite(scores.reshape(3, cube.rows, cube.cols), *stretch,
                            sources=[f"pc{i}" for i in pcs])
    comp.provenance["band_indices"] = fit.band_indices.tolist()
    return comp
