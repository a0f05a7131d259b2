"""HySure: subspace-regularized convex fusion solved by split augmented Lagrangian.

The fused cube is E X with X (p x pixels) minimizing

    1/2 |Y_h - E X B M|^2 + lambda_m/2 |Y_m - R E X|^2 + lambda_phi VTV(X D_h, X D_v)

All spatial operators are periodic, so B, D_h and D_v are diagonal in the 2-D
DFT and the X-update is a pointwise division in frequency.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..preprocess import SensorModel, psf_otf, upsample
from ..raster import HyperCube, PanImage, RasterError
from .vca import Subspace


class NumericalError(ArithmeticError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class HysureParams:
    lambda_m: float = 1.0
    lambda_phi: float = 5e-4
    mu: float = 0.05
    max_iter: int = 200
    rel_tol: float = 1e-4
    subspace_dim: int = 10

    def __post_init__(self):
        if min(self.lambda_m, self.lambda_phi, self.mu) <= 0:
            raise ValueError("lambda_m, lambda_phi and mu must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.subspace_dim < 1:
            raise ValueError("subspace_dim must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveTrace:
    objective: list = field(default_factory=list)
    primal_residuals: list = field(default_factory=list)  # (blur, identity, gradient) per iter
    iterations_run: int = 0
    initial_objective: float = float("nan")
    params: dict = field(default_factory=dict)
    subspace_method: str = "vca"

    def to_dict(self) -> dict:
        return asdict(self)


def vtv_prox(gh: np.ndarray, gv: np.ndarray, threshold: float):
    """Group soft-threshold of the stacked per-pixel gradient vector.

    Arrays are (p, rows, cols); the group at each pixel holds all 2p values.
    """
    gh = np.asarray(gh, dtype=np.float64)
    gv = np.asarray(gv, dtype=np.float64)
    if gh.shape != gv.shape:
        raise ValueError(f"gradient shapes differ: {gh.shape} vs {gv.shape}")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    norm = np.sqrt((gh ** 2).sum(axis=0) + (gv ** 2).sum(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, np.maximum(0.0, 1.0 - threshold / norm), 0.0)
    return gh * scale, gv * scale


class _Operators:
    """Fourier-domain blur and difference operators for one image shape."""

    def __init__(self, shape, psf):
        rows, cols = shape
        self.otf_b = psf_otf(psf, shape)
        fy = np.exp(-2j * np.pi * np.fft.fftfreq(rows))[:, None]
        fx = np.exp(-2j * np.pi * np.fft.fftfreq(cols))[None, :]
        self.otf_h = np.broadcast_to(1.0 - fx, shape)
        self.otf_v = np.broadcast_to(1.0 - fy, shape)
        self.denominator = (np.abs(self.otf_b) ** 2 + 1.0 + np.abs(self.otf_h) ** 2
                            + np.abs(self.otf_v) ** 2)

    @staticmethod
    def apply(x, otf):
        return np.fft.ifft2(np.fft.fft2(x) * otf).real

    def blur(self, x):
        return self.apply(x, self.otf_b)

    def grad(self, x):
        fx = np.fft.fft2(x)
        return (np.fft.ifft2(fx * self.otf_h).real, np.fft.ifft2(fx * self.otf_v).real)

    def solve_x(self, v1, v2, v3, v4):
        num = (np.conj(self.otf_b) * np.fft.fft2(v1) + np.fft.fft2(v2)
               + np.conj(self.otf_h) * np.fft.fft2(v3) + np.conj(self.otf_v) * np.fft.fft2(v4))
        return np.fft.ifft2(num / self.denominator).real


def hysure_objective(x, yh, ym, basis, model: SensorModel, params: HysureParams,
                     ops: _Operators = None) -> float:
    """Value of the fusion objective at coefficients ``x`` (p, rows, cols)."""
    r, ph = model.ratio, model.phase
    ops = ops or _Operators(x.shape[1:], model.psf)
    xb = ops.blur(x)[:, ph::r, ph::r]
    fit_h = yh - np.tensordot(basis, xb, axes=1)
    fit_m = ym - np.tensordot(model.response @ basis, x, axes=1)
    gh, gv = ops.grad(x)
    tv = np.sqrt((gh ** 2).sum(axis=0) + (gv ** 2).sum(axis=0)).sum()
    return float(0.5 * np.sum(fit_h ** 2) + 0.5 * params.lambda_m * np.sum(fit_m ** 2)
                 + params.lambda_phi * tv)


def _check_inputs(hs: HyperCube, pan: PanImage, model: SensorModel, subspace: Subspace):
    r = model.ratio
    if pan.shape != (hs.rows * r, hs.cols * r):
        raise RasterError(f"pan {pan.shape} must be hs {hs.shape[1:]} times ratio {r}")
    if subspace.basis.shape[0] != hs.bands:
        raise ValueError(f"subspace has {subspace.basis.shape[0]} bands, cube has {hs.bands}")
    if model.bands != hs.bands:
        raise ValueError(f"sensor response has {model.bands} bands, cube has {hs.bands}")


def hysure_sharpen(hs: HyperCube, pan: PanImage, model: SensorModel, subspace: Subspace,
                   params: HysureParams = HysureParams()):
    _check_inputs(hs, pan, model, subspace)
    r, ph, mu = model.ratio, model.phase, params.mu
    e = subspace.basis
    p = e.shape[1]
    yh = hs.data.astype(np.float64)
    ym = pan.data.astype(np.float64)
    ops = _Operators(pan.shape, model.psf)
    re = model.response @ e  # (p,)

    # V1 is only data-coupled on the sampled lattice
    sys1 = np.linalg.inv(e.T @ e + mu * np.eye(p))
    eyh = np.tensordot(e.T, yh, axes=1)
    sys2 = np.linalg.inv(params.lambda_m * np.outer(re, re) + mu * np.eye(p))
    rym = params.lambda_m * re[:, None, None] * ym[None]

    up = np.asarray(upsample(hs, r, offset=ph).data, dtype=np.float64)
    x = np.tensordot(np.linalg.pinv(e), up, axes=1)
    d1, d2 = np.zeros_like(x), np.zeros_like(x)
    d3, d4 = np.zeros_like(x), np.zeros_like(x)
    trace = SolveTrace(params=params.to_dict(), subspace_method=subspace.method)
    trace.initial_objective = hysure_objective(x, yh, ym, e, model, params, ops)

    for it in range(1, params.max_iter + 1):
        xb = ops.blur(x)
        v1 = xb - d1
        sampled = v1[:, ph::r, ph::r]
        v1[:, ph::r, ph::r] = np.tensordot(sys1, eyh + mu * sampled, axes=1)
        v2 = np.tensordot(sys2, rym + mu * (x - d2), axes=1)
        gh, gv = ops.grad(x)
        v3, v4 = vtv_prox(gh - d3, gv - d4, params.lambda_phi / mu)

        x_new = ops.solve_x(v1 + d1, v2 + d2, v3 + d3, v4 + d4)
        if not np.all(np.isfinite(x_new)):
            raise NumericalError("non-finite coefficients in HySure solve", it)
        xb = ops.blur(x_new)
        gh, gv = ops.grad(x_new)
        res1, res2 = xb - v1, x_new - v2
        res3 = np.sqrt(np.sum((gh - v3) ** 2) + np.sum((gv - v4) ** 2))
        d1 -= res1
        d2 -= res2
        d3 -= gh - v3
        d4 -= gv - v4

        x_norm = np.linalg.norm(x_new)
        change = np.linalg.norm(x_new - x) / max(x_norm, 1e-300)
        x = x_new
        trace.objective.append(hysure_objective(x, yh, ym, e, model, params, ops))
        trace.primal_residuals.append((float(np.linalg.norm(res1)),
                                       float(np.linalg.norm(res2)), float(res3)))
        trace.iterations_run = it
        if change < params.rel_tol:
            break

    fused = np.tensordot(e, x, axes=1)
    return hs.with_data(fused, gsd_m=pan.gsd_m), trace
