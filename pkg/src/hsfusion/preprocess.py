"""Band screening, resampling and the shared forward degradation operator.

Registration convention: a low-resolution sample ``i`` sits on high-resolution
pixel ``ratio * i + phase``. :func:`degrade` blurs with a centred PSF and keeps
every ``ratio``-th pixel starting at ``phase``; fusion methods call
:func:`upsample` with ``offset=phase`` so that interpolated spectra land where
the sensor actually measured them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .raster import HyperCube, PanImage, Raster, RasterError

# Conventional MTF gains at Nyquist when factory values are unavailable.
HS_MTF_GAIN = 0.3
PAN_MTF_GAIN = 0.5

DEFAULT_ATMOSPHERIC_NM = ((1350.0, 1460.0), (1790.0, 1970.0), (2400.0, math.inf))
DEFAULT_SNR_THRESHOLD = 10.0

REASONS = ("kept", "atmospheric", "low_snr", "manual")


@dataclass(frozen=True, eq=False)
class BandMask:
    keep: np.ndarray
    reason: tuple

    def __post_init__(self):
        keep = np.array(self.keep, dtype=bool).ravel()
        reason = tuple(self.reason)
        if len(reason) != keep.size:
            raise ValueError("keep and reason lengths differ")
        if any(r not in REASONS for r in reason):
            raise ValueError(f"reasons must be drawn from {REASONS}")
        if not keep.any():
            raise ValueError("band mask keeps no bands")
        keep.setflags(write=False)
        object.__setattr__(self, "keep", keep)
        object.__setattr__(self, "reason", reason)

    def __len__(self) -> int:
        return self.keep.size

    @property
    def n_kept(self) -> int:
        return int(self.keep.sum())


@dataclass(frozen=True, eq=False)
class SensorModel:
    """Degradation operators linking the high-resolution scene to both sensors.

    ``response`` is the panchromatic spectral response over the hyperspectral
    bands, ``psf`` the hyperspectral blur expressed on the panchromatic grid,
    ``ratio`` the decimation factor and ``phase`` the first kept pixel.
    """

    response: np.ndarray
    psf: np.ndarray
    ratio: int
    mtf_gain_nyquist: Optional[np.ndarray] = None
    phase: int = 0

    def __post_init__(self):
        response = np.array(self.response, dtype=np.float64).ravel()
        psf = np.array(self.psf, dtype=np.float64)
        if np.any(response < 0) or abs(response.sum() - 1) > 1e-9:
            raise ValueError("response must be non-negative and sum to 1")
        if psf.ndim != 2 or psf.shape[0] != psf.shape[1] or psf.shape[0] % 2 == 0:
            raise ValueError(f"psf must be square with odd side, got {psf.shape}")
        if np.any(psf < 0) or abs(psf.sum() - 1) > 1e-9:
            raise ValueError("psf must be non-negative and sum to 1")
        if int(self.ratio) != self.ratio or self.ratio < 2:
            raise ValueError(f"ratio must be an integer >= 2, got {self.ratio}")
        if not 0 <= self.phase < self.ratio:
            raise ValueError(f"phase must lie in [0, ratio), got {self.phase}")
        gains = self.mtf_gain_nyquist
        gains = np.full(response.size, HS_MTF_GAIN) if gains is None else \
            np.broadcast_to(np.asarray(gains, dtype=np.float64), response.shape).copy()
        if np.any((gains <= 0) | (gains >= 1)):
            raise ValueError("MTF gains must lie strictly inside (0, 1)")
        for arr in (response, psf, gains):
            arr.setflags(write=False)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "psf", psf)
        object.__setattr__(self, "ratio", int(self.ratio))
        object.__setattr__(self, "mtf_gain_nyquist", gains)
        object.__setattr__(self, "phase", int(self.phase))

    @property
    def bands(self) -> int:
        return self.response.size

    def select_bands(self, keep) -> "SensorModel":
        """Restrict to a band subset; the response is renormalized."""
        keep = np.asarray(keep, dtype=bool)
        response = self.response[keep]
        total = response.sum()
        if total <= 0:
            raise ValueError("selected bands carry no panchromatic response")
        return SensorModel(response / total, self.psf, self.ratio,
                           self.mtf_gain_nyquist[keep], self.phase)

    def with_psf(self, psf) -> "SensorModel":
        return SensorModel(self.response, psf, self.ratio, self.mtf_gain_nyquist, self.phase)

    def to_dict(self) -> dict:
        return {"response": self.response.tolist(), "psf": self.psf.tolist(),
                "ratio": self.ratio, "mtf_gain_nyquist": self.mtf_gain_nyquist.tolist(),
                "phase": self.phase}

    @classmethod
    def from_dict(cls, d: dict) -> "SensorModel":
        return cls(d["response"], d["psf"], d["ratio"], d.get("mtf_gain_nyquist"),
                   d.get("phase", 0))


def default_sensor(bands: int, ratio: int, gain: float = HS_MTF_GAIN,
                   psf_size: Optional[int] = None) -> SensorModel:
    """Flat spectral response and a Gaussian PSF matched to ``gain``."""
    psf = mtf_kernel(gain, ratio, psf_size)
    return SensorModel(np.full(bands, 1.0 / bands), psf, ratio, np.full(bands, gain))


# ---------------------------------------------------------------- band screening

def block_snr(band: np.ndarray, block: int = 8) -> float:
    """Median over ``block`` x ``block`` tiles of |tile mean| / tile std.

    Tiles with zero spread count as infinitely clean. Images smaller than one
    block are treated as a single tile.
    """
    band = np.asarray(band, dtype=np.float64)
    nr, nc = band.shape[0] // block, band.shape[1] // block
    if nr == 0 or nc == 0:
        tiles = band.reshape(1, -1)
    else:
        tiles = (band[:nr * block, :nc * block]
                 .reshape(nr, block, nc, block).transpose(0, 2, 1, 3)
                 .reshape(nr * nc, block * block))
    mean = np.abs(tiles.mean(axis=1))
    std = tiles.std(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(std > 0, mean / np.where(std > 0, std, 1.0), np.inf)
    return float(np.median(snr))


def screen_bands(cube: HyperCube, manual_drop: Iterable = (), snr_threshold: float = 0.0,
                 drop_indices: Sequence[int] = ()) -> BandMask:
    """Tag each band as kept, atmospheric (inside a dropped wavelength
    interval, bounds inclusive), low_snr, or manual (explicit index)."""
    intervals = [(float(lo), float(hi)) for lo, hi in manual_drop]
    for lo, hi in intervals:
        if not lo < hi:
            raise ValueError(f"empty wavelength interval ({lo}, {hi})")
    if intervals and cube.wavelengths_nm is None:
        raise ValueError("wavelength intervals given but the cube has no wavelengths")
    reasons = []
    for b in range(cube.bands):
        if b in drop_indices:
            reasons.append("manual")
        elif intervals and any(lo <= cube.wavelengths_nm[b] <= hi for lo, hi in intervals):
            reasons.append("atmospheric")
        elif snr_threshold > 0 and block_snr(cube.data[b]) < snr_threshold:
            reasons.append("low_snr")
        else:
            reasons.append("kept")
    keep = np.array([r == "kept" for r in reasons])
    if not keep.any():
        raise ValueError("band screening dropped every band")
    return BandMask(keep, tuple(reasons))


def apply_band_mask(cube: HyperCube, mask: BandMask) -> HyperCube:
    if len(mask) != cube.bands:
        raise ValueError(f"mask has {len(mask)} entries for a {cube.bands}-band cube")
    keep = mask.keep
    wl = None if cube.wavelengths_nm is None else cube.wavelengths_nm[keep]
    names = None if cube.band_names is None else \
        tuple(n for n, k in zip(cube.band_names, keep) if k)
    return HyperCube(cube.data[keep], wl, cube.gsd_m, names)


# ---------------------------------------------------------------- degradation

def psf_otf(psf: np.ndarray, shape: tuple) -> np.ndarray:
    """Transfer function of ``psf`` centred on pixel (0, 0) of a periodic grid.

    Kernels larger than the grid wrap around, which is exactly what periodic
    convolution does with them.
    """
    psf = np.asarray(psf, dtype=np.float64)
    rows, cols = shape
    ky = (np.arange(psf.shape[0]) - psf.shape[0] // 2) % rows
    kx = (np.arange(psf.shape[1]) - psf.shape[1] // 2) % cols
    pad = np.zeros(shape)
    np.add.at(pad, (ky[:, None], kx[None, :]), psf)
    return np.fft.fft2(pad)


def circular_convolve(data: np.ndarray, psf: np.ndarray) -> np.ndarray:
    """Periodic convolution of every trailing 2-D plane with a centred kernel."""
    data = np.asarray(data, dtype=np.float64)
    otf = psf_otf(psf, data.shape[-2:])
    return np.fft.ifft2(np.fft.fft2(data) * otf).real


def degrade(source: Raster, model: SensorModel, phase: Optional[int] = None) -> Raster:
    """Blur with the model PSF (periodic boundary) and decimate by its ratio."""
    r = model.ratio
    phase = model.phase if phase is None else phase
    rows, cols = source.shape[-2:]
    if rows % r or cols % r:
        raise RasterError(f"dims {rows}x{cols} not divisible by ratio {r}")
    low = circular_convolve(source.data, model.psf)[..., phase::r, phase::r]
    return source.with_data(low, gsd_m=source.gsd_m * r)


def _keys_cubic(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(x)
    out = np.zeros_like(x)
    near = x <= 1
    far = (x > 1) & (x < 2)
    out[near] = (a + 2) * x[near] ** 3 - (a + 3) * x[near] ** 2 + 1
    out[far] = a * x[far] ** 3 - 5 * a * x[far] ** 2 + 8 * a * x[far] - 4 * a
    return out


def _reflect_index(k: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(k)
    period = 2 * (n - 1)
    k = np.mod(k, period)
    return np.where(k < n, k, period - k)


def interpolation_matrix(n_low: int, ratio: int, offset: float) -> np.ndarray:
    """(n_low*ratio, n_low) bicubic weights; sample i sits at ratio*i + offset.

    Out-of-range taps mirror about the first/last sample.
    """
    pos = (np.arange(n_low * ratio) - offset) / ratio
    base = np.floor(pos).astype(int)
    mat = np.zeros((n_low * ratio, n_low))
    rows = np.arange(n_low * ratio)
    for shift in (-1, 0, 1, 2):
        k = base + shift
        w = _keys_cubic(pos - k)
        np.add.at(mat, (rows, _reflect_index(k, n_low)), w)
    return mat


def upsample(source: Raster, ratio: int, offset: Optional[float] = None) -> Raster:
    """Separable bicubic (Keys, a = -0.5) interpolation to ``ratio`` x the dims.

    ``offset`` is the high-resolution position of low-resolution sample 0; the
    default ``(ratio - 1) / 2`` puts each sample at the centre of its block.
    """
    if int(ratio) != ratio or ratio < 2:
        raise ValueError(f"ratio must be an integer >= 2, got {ratio}")
    if offset is None:
        offset = (ratio - 1) / 2
    rows, cols = source.shape[-2:]
    wr = interpolation_matrix(rows, ratio, offset)
    wc = interpolation_matrix(cols, ratio, offset)
    data = np.asarray(source.data, dtype=np.float64)
    out = np.einsum("ir,...rc,jc->...ij", wr, data, wc, optimize=True)
    return source.with_data(out, gsd_m=source.gsd_m / ratio)


def _gaussian(sigma: float, size: int) -> np.ndarray:
    x = np.arange(size) - size // 2
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _nyquist_response(sigma: float, size: int, ratio: int) -> float:
    g = _gaussian(sigma, size)
    x = np.arange(size) - size // 2
    return float(np.sum(g * np.cos(np.pi * x / ratio)))


def mtf_kernel(gain_nyquist: float, ratio: int, size: Optional[int] = None) -> np.ndarray:
    """Isotropic Gaussian whose response at 1/(2*ratio) cycles/pixel is ``gain_nyquist``.

    The width starts from the continuous relation
    sigma = ratio * sqrt(-2 ln g) / pi and is then refined so the sampled,
    truncated kernel hits the target gain.
    """
    if not 0 < gain_nyquist < 1:
        raise ValueError(f"gain must lie in (0, 1), got {gain_nyquist}")
    sigma0 = ratio * math.sqrt(-2.0 * math.log(gain_nyquist)) / math.pi
    if size is None:
        size = max(2 * ratio + 1, 2 * math.ceil(4 * sigma0) + 1)
    if size % 2 == 0 or size < 2 * ratio + 1:
        raise ValueError(f"size must be odd and >= {2 * ratio + 1}, got {size}")

    def miss(s):
        return _nyquist_response(s, size, ratio) - gain_nyquist

    lo, hi = 1e-3, max(4 * sigma0, 1.0)
    if miss(lo) <= 0:
        sigma = lo
    elif miss(hi) >= 0:
        sigma = hi
    else:
        sigma = brentq(miss, lo, hi, xtol=1e-12)
    g = _gaussian(sigma, size)
    kernel = np.outer(g, g)
    return kernel / kernel.sum()
