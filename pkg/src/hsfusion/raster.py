"""Raster data model, tile geometry, ENVI-style I/O and composite rendering.

Rasters are immutable: arrays are stored as read-only float32 and every
operation returns a new object.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np


class RasterError(ValueError):
    """Invalid raster contents or geometry."""


class RasterFormatError(RasterError):
    """Malformed header or header/payload disagreement."""


def _frozen_float32(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float32, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HyperCube:
    """Band-major (bands, rows, cols) cube with per-band wavelengths in nm.

    ``wavelengths_nm`` may be None when the source carried no spectral
    metadata; operations that select by wavelength then refuse to run.
    """

    data: np.ndarray
    wavelengths_nm: Optional[np.ndarray] = None
    gsd_m: float = 30.0
    band_names: Optional[tuple] = None

    def __post_init__(self):
        data = _frozen_float32(self.data)
        if data.ndim != 3 or min(data.shape) == 0:
            raise RasterError(f"cube data must be non-empty 3-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise RasterError("cube contains non-finite samples")
        if not self.gsd_m > 0:
            raise RasterError(f"gsd_m must be positive, got {self.gsd_m}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "gsd_m", float(self.gsd_m))
        if self.wavelengths_nm is not None:
            wl = np.array(self.wavelengths_nm, dtype=np.float64, copy=True).ravel()
            if wl.size != data.shape[0]:
                raise RasterError(f"{wl.size} wavelengths for {data.shape[0]} bands")
            if wl.size > 1 and not np.all(np.diff(wl) > 0):
                raise RasterError("wavelengths must be strictly increasing")
            wl.setflags(write=False)
            object.__setattr__(self, "wavelengths_nm", wl)
        if self.band_names is not None:
            names = tuple(str(n) for n in self.band_names)
            if len(names) != data.shape[0]:
                raise RasterError(f"{len(names)} band names for {data.shape[0]} bands")
            object.__setattr__(self, "band_names", names)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def with_data(self, data, gsd_m: Optional[float] = None) -> "HyperCube":
        """Same band metadata, new pixels (band count must match)."""
        return HyperCube(data, self.wavelengths_nm,
                         self.gsd_m if gsd_m is None else gsd_m, self.band_names)


@dataclass(frozen=True, eq=False)
class PanImage:
    data: np.ndarray
    gsd_m: float = 5.0

    def __post_init__(self):
        data = _frozen_float32(self.data)
        if data.ndim != 2 or min(data.shape) == 0:
            raise RasterError(f"pan data must be non-empty 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise RasterError("pan contains non-finite samples")
        if not self.gsd_m > 0:
            raise RasterError(f"gsd_m must be positive, got {self.gsd_m}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "gsd_m", float(self.gsd_m))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def with_data(self, data, gsd_m: Optional[float] = None) -> "PanImage":
        return PanImage(data, self.gsd_m if gsd_m is None else gsd_m)


Raster = Union[HyperCube, PanImage]


# ---------------------------------------------------------------- tiling

PAD_MODES = ("reflect", "zero")


@dataclass(frozen=True)
class Tile:
    row_origin: int
    col_origin: int
    valid_rows: int
    valid_cols: int


@dataclass(frozen=True)
class TileGrid:
    tile_size: int
    source_rows: int
    source_cols: int
    ratio: int = 6
    pad_mode: str = "reflect"
    tiles: tuple = field(default=(), repr=False)

    @property
    def n_tile_rows(self) -> int:
        return math.ceil(self.source_rows / self.tile_size)

    @property
    def n_tile_cols(self) -> int:
        return math.ceil(self.source_cols / self.tile_size)

    def __len__(self) -> int:
        return len(self.tiles)

    def scaled(self, factor: int) -> "TileGrid":
        """The same partition seen on a grid ``factor`` times coarser.

        Used to cut the low-resolution cube with the geometry planned on the
        panchromatic grid. Every origin and extent must divide exactly.
        """
        values = [self.tile_size, self.source_rows, self.source_cols]
        values += [v for t in self.tiles for v in (t.row_origin, t.col_origin,
                                                   t.valid_rows, t.valid_cols)]
        if any(v % factor for v in values):
            raise RasterError(f"tile grid does not divide evenly by {factor}")
        tiles = tuple(Tile(t.row_origin // factor, t.col_origin // factor,
                           t.valid_rows // factor, t.valid_cols // factor)
                      for t in self.tiles)
        return TileGrid(self.tile_size // factor, self.source_rows // factor,
                        self.source_cols // factor, 1, self.pad_mode, tiles)


def plan_tiles(rows: int, cols: int, tile_size: int = 360, ratio: int = 6,
               pad_mode: str = "reflect") -> TileGrid:
    """Partition a rows x cols raster into square tiles in row-major order."""
    if rows <= 0 or cols <= 0:
        raise RasterError(f"raster dims must be positive, got {rows}x{cols}")
    if tile_size <= 0 or ratio <= 0:
        raise RasterError("tile_size and ratio must be positive")
    if tile_size % ratio:
        raise RasterError(f"tile_size {tile_size} is not a multiple of ratio {ratio}; "
                          "low- and high-resolution tiles would not align")
    if pad_mode not in PAD_MODES:
        raise RasterError(f"pad_mode must be one of {PAD_MODES}, got {pad_mode!r}")
    tiles = tuple(Tile(r0, c0, min(tile_size, rows - r0), min(tile_size, cols - c0))
                  for r0 in range(0, rows, tile_size)
                  for c0 in range(0, cols, tile_size))
    return TileGrid(tile_size, rows, cols, ratio, pad_mode, tiles)


def _check_source(raster: Raster, grid: TileGrid):
    if raster.shape[-2:] != (grid.source_rows, grid.source_cols):
        raise RasterError(f"raster {raster.shape[-2:]} does not match grid "
                          f"{(grid.source_rows, grid.source_cols)}")


def extract_tile(raster: Raster, grid: TileGrid, index: int) -> Raster:
    """Cut tile ``index`` and pad it out to tile_size x tile_size.

    ``reflect`` mirrors about the raster edge (the edge sample is repeated),
    which keeps the mirror axis on a pixel boundary at every resolution.
    """
    if not 0 <= index < len(grid.tiles):
        raise IndexError(f"tile index {index} out of range for {len(grid.tiles)} tiles")
    _check_source(raster, grid)
    t = grid.tiles[index]
    data = raster.data[..., t.row_origin:t.row_origin + t.valid_rows,
                       t.col_origin:t.col_origin + t.valid_cols]
    pad = [(0, 0)] * (data.ndim - 2)
    pad += [(0, grid.tile_size - t.valid_rows), (0, grid.tile_size - t.valid_cols)]
    if grid.pad_mode == "zero":
        out = np.pad(data, pad, mode="constant")
    else:
        out = np.pad(data, pad, mode="symmetric")
    return raster.with_data(out)


def merge_tiles(tiles: Sequence[Raster], grid: TileGrid) -> Raster:
    """Reassemble the valid regions of ``tiles`` into one raster."""
    if len(tiles) != len(grid.tiles):
        raise RasterError(f"expected {len(grid.tiles)} tiles, got {len(tiles)}")
    if any(t is None for t in tiles):
        missing = [i for i, t in enumerate(tiles) if t is None]
        raise RasterError(f"missing tiles {missing}")
    first = tiles[0]
    lead = first.shape[:-2]
    out = np.empty(lead + (grid.source_rows, grid.source_cols), dtype=np.float32)
    for i, (tile, t) in enumerate(zip(tiles, grid.tiles)):
        if tile.shape != lead + (grid.tile_size, grid.tile_size):
            raise RasterError(f"tile {i} has shape {tile.shape}, expected "
                              f"{lead + (grid.tile_size, grid.tile_size)}")
        out[..., t.row_origin:t.row_origin + t.valid_rows,
            t.col_origin:t.col_origin + t.valid_cols] = \
            tile.data[..., :t.valid_rows, :t.valid_cols]
    return first.with_data(out)


# ---------------------------------------------------------------- file I/O

_DTYPES = {1: "u1", 2: "i2", 3: "i4", 4: "f4", 5: "f8", 12: "u2", 13: "u4",
           14: "i8", 15: "u8"}
_DATA_SUFFIXES = (".img", ".dat", ".bin", ".raw", "")


def _header_and_data_paths(path) -> tuple:
    path = Path(path)
    if path.suffix.lower() == ".hdr":
        for suffix in _DATA_SUFFIXES:
            candidate = path.with_suffix(suffix)
            if candidate.exists():
                return path, candidate
        return path, path.with_suffix(".img")
    appended = path.with_name(path.name + ".hdr")
    return (appended if appended.exists() else path.with_suffix(".hdr")), path


def _parse_header(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ENVI":
        raise RasterFormatError("header must start with 'ENVI'")
    body = "\n".join(lines[1:])
    fields = {}
    for m in re.finditer(r"^\s*([^=\n]+?)\s*=\s*(\{[^}]*\}|[^\n]*)", body, re.M):
        key, value = m.group(1).strip().lower(), m.group(2).strip()
        if value.startswith("{"):
            value = [v.strip() for v in value[1:-1].split(",") if v.strip()]
        fields[key] = value
    return fields


def _int_field(fields: dict, key: str, default=None) -> int:
    if key not in fields:
        if default is None:
            raise RasterFormatError(f"header missing required field {key!r}")
        return default
    try:
        return int(fields[key])
    except (TypeError, ValueError):
        raise RasterFormatError(f"header field {key!r} is not an integer: {fields[key]!r}")


def read_raster(path) -> Raster:
    """Read an ENVI-style header + binary pair.

    ``path`` may name either file. Single-band rasters without wavelengths
    (or tagged ``raster kind = pan``) come back as :class:`PanImage`.
    """
    hdr_path, data_path = _header_and_data_paths(path)
    fields = _parse_header(hdr_path.read_text())
    samples = _int_field(fields, "samples")
    lines = _int_field(fields, "lines")
    bands = _int_field(fields, "bands")
    if min(samples, lines, bands) <= 0:
        raise RasterFormatError("samples, lines and bands must be positive")
    code = _int_field(fields, "data type")
    if code not in _DTYPES:
        raise RasterFormatError(f"unsupported data type code {code}")
    order = _int_field(fields, "byte order", 0)
    offset = _int_field(fields, "header offset", 0)
    dtype = np.dtype(("<" if order == 0 else ">") + _DTYPES[code])
    interleave = str(fields.get("interleave", "bsq")).lower()
    if interleave not in ("bsq", "bil", "bip"):
        raise RasterFormatError(f"unknown interleave {interleave!r}")

    payload = data_path.read_bytes()[offset:]
    expected = samples * lines * bands * dtype.itemsize
    if len(payload) != expected:
        raise RasterFormatError(f"payload holds {len(payload)} bytes, header declares "
                                f"{bands}x{lines}x{samples} -> {expected}")
    flat = np.frombuffer(payload, dtype=dtype)
    if interleave == "bsq":
        data = flat.reshape(bands, lines, samples)
    elif interleave == "bil":
        data = flat.reshape(lines, bands, samples).transpose(1, 0, 2)
    else:
        data = flat.reshape(lines, samples, bands).transpose(2, 0, 1)

    gsd = float(fields["gsd_m"]) if "gsd_m" in fields else None
    wavelengths = None
    if "wavelength" in fields:
        try:
            wavelengths = np.array([float(v) for v in fields["wavelength"]])
        except ValueError:
            raise RasterFormatError("wavelength list is not numeric")
    names = fields.get("band names")
    kind = str(fields.get("raster kind", "")).lower()
    if kind == "pan" or (kind != "cube" and bands == 1 and wavelengths is None):
        return PanImage(data[0], gsd if gsd is not None else 5.0)
    return HyperCube(data, wavelengths, gsd if gsd is not None else 30.0,
                     tuple(names) if isinstance(names, list) else None)


def write_raster(raster: Raster, path) -> Path:
    """Write header + band-sequential little-endian float32 payload.

    Returns the header path. A ``.hdr`` path gets its payload next to it
    with suffix ``.img``; any other path is the payload and gains ``.hdr``.
    """
    path = Path(path)
    if path.suffix.lower() == ".hdr":
        hdr_path, data_path = path, path.with_suffix(".img")
    else:
        hdr_path, data_path = path.with_name(path.name + ".hdr"), path
    is_pan = isinstance(raster, PanImage)
    data = raster.data[None] if is_pan else raster.data
    bands, lines, samples = data.shape
    head = ["ENVI", f"samples = {samples}", f"lines = {lines}", f"bands = {bands}",
            "header offset = 0", "file type = ENVI Standard", "data type = 4",
            "interleave = bsq", "byte order = 0",
            f"raster kind = {'pan' if is_pan else 'cube'}", f"gsd_m = {raster.gsd_m!r}"]
    if not is_pan:
        if raster.wavelengths_nm is not None:
            head.append("wavelength units = Nanometers")
            head.append("wavelength = { " + ", ".join(repr(float(w)) for w in
                                                      raster.wavelengths_nm) + " }")
        if raster.band_names is not None:
            head.append("band names = { " + ", ".join(raster.band_names) + " }")
    try:
        data_path.write_bytes(np.ascontiguousarray(data, dtype="<f4").tobytes())
        hdr_path.write_text("\n".join(head) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write raster to {path}: {exc}") from exc
    return hdr_path


# ---------------------------------------------------------------- composites

@dataclass(frozen=True, eq=False)
class RgbComposite:
    data: np.ndarray  # (3, rows, cols) uint8
    provenance: dict

    def __post_init__(self):
        if self.data.dtype != np.uint8 or self.data.ndim != 3 or self.data.shape[0] != 3:
            raise RasterError("composite data must be uint8 with shape (3, rows, cols)")

    @property
    def degenerate_channels(self) -> list:
        return [i for i, flag in enumerate(self.provenance.get("degenerate", ())) if flag]

    def save_png(self, path) -> None:
        from PIL import Image

        Image.fromarray(np.ascontiguousarray(self.data.transpose(1, 2, 0)),
                        mode="RGB").save(path, format="PNG")


def render_composite(bands, stretch_lo: float = 2.0, stretch_hi: float = 98.0,
                     sources: Optional[Sequence] = None) -> RgbComposite:
    """Percentile-stretch three channels independently into 8-bit RGB.

    A channel whose two percentiles coincide cannot be stretched; it is
    rendered black and flagged in ``provenance['degenerate']``.
    """
    arr = np.asarray(bands, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise RasterError(f"need 3 channels, got shape {arr.shape}")
    if not (0 <= stretch_lo < stretch_hi <= 100):
        raise RasterError(f"bad stretch percentiles ({stretch_lo}, {stretch_hi})")
    out = np.zeros(arr.shape, dtype=np.uint8)
    lows, highs, degenerate = [], [], []
    for c in range(3):
        lo, hi = np.percentile(arr[c], [stretch_lo, stretch_hi])
        lows.append(float(lo))
        highs.append(float(hi))
        if not hi > lo:
            degenerate.append(True)
            warnings.warn(f"composite channel {c} is degenerate (lo == hi == {lo})",
                          stacklevel=2)
            continue
        degenerate.append(False)
        scaled = np.clip((arr[c] - lo) / (hi - lo), 0.0, 1.0) * 255.0
        out[c] = np.rint(scaled).astype(np.uint8)
    provenance = {
        "sources": list(sources) if sources is not None else [0, 1, 2],
        "stretch_percentiles": [float(stretch_lo), float(stretch_hi)],
        "low_values": lows,
        "high_values": highs,
        "degenerate": degenerate,
    }
    return RgbComposite(out, provenance)
