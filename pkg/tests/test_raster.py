import warnings

import numpy as np
import pytest
from PIL import Image

from hsfusion.raster import (HyperCube, PanImage, RasterError, RasterFormatError,
                             extract_tile, merge_tiles, plan_tiles, read_raster,
                             render_composite, write_raster)


def test_cube_is_immutable_float32():
    cube = HyperCube(np.arange(24, dtype=np.float64).reshape(2, 3, 4), [500.0, 600.0])
    assert cube.data.dtype == np.float32
    assert cube.shape == (2, 3, 4)
    with pytest.raises(ValueError):
        cube.data[0, 0, 0] = 1.0


def test_cube_rejects_bad_wavelengths():
    with pytest.raises(RasterError):
        HyperCube(np.zeros((2, 3, 3)), [500.0])
    with pytest.raises(RasterError):
        HyperCube(np.zeros((2, 3, 3)), [600.0, 500.0])


def test_plan_counts_match_ceiling():
    grid = plan_tiles(7600, 7400, 360, 6)
    assert len(grid) == 22 * 21 == 462
    edge = grid.tiles[-1]
    assert (edge.valid_rows, edge.valid_cols) == (7600 - 21 * 360, 7400 - 20 * 360)


def test_plan_leaves_one_row_sliver():
    grid = plan_tiles(361, 360, 360, 6)
    assert len(grid) == 2
    assert grid.tiles[1].valid_rows == 1 and grid.tiles[1].valid_cols == 360


def test_plan_rejects_misaligned_tile():
    with pytest.raises(RasterError):
        plan_tiles(100, 100, 35, 6)


def test_reflect_pad_hand_example():
    # 4x4 ramp, tile 6: padding mirrors about the edge, repeating the edge sample
    ramp = PanImage(np.arange(16, dtype=float).reshape(4, 4))
    grid = plan_tiles(4, 4, 6, 2)
    tile = extract_tile(ramp, grid, 0).data
    expected = np.array([
        [0, 1, 2, 3, 3, 2],
        [4, 5, 6, 7, 7, 6],
        [8, 9, 10, 11, 11, 10],
        [12, 13, 14, 15, 15, 14],
        [12, 13, 14, 15, 15, 14],
        [8, 9, 10, 11, 11, 10],
    ], dtype=np.float32)
    np.testing.assert_array_equal(tile, expected)


def test_zero_pad():
    img = PanImage(np.ones((4, 4)))
    tile = extract_tile(img, plan_tiles(4, 4, 6, 2, "zero"), 0).data
    assert tile[:4, :4].sum() == 16 and tile[4:].sum() == 0 and tile[:, 4:].sum() == 0


@pytest.mark.parametrize("pad", ["reflect", "zero"])
def test_merge_extract_round_trip(rng, pad):
    cube = HyperCube(rng.standard_normal((3, 50, 38)))
    grid = plan_tiles(50, 38, 12, 6, pad)
    tiles = [extract_tile(cube, grid, i) for i in range(len(grid))]
    np.testing.assert_array_equal(merge_tiles(tiles, grid).data, cube.data)


def test_scaled_grid_aligns_with_low_resolution():
    grid = plan_tiles(72, 48, 24, 6)
    low = grid.scaled(6)
    assert low.tile_size == 4 and (low.source_rows, low.source_cols) == (12, 8)
    with pytest.raises(RasterError):
        plan_tiles(70, 48, 24, 6).scaled(6)


def test_merge_reports_missing_tile():
    img = PanImage(np.zeros((12, 12)))
    grid = plan_tiles(12, 12, 6, 2)
    tiles = [extract_tile(img, grid, i) for i in range(len(grid))]
    tiles[2] = None
    with pytest.raises(RasterError, match="missing tiles \\[2\\]"):
        merge_tiles(tiles, grid)


def test_write_read_round_trip(tmp_path, rng):
    cube = HyperCube(rng.standard_normal((4, 5, 6)), [400.5, 500.0, 600.25, 700.0], 30.0,
                     ("a", "b", "c", "d"))
    hdr = write_raster(cube, tmp_path / "cube.hdr")
    back = read_raster(hdr)
    np.testing.assert_array_equal(back.data, cube.data)
    np.testing.assert_array_equal(back.wavelengths_nm, cube.wavelengths_nm)
    assert back.band_names == cube.band_names and back.gsd_m == 30.0
    pan = PanImage(rng.standard_normal((10, 12)), 5.0)
    back = read_raster(write_raster(pan, tmp_path / "pan.img"))
    assert isinstance(back, PanImage)
    np.testing.assert_array_equal(back.data, pan.data)


def _write_pair(path, header, payload):
    (path.parent / (path.stem + ".hdr")).write_text(header)
    path.write_bytes(payload)


@pytest.mark.parametrize("interleave,layout", [
    ("bsq", lambda a: a), ("bil", lambda a: a.transpose(1, 0, 2)),
    ("bip", lambda a: a.transpose(1, 2, 0))])
def test_read_interleave_and_byte_order(tmp_path, interleave, layout):
    data = np.arange(2 * 3 * 4, dtype=np.int16).reshape(2, 3, 4)
    header = ("ENVI\nsamples = 4\nlines = 3\nbands = 2\nheader offset = 0\n"
              f"data type = 2\ninterleave = {interleave}\nbyte order = 1\n"
              "wavelength = {500, 600}\n")
    _write_pair(tmp_path / "x.img", header, np.ascontiguousarray(layout(data)).astype(">i2").tobytes())
    np.testing.assert_array_equal(read_raster(tmp_path / "x.img").data, data)


def test_read_header_offset(tmp_path):
    data = np.arange(6, dtype="<f4").reshape(1, 2, 3)
    header = "ENVI\nsamples = 3\nlines = 2\nbands = 1\nheader offset = 7\ndata type = 4\n"
    _write_pair(tmp_path / "x.img", header, b"\x00" * 7 + data.tobytes())
    np.testing.assert_array_equal(read_raster(tmp_path / "x.hdr").data, data[0])


def test_read_size_mismatch(tmp_path):
    header = "ENVI\nsamples = 3\nlines = 2\nbands = 1\ndata type = 4\n"
    _write_pair(tmp_path / "x.img", header, b"\x00" * 20)
    with pytest.raises(RasterFormatError, match="24"):
        read_raster(tmp_path / "x.img")


def test_read_unknown_dtype(tmp_path):
    header = "ENVI\nsamples = 1\nlines = 1\nbands = 1\ndata type = 6\n"
    _write_pair(tmp_path / "x.img", header, b"\x00" * 8)
    with pytest.raises(RasterFormatError):
        read_raster(tmp_path / "x.img")


def test_read_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_raster(tmp_path / "absent.hdr")


def test_composite_percentile_stretch():
    # percentiles of [-100, 0..7, 100] with linear interpolation: P2 = -82, P98 = 83.26
    values = np.array([-100, 0, 1, 2, 3, 4, 5, 6, 7, 100], dtype=float)
    chan = values.reshape(2, 5)
    comp = render_composite(np.stack([chan, chan, chan]))
    assert comp.provenance["low_values"][0] == pytest.approx(-82.0)
    assert comp.provenance["high_values"][0] == pytest.approx(83.26)
    expected = np.rint(np.clip((values + 82) / (83.26 + 82), 0, 1) * 255)
    np.testing.assert_array_equal(comp.data[0].ravel(), expected)
    assert comp.data[0].ravel()[1] == 127


def test_composite_flags_constant_channel(tmp_path):
    chans = np.stack([np.arange(16.0).reshape(4, 4), np.full((4, 4), 3.0),
                      np.arange(16.0).reshape(4, 4)])
    with pytest.warns(UserWarning, match="degenerate"):
        comp = render_composite(chans)
    assert comp.degenerate_channels == [1]
    assert not comp.data[1].any()
    comp.save_png(tmp_path / "c.png")
    img = np.asarray(Image.open(tmp_path / "c.png"))
    np.testing.assert_array_equal(img, comp.data.transpose(1, 2, 0))
