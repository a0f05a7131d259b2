import numpy as np
import pytest
from scipy.integrate import quad

from hsfusion.harness import make_scene
from hsfusion.harness.scene import smooth_field
from hsfusion.metrics import ergas
from hsfusion.mtfglp import DegenerateLowpassError, glp_lowpass, mtfglp_sharpen
from hsfusion.preprocess import default_sensor, degrade, mtf_kernel, upsample
from hsfusion.raster import HyperCube, PanImage, RasterError

from _oracles import degrade_oracle, upsample_oracle


def _keys_ft(nu):
    def keys(t):
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1 if t <= 1 else -0.5 * t ** 3 + 2.5 * t ** 2 - 4 * t + 2
    return 2 * quad(lambda t: keys(t) * np.cos(2 * np.pi * nu * t), 0, 2)[0]


def _cosine(n, period, axis=1):
    x = np.cos(2 * np.pi * np.arange(n) / period)
    return np.tile(x, (n, 1)) if axis == 1 else np.tile(x[:, None], (1, n))


def _fundamental(row, period):
    # amplitude of cos(2 pi x / period) over whole interior periods
    x = np.arange(row.size)
    w = slice(period, row.size - period)
    return 2 * np.mean(row[w] * np.cos(2 * np.pi * x[w] / period))


def test_constant_pan_is_fixed():
    m = default_sensor(1, 4)
    out = glp_lowpass(PanImage(np.full((16, 16), 3.25)), m).data
    np.testing.assert_allclose(out, 3.25, atol=1e-5)


@pytest.mark.parametrize("ratio", [2, 4, 6])
def test_decimated_nyquist_is_attenuated(ratio):
    n = 12 * ratio
    out = glp_lowpass(PanImage(_cosine(n, 2 * ratio)), default_sensor(1, ratio)).data
    assert np.abs(out[:, 2 * ratio:-2 * ratio]).max() < 0.35


def test_pan_rate_checkerboard_is_removed():
    yy, xx = np.mgrid[0:48, 0:48]
    out = glp_lowpass(PanImage((-1.0) ** (yy + xx)), default_sensor(1, 4)).data
    assert np.abs(out).max() < 1e-3


@pytest.mark.parametrize("ratio,mult", [(2, 8), (4, 8), (6, 8), (4, 4)])
def test_sinusoid_matches_frequency_response(ratio, mult):
    # fundamental after filter + decimate + cubic re-expansion:
    # gaussian response at 1/period times the continuous Keys transfer
    period = mult * ratio
    n = 6 * period
    k = mtf_kernel(0.3, ratio).sum(axis=0)
    x = np.arange(k.size) - k.size // 2
    expect = np.sum(k * np.cos(2 * np.pi * x / period)) * _keys_ft(ratio / period)
    for axis in (0, 1):
        out = glp_lowpass(PanImage(_cosine(n, period, axis)), default_sensor(1, ratio)).data
        line = out[n // 2] if axis == 1 else out[:, n // 2]
        assert _fundamental(line.astype(float), period) == pytest.approx(expect, abs=1e-3)


@pytest.mark.xfail(strict=True, reason="a gain-0.3 Gaussian MTF passes only ~92% of a "
                   "period-8r sinusoid, so the 5% band cannot hold")
def test_slow_sinusoid_within_five_percent():
    ratio, period = 4, 32
    out = glp_lowpass(PanImage(_cosine(6 * period, period)), default_sensor(1, ratio)).data
    assert abs(_fundamental(out[0].astype(float), period) - 1.0) < 0.05


def test_rejects_indivisible():
    with pytest.raises(RasterError):
        glp_lowpass(PanImage(np.zeros((10, 12))), default_sensor(1, 4))


def test_unit_mode_matches_step_by_step_oracle(rng):
    ratio = 2
    m = default_sensor(1, ratio)
    hs = rng.random((1, 6, 6)) + 1.0
    pan = rng.random((12, 12)) + 1.0
    fused, art = mtfglp_sharpen(HyperCube(hs), PanImage(pan), m, "unit")
    up = upsample_oracle(hs[0], ratio, 0)
    matched = (pan - pan.mean()) * up.std() / pan.std() + up.mean()
    low = upsample_oracle(degrade_oracle(matched, mtf_kernel(0.3, ratio), ratio, 0), ratio, 0)
    np.testing.assert_allclose(art.details[0], matched - low, atol=1e-6)
    np.testing.assert_allclose(fused.data[0], up + matched - low, atol=1e-5)
    np.testing.assert_allclose(art.pan_lowpass[0], low, atol=1e-6)


@pytest.mark.parametrize("mode", ["unit", "regression", "hpm"])
def test_constant_pan_returns_upsampled(rng, mode):
    m = default_sensor(3, 2)
    hs = HyperCube(rng.random((3, 6, 6)) + 1.0)
    fused, art = mtfglp_sharpen(hs, PanImage(np.full((12, 12), 2.0)), m, mode)
    assert not np.any(art.details)
    np.testing.assert_allclose(fused.data, upsample(hs, 2, offset=0).data, atol=1e-6)


def test_regression_gain_oracle(rng):
    m = default_sensor(2, 2)
    hs = HyperCube(rng.random((2, 6, 6)) + 1.0)
    fused, art = mtfglp_sharpen(hs, PanImage(rng.random((12, 12))), m, "regression")
    up = upsample(hs, 2, offset=0).data.astype(float)
    for k in range(2):
        low = art.pan_lowpass[k]
        g = np.mean((up[k] - up[k].mean()) * (low - low.mean())) / low.var()
        assert art.gains[k] == pytest.approx(g, rel=1e-9)
        np.testing.assert_allclose(fused.data[k], up[k] + g * art.details[k], atol=1e-5)


def test_hpm_close_to_unit_when_lowpass_tracks_band():
    # the band is a positive affine copy of the pan's low-pass: hpm gains
    # up/low are ~1 everywhere, so both modes inject nearly the same detail
    scene = make_scene(48, 48, 1, 1, 2, seed=0)
    m = scene.model
    rng = np.random.default_rng(2)
    pan = PanImage(10.0 + 0.05 * smooth_field(rng, 48, 48, 2.0))
    hs = HyperCube(degrade(pan, m).data[None])
    unit, _ = mtfglp_sharpen(hs, pan, m, "unit")
    hpm, art = mtfglp_sharpen(hs, pan, m, "hpm")
    rms = np.sqrt(np.mean((unit.data.astype(float) - hpm.data) ** 2))
    assert rms / np.sqrt(np.mean(unit.data.astype(float) ** 2)) < 0.02
    assert art.gains.shape == (1, 48, 48) and np.all(np.isfinite(art.gains))


def test_details_equal_matched_minus_lowpass(rng):
    scene = make_scene(48, 48, 5, 3, 4, seed=1)
    fused, art = mtfglp_sharpen(scene.hs, scene.pan, scene.model)
    up = upsample(scene.hs, 4, offset=0).data.astype(float)
    p = scene.pan.data.astype(float)
    for k in range(5):
        matched = (p - p.mean()) * up[k].std() / p.std() + up[k].mean()
        np.testing.assert_allclose(art.details[k], matched - art.pan_lowpass[k], atol=1e-6)
    assert np.all(np.isfinite(art.gains))


def test_spectral_preservation_ergas():
    scene = make_scene(120, 120, 40, 4, 4, seed=0)
    fused, _ = mtfglp_sharpen(scene.hs, scene.pan, scene.model)
    assert ergas(scene.hs, degrade(fused, scene.model), 4) < 1.0


def _leakage(pan, m):
    hs = HyperCube(degrade(pan, m).data[None])
    _, art = mtfglp_sharpen(hs, pan, m, "unit")
    d = art.details[0]
    dl = degrade(PanImage(d), m).data.astype(float)
    return np.sqrt(np.mean(dl ** 2)) / np.sqrt(np.mean(d ** 2))


def test_detail_leakage_bounded_on_texture():
    # white texture: most detail energy sits above the decimated band
    rng = np.random.default_rng(0)
    m = default_sensor(1, 4)
    assert _leakage(PanImage(1.0 + rng.standard_normal((96, 96))), m) < 0.1


@pytest.mark.xfail(strict=True, reason="the Gaussian MTF is not an ideal low-pass: on "
                   "smooth scenes mid-band detail survives degrade well above 5%")
def test_detail_leakage_below_five_percent_on_smooth_scene():
    rng = np.random.default_rng(0)
    m = default_sensor(1, 4)
    assert _leakage(PanImage(1.0 + smooth_field(rng, 96, 96, 2.0)), m) < 0.05


def test_regression_degenerate_lowpass():
    # pan carrying only pan-rate texture: its low-pass is flat but detail is not
    m = default_sensor(1, 2)
    yy, xx = np.mgrid[0:12, 0:12]
    pan = PanImage(1.0 + (-1.0) ** (yy + xx))
    hs = HyperCube(np.random.default_rng(0).random((1, 6, 6)))
    assert np.ptp(glp_lowpass(pan, m).data) < 1e-6
    with pytest.raises(DegenerateLowpassError):
        mtfglp_sharpen(hs, pan, m, "regression")
    fused, _ = mtfglp_sharpen(hs, pan, m, "unit")
    assert np.all(np.isfinite(fused.data))


def test_rejects_unknown_mode(rng):
    with pytest.raises(ValueError):
        mtfglp_sharpen(HyperCube(np.ones((1, 4, 4))), PanImage(np.ones((8, 8))),
                       default_sensor(1, 2), "bogus")
