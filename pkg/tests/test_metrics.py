import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hsfusion.harness import make_scene
from hsfusion.metrics import (MetricError, QualityReport, d_lambda_k, d_s_star, ergas, fmt,
                              q_star, sam, uiqi, uiqi_per_band)
from hsfusion.preprocess import default_sensor, upsample
from hsfusion.raster import HyperCube, PanImage

from _oracles import d_s_oracle, uiqi_oracle

seeds = st.integers(0, 2 ** 32 - 1)


def _cube(seed, shape=(4, 16, 16)):
    return np.random.default_rng(seed).random(shape) + 0.1


def test_uiqi_hand_example():
    # x = [1,2,3,4], y = [2,2,3,3]: mx 2.5, my 2.5, var 1.25 / 0.25, cov 0.5
    # Q = 4 * 0.5 * 6.25 / (1.5 * 12.5) = 2/3
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    y = np.array([[2.0, 2.0], [3.0, 3.0]])
    assert uiqi(x, y, 2) == pytest.approx(2 / 3, abs=1e-12)


def test_uiqi_scaled_copy():
    # y = 2x: correlation 1, luminance 2*1*2/(1+4) = 0.8, contrast 2*1*2/(1+4) = 0.8
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert uiqi(x, 2 * x, 2) == pytest.approx(0.64, abs=1e-12)


def test_uiqi_matches_loop_oracle(rng):
    a, b = rng.random((2, 3, 20, 24))
    assert uiqi(a, b, 8) == pytest.approx(uiqi_oracle(a, b, 8), abs=1e-12)


def test_uiqi_skips_degenerate_blocks():
    a = np.zeros((1, 4, 4))
    a[0, :2, :2] = [[1, 2], [3, 4]]
    b = a.copy()
    assert uiqi(a, b, 2) == pytest.approx(1.0)
    with pytest.raises(MetricError):
        uiqi(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)), 2)


def test_sam_hand_example():
    a = np.array([1.0, 0.0]).reshape(2, 1, 1)
    b = np.array([1.0, 1.0]).reshape(2, 1, 1)
    assert sam(a, b) == pytest.approx(45.0, abs=1e-12)


def test_ergas_hand_example():
    # constant bands 1 and 2 against 1.1 and 2.2: RMSE/mu = 0.1 in both,
    # ERGAS = 100/6 * 0.1 = 1.6667
    ref = np.stack([np.ones((3, 3)), 2 * np.ones((3, 3))])
    assert ergas(ref, 1.1 * ref, 6) == pytest.approx(100 / 6 * 0.1, abs=1e-12)
    assert fmt(ergas(ref, 1.1 * ref, 6)) == "1.6667"


@given(seeds)
def test_identities(seed):
    x = _cube(seed)
    assert abs(uiqi(x, x, 8) - 1) < 1e-9
    assert abs(sam(x, x)) < 1e-9
    assert abs(ergas(x, x, 4)) < 1e-9


@given(seeds, st.floats(0.01, 100))
def test_sam_scale_invariant(seed, c):
    x, y = _cube(seed), _cube(seed + 1)
    assert abs(sam(x, c * y) - sam(x, y)) < 1e-9


@given(seeds)
def test_uiqi_symmetric(seed):
    x, y = _cube(seed), _cube(seed + 1)
    assert abs(uiqi(x, y, 8) - uiqi(y, x, 8)) < 1e-9


@given(seeds)
def test_band_permutation_equivariance(seed):
    x, y = _cube(seed), _cube(seed + 1)
    perm = np.random.default_rng(seed).permutation(x.shape[0])
    np.testing.assert_allclose(uiqi_per_band(x[perm], y[perm], 8),
                               uiqi_per_band(x, y, 8)[perm], atol=1e-12)
    assert sam(x[perm], y[perm]) == pytest.approx(sam(x, y), abs=1e-9)
    assert ergas(x[perm], y[perm], 2) == pytest.approx(ergas(x, y, 2), abs=1e-9)


def test_ranges(rng):
    x, y = rng.random((2, 3, 16, 16))
    assert -1 <= uiqi(x, y, 8) <= 1
    assert 0 <= sam(x, y) <= 180
    assert ergas(x, y, 2) >= 0


def test_shape_mismatch():
    with pytest.raises(MetricError):
        sam(np.ones((2, 3, 3)), np.ones((2, 3, 4)))
    with pytest.raises(MetricError):
        uiqi(np.ones((2, 3, 3)), np.ones((2, 3, 3)), 8)


def test_d_s_star_matches_normal_equations(rng):
    fused = rng.random((3, 10, 10))
    pan = rng.random((10, 10))
    got = d_s_star(HyperCube(fused), PanImage(pan))
    assert got == pytest.approx(d_s_oracle(fused, pan), abs=1e-6)


def test_d_s_star_zero_for_exact_linear_pan(rng):
    fused = rng.random((3, 10, 10))
    pan = np.tensordot([0.3, 0.3, 0.4], fused, axes=1) + 2.0
    assert d_s_star(HyperCube(fused), PanImage(pan)) < 1e-9


def test_full_resolution_on_truth():
    scene = make_scene(96, 96, 20, 3, 6, seed=0)
    dl = d_lambda_k(scene.truth, scene.hs, scene.model, 16)
    ds = d_s_star(scene.truth, scene.pan)
    assert dl < 1e-6 and ds < 1e-6
    up = upsample(scene.hs, 6, offset=0)
    assert d_s_star(up, scene.pan) > ds


@pytest.mark.parametrize("dl,ds,q", [
    (0.00844, 0.55155, 0.44466), (0.00850, 0.55137, 0.44482), (0.00811, 0.55199, 0.44437),
    (0.00982, 0.51065, 0.48454), (0.00988, 0.51036, 0.48480), (0.00875, 0.51200, 0.48372)])
def test_q_star_reproduces_published_rows(dl, ds, q):
    assert abs(q_star(dl, ds) - q) < 5e-5


def test_q_star_domain():
    assert q_star(0, 0) == 1 and q_star(1, 0) == 0
    with pytest.raises(MetricError):
        q_star(-0.1, 0.2)


def test_report_text_and_dict():
    r = QualityReport("wald", uiqi=1.0, sam_deg=0.0, ergas=0.0, parameters={"ratio": 6})
    text = r.to_text()
    assert "uiqi = 1.0000" in text and "sam_deg = 0.0000" in text and "ratio = 6" in text
    assert r.to_dict()["uiqi"] == 1.0
    with pytest.raises(ValueError):
        QualityReport("bogus")
