import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdefog.imaging import ColorImage
from jointdefog.metrics import blind_contrast, metrics_report, psnr, visible_edges


def _img(lum):
    return ColorImage(np.repeat(np.asarray(lum, dtype=float)[..., None], 3, axis=2))


def test_psnr_examples():
    a = ColorImage(np.random.default_rng(0).uniform(size=(4, 4, 3)))
    assert psnr(a, a) == math.inf
    assert psnr(ColorImage(a.data + 0.1), a) == pytest.approx(20.0, abs=1e-9)
    assert psnr(ColorImage(np.zeros((3, 3, 3))), ColorImage(np.ones((3, 3, 3)))) == 0.0
    with pytest.raises(ValueError):
        psnr(a, ColorImage(np.zeros((4, 5, 3))))


def test_visible_edge_examples():
    assert not visible_edges(_img(np.full((8, 8), 0.4))).any()
    step = np.full((8, 8), 0.2)
    step[:, 4:] = 0.8
    mask = visible_edges(_img(step))
    assert mask[:, 3].all() and mask[:, 4].all() and not mask[:, 0].any()
    faint = np.full((8, 8), 0.5)
    faint[:, 4:] = 0.51
    assert not visible_edges(_img(faint)).any()


def test_identity_restoration():
    img = ColorImage(np.random.default_rng(1).uniform(0.2, 0.8, (32, 32, 3)))
    rep = blind_contrast(img, img)
    assert rep.e == 0 and rep.r_bar == 1.0 and not rep.degenerate


def test_contrast_stretch_doubles_r_bar():
    rng = np.random.default_rng(2)
    lum = 0.5 + 0.1 * rng.standard_normal((48, 48))
    before = _img(lum)
    after = _img(lum.mean() + 2 * (lum - lum.mean()))
    rep = blind_contrast(before, after)
    assert abs(rep.r_bar / 2 - 1) <= 0.01
    assert rep.e >= 0 and rep.e < 0.1


def test_degenerate_before():
    flat = _img(np.full((10, 10), 0.5))
    step = np.full((10, 10), 0.2)
    step[:, 5:] = 0.8
    rep = blind_contrast(flat, _img(step))
    assert rep.degenerate and rep.e == rep.n_after > 0


@given(st.integers(0, 1000), st.floats(1.1, 3.0))
def test_r_bar_scales_with_deviation_gain(seed, k):
    rng = np.random.default_rng(seed)
    lum = 0.5 + 0.05 * rng.standard_normal((24, 24))
    mean = lum.mean()
    a1 = _img(mean + 1.2 * (lum - mean))
    a2 = _img(mean + 1.2 * k * (lum - mean))
    r1, r2 = blind_contrast(_img(lum), a1), blind_contrast(_img(lum), a2)
    if r1.n_after == r2.n_after and np.array_equal(visible_edges(a1), visible_edges(a2)):
        assert r2.r_bar == pytest.approx(k * r1.r_bar, rel=1e-9)


def test_metrics_independent_of_traversal_order():
    rng = np.random.default_rng(3)
    b = rng.uniform(0.2, 0.8, (20, 20))
    a = np.clip(b + 0.1 * rng.standard_normal(b.shape), 0.01, 1)
    r1 = blind_contrast(_img(b), _img(a))
    r2 = blind_contrast(_img(b.T), _img(a.T))
    assert (r1.n_before, r1.n_after) == (r2.n_before, r2.n_after)
    assert r1.r_bar == pytest.approx(r2.r_bar, rel=1e-12)


def test_report_shape():
    img = ColorImage(np.random.default_rng(4).uniform(size=(8, 8, 3)))
    rep = metrics_report(img, img, None, fallback_rate=0.25)
    assert set(rep) == {"psnr_db", "e", "r_bar", "n_before", "n_after", "fallback_rate"}
    assert rep["psnr_db"] == "n/a" and rep["fallback_rate"] == 0.25
    assert metrics_report(img, img, img.data)["psnr_db"] == "inf"
