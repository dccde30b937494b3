import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdefog.cfa import bilinear_demosaick, mosaic, sublattice
from jointdefog.fog import FogParams, apply_fog
from jointdefog.imaging import PHASES, CfaImage, ColorImage
from jointdefog.metrics import psnr


@pytest.mark.parametrize("phase", PHASES)
def test_mosaic_of_constant_is_constant(phase):
    assert np.all(mosaic(ColorImage(np.full((5, 6, 3), 0.3)), phase).data == 0.3)


def test_mosaic_pure_red():
    red = ColorImage(np.broadcast_to([1.0, 0, 0], (4, 4, 3)).copy())
    g = mosaic(red, "RGGB").data
    expect = np.zeros((4, 4))
    expect[::2, ::2] = 1
    np.testing.assert_array_equal(g, expect)


@given(st.sampled_from(PHASES), st.floats(0.05, 1.0), st.integers(0, 1000))
def test_mosaic_commutes_with_fog(phase, t, seed):
    rng = np.random.default_rng(seed)
    x = ColorImage(rng.uniform(size=(6, 6, 3)))
    p = FogParams(airlight=(0.8, 0.8, 0.8))
    lhs = mosaic(apply_fog(x, np.full((6, 6), t), p), phase).data
    rhs = t * mosaic(x, phase).data + (1 - t) * 0.8
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-15)


def test_sublattice_examples():
    h = CfaImage(np.arange(16.0).reshape(4, 4) / 16, "RGGB")
    np.testing.assert_array_equal(sublattice(h, "R", (0, 0)), h.data[::2, ::2])
    with pytest.raises(ValueError):
        sublattice(h, "R", (0, 1))
    x = ColorImage(np.random.default_rng(0).uniform(size=(7, 5, 3)))
    s = sublattice(mosaic(x, "RGGB"), "R", (0, 0))
    assert s.shape == (4, 3)
    np.testing.assert_array_equal(s, x.data[::2, ::2, 0])
    np.testing.assert_array_equal(sublattice(mosaic(ColorImage(np.full((4, 4, 3), 0.2)), "GRBG"),
                                             "B", (1, 0)), 0.2)


@pytest.mark.parametrize("phase", PHASES)
def test_bilinear_constant_and_passthrough(phase):
    h = CfaImage(np.full((6, 8), 0.4), phase)
    np.testing.assert_allclose(bilinear_demosaick(h).data, 0.4, rtol=0, atol=1e-15)
    x = ColorImage(np.random.default_rng(1).uniform(size=(6, 8, 3)))
    m = mosaic(x, phase)
    np.testing.assert_array_equal(mosaic(bilinear_demosaick(m), phase).data, m.data)


@given(st.sampled_from(PHASES), st.floats(-0.5, 0.5), st.integers(0, 1000))
def test_bilinear_offset_invariance(phase, k, seed):
    data = np.random.default_rng(seed).uniform(size=(7, 9))
    a = bilinear_demosaick(CfaImage(data + k, phase)).data
    b = bilinear_demosaick(CfaImage(data, phase)).data + k
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_bilinear_exact_on_linear_ramp_interior():
    j = np.arange(16.0) / 15
    x = ColorImage(np.broadcast_to(j[None, :, None], (12, 16, 3)).copy())
    out = bilinear_demosaick(mosaic(x, "RGGB")).data
    np.testing.assert_allclose(out[1:-1, 1:-1], x.data[1:-1, 1:-1], rtol=0, atol=1e-14)


def test_bilinear_sanity_on_smooth_scene():
    i, j = np.meshgrid(np.linspace(0, 1, 64), np.linspace(0, 1, 64), indexing="ij")
    x = ColorImage(np.stack([0.5 + 0.3 * np.sin(3 * i), 0.4 + 0.2 * j, 0.3 + 0.2 * i * j], axis=2))
    assert psnr(bilinear_demosaick(mosaic(x, "RGGB")), x) >= 25
