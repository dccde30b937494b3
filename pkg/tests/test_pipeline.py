import numpy as np
import pytest

from jointdefog.cfa import bilinear_demosaick, mosaic
from jointdefog.fog import FogParams, NoiseParams
from jointdefog.imaging import CfaImage, ColorImage
from jointdefog.pipeline import (PipelineConfig, gamma_decode, gamma_encode,
                                 gray_world_white_balance, joint_pipeline, separate_pipeline)
from jointdefog.scenes import FOG_LEVELS, SceneSpec, builtin_scene, synthesize
from jointdefog.tls import SolverConfig
from scipy import ndimage


def test_white_balance_examples(rng):
    flat = CfaImage(np.full((8, 8), 0.3), "RGGB")
    assert gray_world_white_balance(flat)[1] == (1.0, 1.0, 1.0)
    data = rng.uniform(0.2, 0.6, (8, 8))
    scaled = data.copy()
    scaled[::2, ::2] *= 2
    gains = gray_world_white_balance(CfaImage(scaled, "RGGB"))[1]
    ref = gray_world_white_balance(CfaImage(data, "RGGB"))[1]
    assert gains[0] == pytest.approx(ref[0] / 2, abs=1e-12)
    x = ColorImage(rng.uniform(size=(16, 16, 3)) * [1.0, 0.5, 0.8])
    out, _ = gray_world_white_balance(mosaic(x, "GBRG"))
    means = [out.data[m].mean() for m in
             __import__("jointdefog.imaging", fromlist=["color_masks"]).color_masks("GBRG", 16, 16)]
    assert max(means) - min(means) <= 1e-9


def test_white_balance_zero_class_gets_unit_gain():
    data = np.full((4, 4), 0.5)
    data[::2, ::2] = 0  # red class all zero
    assert gray_world_white_balance(CfaImage(data, "RGGB"))[1][0] == 1.0


def test_gamma_examples(rng):
    img = ColorImage(rng.uniform(size=(4, 4, 3)))
    np.testing.assert_array_equal(gamma_encode(img, 1.0).data, img.data)
    ends = ColorImage(np.array([[[0.0, 1.0, 0.0]]]))
    np.testing.assert_array_equal(gamma_encode(ends, 1.25).data, ends.data)
    assert gamma_encode(ColorImage(np.full((1, 1, 3), 0.5)), 1.25).data[0, 0, 0] == pytest.approx(0.57435, abs=1e-5)
    np.testing.assert_allclose(gamma_decode(gamma_encode(img, 1.25), 1.25).data, img.data, atol=1e-12)


def test_config_validation():
    for bad in (dict(gamma=0), dict(stages=("defog", "defog")), dict(stages=("blur",)),
                dict(stages=("defog", "demosaick"))):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)


def test_fog_free_input_passes_through_bilinear():
    x, _ = builtin_scene("textured-blocks", 64, sky=False)
    h = mosaic(x, "RGGB")
    res = separate_pipeline(h, PipelineConfig(stages=("demosaick", "defog")))
    assert res.t_map.data.min() >= 0.999
    np.testing.assert_allclose(res.output.data, bilinear_demosaick(h).data, atol=1e-12)


def test_pure_airlight_is_a_fixed_point():
    h = CfaImage(np.full((48, 48), 0.8), "RGGB")
    for run in (separate_pipeline, joint_pipeline):
        res = run(h, PipelineConfig(stages=("demosaick", "defog")))
        np.testing.assert_allclose(res.output.data, 0.8, atol=1e-9)


def test_stage_order_and_intermediates():
    b = synthesize(SceneSpec(width=48, height=48, fog=FogParams(beta=0.02)))
    cfg = PipelineConfig(gamma=1.25, stages=("white_balance", "demosaick", "defog", "gamma"))
    res = separate_pipeline(b.h, cfg)
    assert set(res.intermediates) == {"white_balance", "demosaick", "defog", "gamma"}
    np.testing.assert_allclose(res.output.data, gamma_encode(res.linear, 1.25).data)
    plain = separate_pipeline(b.h, PipelineConfig(stages=("demosaick",)))
    np.testing.assert_array_equal(plain.output.data, bilinear_demosaick(b.h).data)


def test_separate_arm_has_more_edge_residual_than_joint():
    spec = SceneSpec(fog=FogParams(beta=FOG_LEVELS["moderate"]), noise=NoiseParams(sigma=0.01, seed=3))
    b = synthesize(spec)
    cfg = PipelineConfig(stages=("demosaick", "defog"))
    sep = separate_pipeline(b.h, cfg, t_map=b.t)
    joint = joint_pipeline(b.h, cfg, solver=SolverConfig(b_last=0.5), t_map=b.t, threads=4)
    lum = b.x.data.mean(axis=2)
    edges = ndimage.binary_dilation(np.hypot(*np.gradient(lum)) > 0.05, iterations=2)

    def hf_energy(img):
        r = (img.data - b.x.data).mean(axis=2)
        hp = r - ndimage.uniform_filter(r, 3, mode="reflect")
        return float((hp[edges] ** 2).mean())

    assert hf_energy(sep.linear) > hf_energy(joint.linear)
