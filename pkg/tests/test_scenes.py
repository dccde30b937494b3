import numpy as np
import pytest

from jointdefog.cfa import mosaic
from jointdefog.fog import FogParams, NoiseParams, add_sensor_noise, transmission_from_depth
from jointdefog.imaging import load_image
from jointdefog.scenes import (FOG_LEVELS, STEP_DEPTHS, SceneSpec, builtin_scene, synthesize)
from jointdefog.transmission import dark_channel_rgb


def test_fog_levels():
    assert FOG_LEVELS == {"light": 0.004, "moderate": 0.02, "thick": 0.078}
    assert SceneSpec().noise.sigma == 0.01


def test_zero_depth_scene_is_noise_only():
    spec = SceneSpec(width=16, height=16, depth_layout="linear", depth_range=(1.0, 5.0),
                     fog=FogParams(beta=0.0), noise=NoiseParams(seed=2))
    b = synthesize(spec)
    assert np.all(b.t.data == 1)
    np.testing.assert_array_equal(b.h.data, mosaic(add_sensor_noise(b.x, spec.noise), "RGGB").data)


@pytest.mark.parametrize("window", [3, 5, 25])
def test_textured_blocks_satisfy_dark_channel_prior(window):
    x, d = builtin_scene("textured-blocks", 128)
    sky = d.data >= 1000
    dc = dark_channel_rgb(x, window)
    rows = np.where(~sky.any(axis=1))[0]
    inner = rows[rows >= rows[0] + window // 2]
    assert np.all(dc[inner] == 0)
    x2, d2 = builtin_scene("textured-blocks", 128, sky=False)
    assert np.all(dark_channel_rgb(x2, window) == 0) and d2.data.max() < 1000


def test_steps_have_three_depth_bands():
    _, d = builtin_scene("steps", 60)
    assert sorted(np.unique(d.data)) == sorted(STEP_DEPTHS)
    t = transmission_from_depth(d, 0.004).data
    assert len(np.unique(t)) == 3


def test_ramp_matches_formula():
    x, _ = builtin_scene("ramp", (20, 30))
    i, j = np.meshgrid(np.arange(20), np.arange(30), indexing="ij")
    r, g = j / 29, i / 19
    np.testing.assert_array_equal(x.data, np.stack([r, g, 0.5 * (r + g)], axis=2))


def test_unknown_names_rejected():
    with pytest.raises(ValueError):
        builtin_scene("checker", 8)
    with pytest.raises(ValueError):
        SceneSpec(layout="checker")
    with pytest.raises(ValueError):
        SceneSpec(depth_range=(5.0, 1.0))
    with pytest.raises(ValueError):
        SceneSpec(layout="imported")


def test_synthesis_chain_and_determinism():
    spec = SceneSpec(width=32, height=24, fog=FogParams(beta=0.02), noise=NoiseParams(seed=9))
    a, b = synthesize(spec), synthesize(spec)
    assert np.array_equal(a.h.data, b.h.data)
    np.testing.assert_array_equal(a.t.data, transmission_from_depth(a.d, 0.02).data)
    np.testing.assert_array_equal(a.h.data, mosaic(a.s, "RGGB").data)


def test_bundle_files_and_replay(tmp_path):
    spec = SceneSpec(width=32, height=32, fog=FogParams(beta=0.078), noise=NoiseParams(seed=7))
    paths = synthesize(spec).save(tmp_path / "a")
    assert {p.name for p in paths.values()} == {"x.ppm", "d.f32", "t.f32", "y.ppm", "s.ppm", "h.raw"}
    h = load_image(paths["h"])
    assert h.meta["beta"] == 0.078 and h.meta["seed"] == 7
    replay = SceneSpec.from_dict(h.meta["scene"])
    assert replay == spec
    synthesize(replay).save(tmp_path / "b")
    for name in paths.values():
        assert (tmp_path / "a" / name.name).read_bytes() == (tmp_path / "b" / name.name).read_bytes()


def test_imported_layout(tmp_path):
    from jointdefog.imaging import ColorImage, DepthMap, save_image
    rng = np.random.default_rng(0)
    save_image(ColorImage(rng.uniform(size=(10, 12, 3))), tmp_path / "x.ppm")
    save_image(DepthMap(rng.uniform(1, 50, (10, 12))), tmp_path / "d.f32")
    spec = SceneSpec(layout="imported", x_path=str(tmp_path / "x.ppm"), depth_layout="imported",
                     depth_path=str(tmp_path / "d.f32"))
    b = synthesize(spec)
    assert b.h.data.shape == (10, 12)
