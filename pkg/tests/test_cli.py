import json

import numpy as np
import pytest

from jointdefog.cli import main, split_overrides
from jointdefog.config import ConfigError, PROFILES, load_file, parse_value, resolve
from jointdefog.imaging import load_image, save_image


def test_profiles():
    sim = resolve("simulation")
    assert sim.solver.b_last == 0.5 and sim.solver.sigma == 0.01 and sim.scene.noise.sigma == 0.01
    assert "white_balance" not in sim.pipeline.stages
    raw = resolve("real-raw")
    assert raw.solver.b_last == 1.0 and raw.pipeline.gamma == 1.25
    assert resolve().profile == "simulation"
    with pytest.raises(ConfigError):
        resolve("night")


def test_precedence_flag_over_file_over_profile(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[solver]\nb_last = 0.7\nkappa = 0.02\n[scene.fog]\nbeta = \"thick\"\n")
    tree = load_file(path)
    cfg = resolve("simulation", tree, {"solver.b_last": 0.9})
    assert cfg.solver.b_last == 0.9  # flag
    assert cfg.solver.kappa == 0.02  # file
    assert cfg.solver.sigma == 0.01  # profile
    assert cfg.scene.fog.beta == 0.078
    assert resolve("simulation", tree).solver.b_last == 0.7


def test_bad_config_keys_and_values(tmp_path):
    with pytest.raises(ConfigError):
        resolve(flags={"solver.nope": 1})
    with pytest.raises(ConfigError):
        resolve(flags={"solver.kappa": -1})
    with pytest.raises(ConfigError):
        resolve(flags={"scene.fog.beta": "foggy"})
    bad = tmp_path / "bad.toml"
    bad.write_text("[solver\n")
    with pytest.raises(ConfigError):
        load_file(bad)


def test_override_parsing():
    rest, flags = split_overrides(["restore", "--solver.b_last", "0.5", "--pipeline.stages=demosaick,defog",
                                   "--in", "h.raw"])
    assert rest == ["restore", "--in", "h.raw"]
    assert flags == {"solver.b_last": 0.5, "pipeline.stages": ["demosaick", "defog"]}
    assert parse_value("true") is True and parse_value("RGGB") == "RGGB"


def test_seed_flows_into_noise():
    assert resolve(flags={"seed": 5}).scene.noise.seed == 5
    assert resolve(flags={"seed": 5, "scene.noise.seed": 2}).scene.noise.seed == 2


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scene"
    assert main(["synth", "--scene", "textured-blocks", "--fog", "thick", "--seed", "7",
                 "--size", "48", "--out", str(out)]) == 0
    return out


def test_synth_writes_bundle(bundle, tmp_path):
    names = sorted(p.name for p in bundle.iterdir())
    assert len([n for n in names if not n.endswith(".meta.json")]) == 6
    assert len([n for n in names if n.endswith(".meta.json")]) == 6
    again = tmp_path / "again"
    main(["synth", "--scene", "textured-blocks", "--fog", "thick", "--seed", "7", "--size", "48",
          "--out", str(again)])
    for p in bundle.iterdir():
        assert (again / p.name).read_bytes() == p.read_bytes()


def test_missing_out_is_usage_error(capsys):
    assert main(["synth", "--scene", "ramp"]) == 2
    assert "usage" in capsys.readouterr().err


def test_restore_joint_and_separate(bundle, tmp_path):
    for mode in ("joint", "separate"):
        out = tmp_path / f"{mode}.png"
        rep_path = tmp_path / f"{mode}.json"
        assert main(["restore", "--mode", mode, "--in", str(bundle / "h.raw"), "--out", str(out),
                     "--report", str(rep_path)]) == 0
        rep = json.loads(rep_path.read_text())
        assert {"fallback_rate", "l_a", "timing", "config"} <= set(rep)
        assert rep["mode"] == mode and not rep["oracle_t"]
        assert load_image(out).data.shape == (48, 48, 3)
        assert (tmp_path / f"{mode}.linear.png").exists()
        assert rep["metrics"]["psnr_db"] != "n/a"


def test_restore_oracle_t_is_noted(bundle, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["restore", "--in", str(bundle / "h.raw"), "--out", str(tmp_path / "o.ppm"),
                 "--report", str(rep), "--oracle-t"]) == 0
    report = json.loads(rep.read_text())
    assert report["oracle_t"] and "oracle" in report["note"]


def test_restore_exit_codes(bundle, tmp_path):
    assert main(["restore", "--in", str(tmp_path / "missing.raw"), "--out", str(tmp_path / "o.png")]) == 3
    assert main(["restore", "--in", str(bundle / "h.raw"), "--out", str(tmp_path / "o.png"),
                 "--solver.kappa", "0"]) == 2
    assert main(["restore", "--in", str(bundle / "x.ppm"), "--out", str(tmp_path / "o.png")]) == 3


def test_degenerate_input_exit_4(bundle, tmp_path):
    # t_tolerance so tight and search so small that no system has 2N candidates
    code = main(["restore", "--in", str(bundle / "h.raw"), "--out", str(tmp_path / "o.png"),
                 "--oracle-t", "--solver.t_tolerance", "1e-9"])
    assert code == 4
    assert json.loads((tmp_path / "o.png.report.json").read_text())["fallback_rate"] > 0.5


def test_compare_tables(bundle, tmp_path, capsys):
    js = tmp_path / "c.json"
    assert main(["compare", "--in", str(bundle / "h.raw"), "--json", str(js)]) == 0
    rows = json.loads(js.read_text())["rows"]
    assert [r["method"] for r in rows] == ["joint", "separate"]
    assert all(isinstance(r["psnr_db"], float) for r in rows)
    text = capsys.readouterr().out
    assert text.splitlines()[0].split()[:6] == ["method", "psnr_db", "e", "r_bar", "fallback_rate", "seconds"]

    # no ground truth next to the input -> PSNR n/a, blind metrics populated
    lone = tmp_path / "lone"
    lone.mkdir()
    h = load_image(bundle / "h.raw")
    save_image(h, lone / "h.raw")
    assert main(["compare", "--in", str(lone / "h.raw"), "--json", str(js)]) == 0
    rows = json.loads(js.read_text())["rows"]
    assert all(r["psnr_db"] == "n/a" and isinstance(r["r_bar"], float) for r in rows)


def test_compare_seeds_adds_mean_rows(tmp_path):
    js = tmp_path / "c.json"
    assert main(["compare", "--seeds", "2", "--size", "32", "--fog", "light", "--json", str(js)]) == 0
    rows = json.loads(js.read_text())["rows"]
    assert len(rows) == 6
    assert rows[-2]["method"] == "joint (mean)"
    assert rows[-2]["psnr_db"] == pytest.approx(np.mean([r["psnr_db"] for r in rows[:4:2]]))


def test_metrics_command(bundle, tmp_path, capsys):
    out = tmp_path / "m.json"
    assert main(["metrics", "--restored", str(bundle / "x.ppm"), "--before", str(bundle / "h.raw"),
                 "--reference", str(bundle / "x.ppm"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["psnr_db"] == "inf"


def test_global_flags_before_subcommand(tmp_path):
    out = tmp_path / "s"
    assert main(["--seed", "3", "synth", "--size", "16", "--out", str(out)]) == 0
    assert load_image(out / "h.raw").meta["seed"] == 3
