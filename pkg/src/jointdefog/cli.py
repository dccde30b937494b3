"""Command-line entry point: synth, restore, compare, metrics.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 degenerate input
(joint solver fell back on more than half of the pixels).

Any config leaf can be overridden with a dotted flag, e.g.

    jointdefog restore --mode joint --in scene/h.raw --out x.png --solver.b_last 1.0
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .cfa import bilinear_demosaick
from .config import (ConfigError, RunConfig, load_file, parse_value, resolve, solver_for_input,
                     with_seed)
from .imaging import CfaImage, ColorImage, ImageFormatError, load_image, save_image
from .metrics import metrics_report
from .pipeline import PipelineResult, joint_pipeline, separate_pipeline
from .scenes import BUILTIN_SCENES, FOG_LEVELS, SceneBundle, synthesize

log = logging.getLogger("jointdefog")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DEGENERATE = 0, 2, 3, 4
DEGENERATE_FALLBACK = 0.5
TABLE_COLUMNS = ("method", "psnr_db", "e", "r_bar", "fallback_rate", "seconds")


class DegenerateInput(RuntimeError):
    pass


# -- argument handling -----------------------------------------------------------

def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; their defaults must not clobber
    # values given before the subcommand name
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global")
    g.add_argument("--config", help="TOML config file", **kw)
    g.add_argument("--seed", type=int, help="noise seed (first seed for compare)", **kw)
    g.add_argument("--threads", type=int, help="worker threads for the joint solver", **kw)
    g.add_argument("--profile", choices=("simulation", "real-raw"), **kw)
    g.add_argument("-v", "--verbose", action="store_true", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(
        prog="jointdefog", parents=[_global_flags(suppress=False)],
        description="Joint defogging and demosaicking of raw Bayer data.",
        epilog="Dotted flags such as --solver.b_last 0.5 override config leaves.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesize a foggy noisy mosaic")
    p.add_argument("--scene", choices=BUILTIN_SCENES, help="built-in scene layout")
    p.add_argument("--fog", help=f"fog level {sorted(FOG_LEVELS)} or beta in 1/m")
    p.add_argument("--size", type=int, help="square scene size in pixels")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("restore", parents=[common], help="restore a foggy mosaic")
    p.add_argument("--mode", choices=("joint", "separate"), default="joint")
    p.add_argument("--in", dest="input", required=True, help="CFA input (.raw/.pgm + sidecar)")
    p.add_argument("--out", required=True, help="restored image (.png or .ppm)")
    p.add_argument("--report", help="report JSON (default: <out>.report.json)")
    p.add_argument("--oracle-t", action="store_true",
                   help="use the true transmission t.f32 next to a synthetic input")

    p = sub.add_parser("compare", parents=[common], help="joint vs separate table")
    p.add_argument("--in", dest="input", help="CFA input; default synthesizes from config")
    p.add_argument("--reference", help="ground-truth image (default: x.ppm next to --in)")
    p.add_argument("--seeds", type=int, default=1, help="number of synthetic seeds")
    p.add_argument("--scene", choices=BUILTIN_SCENES)
    p.add_argument("--fog", help=f"fog level {sorted(FOG_LEVELS)} or beta in 1/m")
    p.add_argument("--size", type=int)
    p.add_argument("--oracle-t", action="store_true")
    p.add_argument("--json", help="write the JSON table here")

    p = sub.add_parser("metrics", parents=[common], help="PSNR and blind contrast of an image")
    p.add_argument("--restored", required=True)
    p.add_argument("--before", required=True, help="foggy image (color, or CFA mosaic)")
    p.add_argument("--reference", help="ground truth for PSNR")
    p.add_argument("--out", help="write the JSON report here")
    return parser


def split_overrides(argv: list[str]) -> tuple[list[str], dict]:
    """Pull --section.key VALUE (or =VALUE) pairs out of argv."""
    rest, flags = [], {}
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg.startswith("--") and "." in arg.split("=", 1)[0]:
            key, eq, value = arg[2:].partition("=")
            if not eq:
                if i + 1 >= len(argv):
                    raise ConfigError(f"flag --{key} needs a value")
                i += 1
                value = argv[i]
            flags[key] = parse_value(value)
        else:
            rest.append(arg)
        i += 1
    return rest, flags


def resolve_config(args: argparse.Namespace, flags: dict) -> RunConfig:
    flags = dict(flags)
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.threads is not None:
        flags["threads"] = args.threads
    if getattr(args, "scene", None):
        flags["scene.layout"] = args.scene
    if getattr(args, "fog", None):
        flags["scene.fog.beta"] = parse_value(args.fog)
    if getattr(args, "size", None):
        flags["scene.width"] = flags["scene.height"] = args.size
    file_tree = load_file(args.config) if args.config else None
    return resolve(args.profile, file_tree, flags)


# -- shared helpers ----------------------------------------------------------------

def _write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _json_number(v):
    if v is None:
        return "n/a"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def run_arm(h: CfaImage, mode: str, cfg: RunConfig, t_map=None) -> tuple[PipelineResult, float]:
    t0 = time.perf_counter()
    if mode == "joint":
        solver = solver_for_input(cfg, h.meta)
        res = joint_pipeline(h, cfg.pipeline, cfg.dcp, solver, t_map=t_map, threads=cfg.threads)
    else:
        res = separate_pipeline(h, cfg.pipeline, cfg.dcp, t_map=t_map)
    return res, time.perf_counter() - t0


def _oracle_t(input_path: Path):
    path = input_path.with_name("t.f32")
    if not path.exists():
        raise FileNotFoundError(f"--oracle-t needs {path}")
    return load_image(path, "transmission")


def _reference_for(input_path: Path, explicit: str | None) -> ColorImage | None:
    if explicit:
        return load_image(explicit, "color")
    path = input_path.with_name("x.ppm")
    return load_image(path, "color") if path.exists() else None


def _row(method: str, res: PipelineResult, seconds: float, before: ColorImage,
         reference, cfg: RunConfig, seed=None) -> dict:
    m = metrics_report(res.linear, before, None if reference is None else reference.data,
                       cfg.metrics.threshold, res.fallback_rate)
    row = {"method": method, "psnr_db": m["psnr_db"], "e": m["e"], "r_bar": m["r_bar"],
           "fallback_rate": m["fallback_rate"], "seconds": seconds}
    if seed is not None:
        row["seed"] = seed
    return row


def format_table(rows: list[dict]) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    cols = list(TABLE_COLUMNS) + (["seed"] if any("seed" in r for r in rows) else [])
    body = [[cell(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def mean_rows(rows: list[dict]) -> list[dict]:
    out = []
    for method in dict.fromkeys(r["method"] for r in rows):
        sel = [r for r in rows if r["method"] == method]
        row = {"method": f"{method} (mean)"}
        for c in TABLE_COLUMNS[1:]:
            vals = [r[c] for r in sel]
            if all(isinstance(v, (int, float)) for v in vals):
                row[c] = float(np.mean(vals))
            else:
                row[c] = "n/a"
        row["seed"] = "all"
        out.append(row)
    return out


# -- commands ------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: str) -> dict:
    bundle = synthesize(cfg.scene)
    paths = bundle.save(out)
    return {name: str(p) for name, p in paths.items()}


def cmd_restore(cfg: RunConfig, mode: str, input_path: str, out: str,
                report_path: str | None = None, oracle_t: bool = False) -> dict:
    """Restore one mosaic; writes the image, its pre-gamma linear version and a report."""
    src = Path(input_path)
    h = load_image(src, "cfa")
    t_map = _oracle_t(src) if oracle_t else None
    res, seconds = run_arm(h, mode, cfg, t_map)

    out = Path(out)
    linear_path = out.with_name(f"{out.stem}.linear{out.suffix}")
    report_path = Path(report_path) if report_path else out.with_name(out.name + ".report.json")
    meta = {"mode": mode, "profile": cfg.profile, "oracle_t": oracle_t}
    save_image(res.output, out, meta)
    save_image(res.linear, linear_path, {**meta, "stage": "linear"})

    reference = _reference_for(src, None)
    before = bilinear_demosaick(h)
    metrics = metrics_report(res.linear, before, None if reference is None else reference.data,
                             cfg.metrics.threshold, res.fallback_rate)
    air = res.airlight
    report = {
        "mode": mode,
        "input": str(src),
        "output": str(out),
        "linear": str(linear_path),
        "fallback_rate": res.fallback_rate,
        "l_a": {"scalar": air.scalar, "rgb": list(air.rgb), "spread": air.spread},
        "gains": list(res.gains),
        "timing": {"seconds": seconds},
        "oracle_t": oracle_t,
        "metrics": {k: _json_number(v) for k, v in metrics.items()},
        "config": cfg.to_dict(),
    }
    if oracle_t:
        report["note"] = "oracle transmission from t.f32 in use; no transmission estimation error"
    if res.joint is not None:
        report["solver_counts"] = res.joint.counts
    _write_json(report_path, report)
    if res.fallback_rate > DEGENERATE_FALLBACK:
        raise DegenerateInput(f"solver fell back on {100 * res.fallback_rate:.0f}% of pixels")
    return report


def cmd_compare(cfg: RunConfig, seeds: int = 1, input_path: str | None = None,
                reference: str | None = None, oracle_t: bool = False) -> dict:
    """Joint and separate rows per input, plus mean rows over several seeds."""
    rows = []
    if input_path:
        src = Path(input_path)
        jobs = [(None, load_image(src, "cfa"), _reference_for(src, reference),
                 _oracle_t(src) if oracle_t else None)]
    else:
        if seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        jobs = []
        for seed in range(cfg.seed, cfg.seed + seeds):
            b: SceneBundle = synthesize(with_seed(cfg, seed).scene)
            jobs.append((seed, b.h, b.x, b.t if oracle_t else None))
    for seed, h, ref, t_map in jobs:
        before = bilinear_demosaick(h)
        for mode in ("joint", "separate"):
            res, seconds = run_arm(h, mode, cfg, t_map)
            rows.append(_row(mode, res, seconds, before, ref, cfg, seed))
    if len(jobs) > 1:
        rows += mean_rows(rows)
    rows = [{k: _json_number(v) for k, v in r.items()} for r in rows]
    return {"rows": rows, "oracle_t": oracle_t, "config": cfg.to_dict()}


def cmd_metrics(cfg: RunConfig, restored: str, before: str, reference: str | None = None) -> dict:
    img = load_image(restored, "color")
    b = load_image(before)
    if isinstance(b, CfaImage):
        b = bilinear_demosaick(b)
    ref = load_image(reference, "color").data if reference else None
    rep = metrics_report(img, b, ref, cfg.metrics.threshold)
    return {k: _json_number(v) for k, v in rep.items()}


# -- entry point ------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        rest, flags = split_overrides(argv)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"jointdefog: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = resolve_config(args, flags)
        if args.command == "synth":
            paths = cmd_synth(cfg, args.out)
            for name, p in paths.items():
                print(f"{name}: {p}")
        elif args.command == "restore":
            report = cmd_restore(cfg, args.mode, args.input, args.out, args.report, args.oracle_t)
            print(f"{args.mode}: fallback {report['fallback_rate']:.3f}, "
                  f"l_a {report['l_a']['scalar']:.4f}, {report['timing']['seconds']:.1f}s")
        elif args.command == "compare":
            table = cmd_compare(cfg, args.seeds, args.input, args.reference, args.oracle_t)
            if args.json:
                _write_json(args.json, table)
            print(format_table(table["rows"]))
        else:
            rep = cmd_metrics(cfg, args.restored, args.before, args.reference)
            if args.out:
                _write_json(args.out, rep)
            print(json.dumps(rep, indent=2, sort_keys=True))
    except DegenerateInput as exc:
        print(f"jointdefog: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ImageFormatError, OSError) as exc:
        print(f"jointdefog: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"jointdefog: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
