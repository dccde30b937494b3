#!/usr/bin/env python3
"""How the joint-over-separate margin depends on scene depth.

Runs textured-blocks with its sky band kept (the airlight needs an
opaque region) and the ground depth ramp rescaled to run from `--near`
to each far depth in `--far`, at one fog level.  Deeper scenes push more
of the image toward t -> 0, where both arms are limited by noise
amplification and the margin shrinks.
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from jointdefog.cli import cmd_compare
from jointdefog.config import resolve
from jointdefog.imaging import DepthMap, save_image
from jointdefog.scenes import SKY_DEPTH, builtin_scene


def ground_depth(size: int, near: float, far: float) -> DepthMap:
    _, d = builtin_scene("textured-blocks", size)
    d = d.data.copy()
    ground = d < SKY_DEPTH
    lo, hi = d[ground].min(), d[ground].max()
    d[ground] = near + (d[ground] - lo) * (far - near) / (hi - lo)
    return DepthMap(d)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fog", default="thick")
    ap.add_argument("--near", type=float, default=5.0)
    ap.add_argument("--far", default="12,20,40")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    tmp = Path(tempfile.mkdtemp())

    print(f"{'far_m':>6} {'t_min':>6} {'joint':>7} {'separate':>9} {'margin':>7}")
    for far in map(float, args.far.split(",")):
        path = tmp / f"d{far:g}.f32"
        save_image(ground_depth(args.size, args.near, far), path)
        cfg = resolve(flags={"scene.fog.beta": args.fog, "scene.width": args.size,
                             "scene.height": args.size, "scene.depth_layout": "imported",
                             "scene.depth_path": str(path), "threads": args.threads})
        rows = cmd_compare(cfg, seeds=args.seeds)["rows"]
        j, s = (np.mean([r["psnr_db"] for r in rows if r["method"] == m])
                for m in ("joint", "separate"))
        t_min = np.exp(-cfg.scene.fog.beta * far)
        print(f"{far:6.1f} {t_min:6.3f} {j:7.2f} {s:9.2f} {j - s:+7.2f}", flush=True)


if __name__ == "__main__":
    main()
