#!/usr/bin/env python3
"""Monte Carlo check of noise amplification by direct defogging.

For each t, a constant patch is fogged, corrupted with Poisson-Gaussian
noise and defogged with the true t; the sample variance is compared
with var(s) / max(t, eps)^2.
"""

import argparse

import numpy as np

from jointdefog.fog import (FogParams, NoiseParams, add_sensor_noise, amplified_noise_variance,
                            defog, predicted_noise_variance)
from jointdefog.imaging import ColorImage


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", default="0.005,0.01,0.05,0.1,0.3,0.6,1.0")
    ap.add_argument("--x", type=float, default=0.4, help="fog-free radiance")
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    fog, noise = FogParams(), NoiseParams(sigma=args.sigma, seed=args.seed)
    rows = max(args.samples // 250, 1)
    print(f"{'t':>7} {'measured':>12} {'predicted':>12} {'ratio':>7}")
    for t in map(float, args.t.split(",")):
        y = ColorImage(np.full((rows, 250, 3), t * args.x + (1 - t) * fog.la[0]))
        s = add_sensor_noise(y, noise)
        xhat = defog(s, np.full((rows, 250), t), fog).data[..., 0]
        want = float(amplified_noise_variance(
            t, predicted_noise_variance(t, args.x, fog, noise), fog.epsilon)[0])
        print(f"{t:7.3f} {xhat.var():12.4e} {want:12.4e} {xhat.var() / want:7.3f}")


if __name__ == "__main__":
    main()
