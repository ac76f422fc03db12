"""Stability ratio ||f||^2 / (trace norms) over a phantom family at fixed discretization.

    python scripts/stability_sweep.py --m 1 --grid-n 129 [--radii 0.3 0.5 0.8]
"""
import argparse

import numpy as np

from momtomo.forward import momenta_sinogram
from momtomo.geometry import DiscGrid, make_phantom_tensor
from momtomo.reconstruction import preprocess, stability_ratio

CENTERS = [(0.0, 0.0), (0.3, 0.0), (-0.2, 0.25), (0.1, -0.35), (-0.3, -0.2)]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--grid-n", type=int, default=129)
    p.add_argument("--n-sino", type=int, default=256)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--radii", type=float, nargs="+", default=[0.5])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    grid = DiscGrid(args.grid_n)
    rng = np.random.default_rng(args.seed)
    for radius in args.radii:
        ratios = []
        for c in CENTERS:
            if np.hypot(*c) + radius > 0.95:
                continue
            amps = list(rng.uniform(-1, 1, args.m + 1))
            f = make_phantom_tensor(args.m, "polynomial", {"center": c, "radius": radius, "amplitudes": amps}, grid)
            raw, _ = preprocess(momenta_sinogram(f, None, args.n_sino, args.n_sino), None, args.N)
            ratios.append(stability_ratio(f, raw))
        if ratios:
            print(f"radius {radius:.2f}: " + " ".join(f"{r:.3e}" for r in ratios)
                  + f"  spread {max(ratios) / min(ratios):.2f}")


if __name__ == "__main__":
    main()
