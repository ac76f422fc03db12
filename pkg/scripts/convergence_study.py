"""Reconstruction error as every resolution doubles (grid step, n_beta, n_theta, N).

    python scripts/convergence_study.py --m 1 --levels 65 129 257 [--attenuated]
"""
import argparse
import time
import warnings

from momtomo.config import RunConfig
from momtomo.errors import AccuracyWarning
from momtomo.forward import momenta_sinogram
from momtomo.geometry import DiscGrid, make_attenuation, make_phantom_tensor
from momtomo.reconstruction import reconstruct


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--levels", type=int, nargs="+", default=[65, 129, 257], help="grid sizes 2^k + 1")
    p.add_argument("--attenuated", action="store_true")
    p.add_argument("--error-radius", type=float, default=0.85)
    args = p.parse_args()

    print(f"{'grid':>5} {'n_beta':>6} {'N':>4} {'rel_error':>10} {'parity':>9} {'seconds':>8}")
    prev = None
    for n in args.levels:
        cfg = RunConfig(m=args.m, grid_n=n, n_beta=2 * (n - 1), n_theta=2 * (n - 1), N=(n - 1) // 2,
                        error_radius=args.error_radius).validate()
        grid = DiscGrid(n)
        f = make_phantom_tensor(args.m, "polynomial", {"center": (0.1, -0.05), "radius": 0.6,
                                                        "amplitudes": [1.0, -0.5, 0.7, 0.3, -0.2][: args.m + 1]}, grid)
        a = make_attenuation("gaussian", {"center": (-0.1, 0.1), "radius": 0.7}, grid, 0.5) if args.attenuated else None
        t = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            rep = reconstruct(momenta_sinogram(f, a, cfg.n_beta, cfg.n_theta), a, cfg, truth=f)
        dt = time.perf_counter() - t
        rate = "" if prev is None else f"  ratio {prev / rep.relative_error:.2f}"
        print(f"{n:>5} {cfg.n_beta:>6} {cfg.N:>4} {rep.relative_error:>10.3e} {rep.parity_residual:>9.2e} {dt:>8.1f}{rate}")
        prev = rep.relative_error


if __name__ == "__main__":
    main()
