"""Operator identity suite behind ``momtomo verify``.

Each check returns a row {name, value, limit, passed}. The checks use exact
identities, so they fail loudly on sign or index slips in the kernels.
"""
from __future__ import annotations

import numpy as np

from .analytic import apply_eG, bukhgeim_cauchy, integrating_factor, pompeiu_values
from .config import RunConfig
from .forward import FluxTrace, sinogram_from_traces, traces_from_sinogram
from .geometry import BoundaryGrid, DiscGrid, make_attenuation
from .sequences import beltrami

SEED = 20240607


def _row(name, value, limit):
    return {"name": name, "value": float(value), "limit": float(limit), "passed": bool(value <= limit)}


def check_pompeiu_zbar(n: int = 129, radius: float = 0.8, limit: float = 5e-3) -> dict:
    """Base lattice rule for T applied to <1, 0, ...>: (Tw)_0 = conj(z)."""
    g = DiscGrid(n)
    w = np.zeros((3, n, n), dtype=complex)
    w[0] = g.mask
    T = pompeiu_values(w, g, corrected=False)
    err = np.abs(T[0] - np.conj(g.z))[g.region(radius)].max()
    return _row("pompeiu_zbar", err, limit)


def smooth_test_sequence(grid: DiscGrid, N: int, rng) -> np.ndarray:
    """Random smooth compactly supported sequence (polynomial times a C^3 bump)."""
    w = np.zeros((N + 1, grid.n, grid.n), dtype=complex)
    for k in range(N + 1):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        cx, cy = rng.uniform(-0.3, 0.3, 2)
        rho2 = ((grid.x - cx) ** 2 + (grid.y - cy) ** 2) / 0.25
        w[k] = np.clip(1 - rho2, 0, None) ** 4 * (c[0] + c[1] * grid.x + c[2] * grid.y**2)
    return w


def right_inverse_residual(w: np.ndarray, grid: DiscGrid, radius: float = 0.9) -> float:
    """max |(dbar + L^2 d) T w - w| over eroded interior nodes within ``radius``."""
    D, _, valid = beltrami(pompeiu_values(w, grid), grid.mask, grid.spacing)
    region = grid.region(radius) & valid
    return float(np.abs(D - w[: D.shape[0]])[:, region].max())


def check_right_inverse(n: int = 129, limit: float = 2e-2) -> dict:
    g = DiscGrid(n)
    w = smooth_test_sequence(g, 6, np.random.default_rng(SEED))
    return _row("pompeiu_right_inverse", right_inverse_residual(w, g), limit)


def check_cauchy(n_beta: int = 512, radius: float = 0.8, limit: float = 1e-6) -> dict:
    """B reproduces the L^2-analytic sequence <z, 0, ...> from its boundary trace."""
    bg = BoundaryGrid(n_beta)
    N = 4
    G = np.zeros((N + 1, n_beta), dtype=complex)
    G[0] = bg.zeta
    rng = np.random.default_rng(SEED)
    r = radius * np.sqrt(rng.uniform(size=400))
    pts = r * np.exp(2j * np.pi * rng.uniform(size=400))
    val = bukhgeim_cauchy(G, pts)
    err = max(np.abs(val[0] - pts).max(), np.abs(val[1:]).max())
    return _row("cauchy_reproduction", err, limit)


def check_eG(N: int = 16, n_theta: int = 128, limit: float = 1e-8) -> dict:
    """e^{G} e^{-G} = Id on random sequences for a Gaussian attenuation."""
    g = DiscGrid(65)
    a = make_attenuation("gaussian", {"center": (-0.1, 0.1), "radius": 0.7}, g, 0.5)
    rng = np.random.default_rng(SEED)
    r = 0.9 * np.sqrt(rng.uniform(size=64))
    pts = r * np.exp(2j * np.pi * rng.uniform(size=64))
    fac = integrating_factor(a, N, n_theta, pts)
    u = rng.normal(size=(N + 1, pts.size)) + 1j * rng.normal(size=(N + 1, pts.size))
    back = apply_eG(+1, fac, apply_eG(-1, fac, u))
    return _row("eG_inverse", np.abs(back - u).max() / np.abs(u).max(), limit)


def check_triangular(m: int = 4, limit: float = 1e-13) -> dict:
    """traces_from_sinogram(sinogram_from_traces(g)) = g on outgoing lines."""
    rng = np.random.default_rng(SEED)
    nb, nt = 64, 64
    from .forward import exit_cosine, TANGENT_TOL

    out = exit_cosine(nb, nt) > TANGENT_TOL
    g = rng.normal(size=(m + 1, nb, nt)) * out
    back = traces_from_sinogram(sinogram_from_traces(FluxTrace(m, g))).g
    return _row("triangular_round_trip", np.abs(back - g).max() / np.abs(g).max(), limit)


def run_suite(cfg: RunConfig = None) -> list:
    cfg = cfg or RunConfig()
    return [
        check_pompeiu_zbar(),
        check_right_inverse(),
        check_cauchy(),
        check_eG(),
        check_triangular(max(cfg.m, 4)),
    ]
