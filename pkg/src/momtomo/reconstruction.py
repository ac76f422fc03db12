"""Inversion of the momenta ray transform: sweep down, sweep up, source recovery."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .analytic import (IntegratingFactor, boundary_factor, cauchy_values, convolve_modes,
                       integrating_factor, pompeiu_values)
from .config import RunConfig
from .errors import AccuracyWarning, ConfigurationError, DataError
from .forward import MomentaSinogram, traces_from_sinogram
from .geometry import AttenuationMap, DiscGrid, SymmetricTensorField
from .sequences import BoundaryTrace, ModeSequenceField, angular_modes, beltrami, weighted_norm_sq, wirtinger
from .tensor_algebra import modes_from_nonnegative, modes_to_components_array

log = logging.getLogger(__name__)


@dataclass
class SweepState:
    """``shifted[k]`` holds L^{m-k} v^k after the sweep down (truncation N-(m-k))."""

    m: int
    level: int
    shifted: list
    log: list = field(default_factory=list)


@dataclass
class ReconstructionReport:
    tensor: SymmetricTensorField
    source_modes: np.ndarray  # f_0..f_m on the grid
    relative_error: Optional[float] = None
    level_norms: list = field(default_factory=list)
    stability_ratio: Optional[float] = None
    parity_residual: float = 0.0
    negative_mode_residual: float = 0.0
    timings: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "m": self.tensor.m,
            "grid_n": self.tensor.grid.n,
            "relative_error": self.relative_error,
            "stability_ratio": self.stability_ratio,
            "parity_residual": self.parity_residual,
            "negative_mode_residual": self.negative_mode_residual,
            "level_norms": self.level_norms,
            "timings": self.timings,
        }


# ---------------------------------------------------------------------------
# stages


def preprocess(data: MomentaSinogram, a: Optional[AttenuationMap], N: int, *, bfac: IntegratingFactor = None,
               n_lines: int = 257, neg_tol: float = 1e-4):
    """Traces g^k and their modes; with attenuation the boundary values become alpha * g^k.

    Returns (raw trace modes, modes fed to the sweep).
    """
    if data.data.shape[0] != data.m + 1:
        raise DataError("sinogram must carry all m+1 moment slices")
    raw = angular_modes(traces_from_sinogram(data), N)
    if a is None or a.is_zero:
        return raw, raw
    if bfac is None:
        bfac = boundary_factor(a, N, data.n_theta, data.n_beta, n_lines=n_lines, neg_tol=neg_tol)
    vals = np.stack([convolve_modes(bfac.alpha, raw.values[k]) for k in range(raw.m + 1)])
    return raw, BoundaryTrace(raw.m, vals, raw.grid)


def sweep_down(g: BoundaryTrace, grid: DiscGrid, m: int = None) -> SweepState:
    """L^{m-k} v^k = B L^{m-k} g^k + T L^{m-k+1} v^{k-1}, k = 0..m (tail beyond N treated as zero)."""
    m = g.m if m is None else m
    N = g.N
    if N < 2 * (m + 1):
        raise ConfigurationError(f"truncation N={N} too small for m={m}")
    # all boundary solves at once: L^{m-k} g^k padded to N+1 modes
    G = np.zeros((m + 1, N + 1, g.grid.n_beta), dtype=complex)
    for k in range(m + 1):
        G[k, : N + 1 - (m - k)] = g.values[k, m - k:]
    mask = grid.mask
    Bv = np.zeros((m + 1, N + 1, grid.n, grid.n), dtype=complex)
    Bv[..., mask] = cauchy_values(G, grid.z[mask])
    shifted, notes = [], []
    for k in range(m + 1):
        n_k = N + 1 - (m - k)
        v = Bv[k, :n_k].copy()
        if k > 0:
            prev = shifted[k - 1].values  # L^{m-k+1} v^{k-1}, n_k - 1 modes
            v[: n_k - 1] += pompeiu_values(prev, grid)
            notes.append(f"level {k}: B L^{m - k} g^{k} + T(level {k - 1})")
        else:
            notes.append(f"level 0: B L^{m} g^0")
        v[..., ~mask] = 0.0
        shifted.append(ModeSequenceField(v, grid))
    return SweepState(m, m, shifted, notes)


def _zero_mode_attenuated(v: np.ndarray, Lv_prev: np.ndarray, fac: IntegratingFactor, valid, h):
    """v^{k-1}_0 from u^{k-1}_0 = 2 Re d u^k_{-1} + a u^k_0, u = beta * v."""
    u01 = convolve_modes(fac.beta, v)[:2]
    d_u1, _ = wirtinger(u01[1], valid, h)
    u_prev0 = 2.0 * d_u1.real + fac.a_values * u01[0]
    # u^{k-1}_{-j} = (beta * L v^{k-1})_{j-1} for j >= 1
    u_prev_tail = convolve_modes(fac.beta, Lv_prev)
    n = Lv_prev.shape[0]
    return fac.alpha[0] * u_prev0 + np.einsum("j...,j...->...", fac.alpha[1: n + 1], u_prev_tail[: n])


def sweep_up(state: SweepState, grid: DiscGrid, fac: IntegratingFactor = None):
    """v^{k-1} from v^k via L v^{k-1} = dbar v^k + L^2 d v^k, k = m..1.

    Returns (v^0, validity mask of the eroded stencil region).
    """
    m = state.m
    v = state.shifted[m].values
    if v.shape[0] < m + 3:
        raise ConfigurationError("not enough spare modes for the sweep up")
    valid = grid.mask
    h = grid.spacing
    attenuated = fac is not None and not fac.is_identity
    for k in range(m, 0, -1):
        Lv, d, new_valid = beltrami(v, valid, h)
        if attenuated:
            v0 = _zero_mode_attenuated(v, Lv, fac, valid, h)
        else:
            v0 = 2.0 * d[1].real
        v = np.concatenate([v0[None], Lv])
        v[..., ~grid.mask] = 0.0
        valid = new_valid
        state.log.append(f"sweep up: v^{k - 1} from v^{k}")
    state.level = 0
    return ModeSequenceField(v, grid), valid


def recover_source(v0: ModeSequenceField, m: int, fac: IntegratingFactor = None, valid=None,
                   parity_tol: float = 5e-2, radius: float = None):
    """f_0..f_m from v^0: L(alpha * F) = dbar v^0 + L^2 d v^0, zero mode through u^0 = beta * v^0.

    Entries of the wrong parity are measured on the last valid nodes (within
    ``radius`` if given), reported and zeroed. F is zero at nodes outside
    the valid region.
    Returns (F[m+1, n, n], relative off-parity residual).
    """
    grid = v0.grid
    h = grid.spacing
    valid = grid.mask if valid is None else valid
    v = v0.values
    LF, d, inner = beltrami(v, valid, h)  # LF[j-1] = (alpha * F)_{-j}
    attenuated = fac is not None and not fac.is_identity
    n_out = min(LF.shape[0], m + 3)
    F = np.zeros((n_out + 1,) + v.shape[1:], dtype=complex)
    if attenuated:
        F[1:] = convolve_modes(fac.beta, LF)[:n_out]
        u01 = convolve_modes(fac.beta, v)[:2]
        du1, _ = wirtinger(u01[1], valid, h)
        F[0] = 2.0 * du1.real + fac.a_values * u01[0]
    else:
        F[1:] = LF[:n_out]
        F[0] = 2.0 * d[1].real
    keep = np.zeros(F.shape[0], dtype=bool)
    keep[m % 2: m + 1: 2] = True
    meter = inner if radius is None else inner & grid.region(radius)
    weights = grid.area_weights * meter
    energy = np.sum(np.abs(F) ** 2 * weights, axis=(-2, -1))
    total = energy.sum()
    residual = float(np.sqrt(energy[~keep].sum() / total)) if total > 0 else 0.0
    if residual > parity_tol:
        warnings.warn(f"off-parity source energy {residual:.2e}", AccuracyWarning)
    log.info("off-parity residual %.3e", residual)
    F = F[: m + 1] * inner
    F[~keep[: m + 1]] = 0.0
    if m % 2 == 0:
        F[0] = F[0].real
    return F, residual


# ---------------------------------------------------------------------------
# norms and diagnostics


def tensor_l2_sq(components: np.ndarray, grid: DiscGrid, region=None) -> float:
    """Squared L^2 norm of a symmetric tensor (all index permutations counted)."""
    m = components.shape[0] - 1
    w = grid.area_weights if region is None else grid.area_weights * region
    mult = np.array([comb(m, k) for k in range(m + 1)], dtype=float)
    return float(np.sum(mult[:, None, None] * components**2 * w))


def relative_error(rec: np.ndarray, truth: np.ndarray, grid: DiscGrid, radius: float = 0.85) -> float:
    region = grid.region(radius)
    den = tensor_l2_sq(truth, grid, region)
    num = tensor_l2_sq(rec - truth, grid, region)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(np.sqrt(num / den))


def data_norm_sq(g: BoundaryTrace) -> float:
    """||L^m g^0||^2 at (m+1/2, 1/2) plus sum_j ||L^{m-j} g^j||^2 at (m-j+3/2, j+1/2).

    The second subscript is the trace smoothness s; the Fourier weight is (1+|n|)^{2s}.
    """
    m = g.m
    total = weighted_norm_sq(g.values[0, m:], m + 0.5, 1.0)
    for j in range(1, m + 1):
        total += weighted_norm_sq(g.values[j, m - j:], m - j + 1.5, j + 1.0)
    return total


def stability_ratio(f: SymmetricTensorField, g: BoundaryTrace) -> float:
    """||f||^2_{L^2} over the trace-norm bound; 0 for the zero tensor."""
    num = tensor_l2_sq(f.components, f.grid)
    den = data_norm_sq(g)
    if num == 0:
        return 0.0
    if den == 0:
        warnings.warn("nonzero tensor with zero data norm", AccuracyWarning)
        return float("inf")
    return num / den


# ---------------------------------------------------------------------------
# pipeline


def reconstruct(data: MomentaSinogram, a: Optional[AttenuationMap] = None, config: RunConfig = None,
                truth: SymmetricTensorField = None) -> ReconstructionReport:
    """Recover the tensor field from all moments I^0..I^m."""
    m = data.m
    config = (config or RunConfig(m=m, n_beta=data.n_beta, n_theta=data.n_theta)).with_overrides(
        m=m, n_beta=data.n_beta, n_theta=data.n_theta).validate()
    grid = DiscGrid(config.grid_n) if a is None else a.grid
    if grid.n != config.grid_n:
        raise ConfigurationError("attenuation grid differs from the configured grid")
    N = config.N
    timings = {}
    t0 = time.perf_counter()
    attenuated = a is not None and not a.is_zero
    fac = None
    neg = 0.0
    if attenuated:
        fac = integrating_factor(a, N, data.n_theta, n_lines=config.n_lines, neg_tol=config.neg_mode_tol)
        neg = fac.negative_residual
    timings["integrating_factor"] = time.perf_counter() - t0

    t = time.perf_counter()
    raw, g = preprocess(data, a, N, n_lines=config.n_lines, neg_tol=config.neg_mode_tol)
    timings["preprocess"] = time.perf_counter() - t

    t = time.perf_counter()
    state = sweep_down(g, grid, m)
    timings["sweep_down"] = time.perf_counter() - t
    level_norms = [float(np.sqrt(np.sum(np.abs(s.values) ** 2 * grid.area_weights))) for s in state.shifted]

    t = time.perf_counter()
    v0, valid = sweep_up(state, grid, fac)
    F, residual = recover_source(v0, m, fac, valid, config.parity_tol, config.error_radius)
    timings["sweep_up_and_source"] = time.perf_counter() - t

    modes = modes_from_nonnegative(F, m)
    comps = modes_to_components_array(modes, tol=1e-6) * grid.mask
    tensor = SymmetricTensorField(m, comps, grid, provenance={"type": "reconstructed", "m": m})
    report = ReconstructionReport(tensor, F, level_norms=level_norms, parity_residual=residual,
                                  negative_mode_residual=neg, timings=timings)
    report.stability_ratio = stability_ratio(truth if truth is not None else tensor, raw)
    if truth is not None:
        report.relative_error = relative_error(comps, truth.components, grid, config.error_radius)
    timings["total"] = time.perf_counter() - t0
    return report
