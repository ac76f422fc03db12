"""Mode sequences <u_0, u_{-1}, ..., u_{-N}>, left shifts, norms and Wirtinger stencils."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigurationError, DataError
from .forward import FluxTrace
from .geometry import BoundaryGrid, DiscGrid

log = logging.getLogger(__name__)

TAIL_TOL = 1e-6
FD_ORDER = 2


@dataclass(frozen=True, eq=False)
class ModeSequenceField:
    """``values[n]`` holds u_{-n} at every node of ``grid``, n = 0..N."""

    values: np.ndarray
    grid: Union[DiscGrid, BoundaryGrid]

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def on_boundary(self) -> bool:
        return isinstance(self.grid, BoundaryGrid)

    def tail_ratio(self) -> float:
        peak = np.abs(self.values).max()
        return 0.0 if peak == 0 else float(np.abs(self.values[-1]).max() / peak)

    def padded(self, N: int) -> "ModeSequenceField":
        """Extend with zero modes (or cut) to truncation N."""
        if N <= self.N:
            return ModeSequenceField(self.values[: N + 1], self.grid)
        extra = np.zeros((N - self.N,) + self.values.shape[1:], dtype=self.values.dtype)
        return ModeSequenceField(np.concatenate([self.values, extra]), self.grid)

    def __add__(self, other: "ModeSequenceField") -> "ModeSequenceField":
        N = max(self.N, other.N)
        return ModeSequenceField(self.padded(N).values + other.padded(N).values, self.grid)


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Angular modes of the traces g^k on the boundary circle, ``values[k, n, j]``."""

    m: int
    values: np.ndarray
    grid: BoundaryGrid

    def __post_init__(self):
        if self.values.shape[0] != self.m + 1 or self.values.shape[2] != self.grid.n_beta:
            raise DataError(f"trace array shape {self.values.shape} inconsistent with m={self.m}")

    @property
    def N(self) -> int:
        return self.values.shape[1] - 1

    def level(self, k: int) -> ModeSequenceField:
        return ModeSequenceField(self.values[k], self.grid)

    def double_fourier(self, k: int):
        """Coefficients g_{-j,n} of g^k_{-j}(e^{i beta}) = sum_n g_{-j,n} e^{i n beta}."""
        return boundary_fourier(self.values[k])


def boundary_fourier(values: np.ndarray):
    nb = values.shape[-1]
    coef = np.fft.fft(values, axis=-1) / nb
    freq = np.rint(np.fft.fftfreq(nb) * nb).astype(int)
    return coef, freq


def angular_modes(t: FluxTrace, N: int) -> BoundaryTrace:
    """u_{-n}(e^{i beta}) = (1/2pi) int u e^{i n theta} d theta on the uniform direction grid."""
    if t.n_theta < 2 * N + 2:
        raise ConfigurationError(f"n_theta={t.n_theta} too small for N={N} (need >= 2N+2)")
    modes = np.fft.ifft(t.g, axis=-1)[..., : N + 1]
    values = np.moveaxis(modes, -1, 1)  # (m+1, N+1, n_beta)
    tb = ModeSequenceField(values[-1], BoundaryGrid(t.n_beta)).tail_ratio()
    if tb > TAIL_TOL:
        log.info("angular tail |g_-N|/max = %.2e", tb)
    return BoundaryTrace(t.m, values, BoundaryGrid(t.n_beta))


def synthesize(modes: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Real angular function from its non-positive modes (positive ones by conjugation)."""
    theta = np.asarray(theta, dtype=float)
    out = np.real(modes[0])[..., None] * np.ones_like(theta)
    for k in range(1, modes.shape[0]):
        out = out + 2 * np.real(modes[k][..., None] * np.exp(-1j * k * theta))
    return out


def left_shift(u: ModeSequenceField, n: int) -> ModeSequenceField:
    if n < 0 or n > u.N:
        raise ConfigurationError(f"shift {n} outside 0..{u.N}")
    return ModeSequenceField(u.values[n:], u.grid)


def weighted_norm(u: ModeSequenceField, p: float, q: float) -> float:
    """sqrt(sum_j sum_n (1+j)^{2p} (1+|n|)^{2q-1} |g_{-j,n}|^2) for boundary sequences."""
    if not u.on_boundary:
        raise ConfigurationError("weighted_norm expects a boundary sequence")
    return float(np.sqrt(weighted_norm_sq(u.values, p, q)))


def weighted_norm_sq(values: np.ndarray, p: float, q: float) -> float:
    coef, freq = boundary_fourier(values)
    j = np.arange(values.shape[0])[:, None]
    w = (1.0 + j) ** (2 * p) * (1.0 + np.abs(freq)[None, :]) ** (2 * q - 1)
    return float(np.sum(w * np.abs(coef) ** 2))


# ---------------------------------------------------------------------------
# masked finite differences


def _shift(a: np.ndarray, k: int, axis: int, fill):
    """b[i] = a[i + k] along ``axis``, ``fill`` where out of range."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def masked_diff(f: np.ndarray, valid: np.ndarray, h: float, axis: str, order: int = None) -> np.ndarray:
    """First derivative along x or y using only nodes where ``valid`` holds.

    Centered where both neighbours are valid (fourth order when two valid
    neighbours exist on each side and ``order`` is 4), one-sided second
    order next to the mask edge, first order if only one neighbour exists,
    else zero.
    """
    order = FD_ORDER if order is None else order
    ax = -1 if axis == "x" else -2
    vax = -1 if axis == "x" else 0
    vp1, vm1 = _shift(valid, 1, vax, False), _shift(valid, -1, vax, False)
    vp2, vm2 = _shift(valid, 2, vax, False), _shift(valid, -2, vax, False)
    fp1, fm1 = _shift(f, 1, ax, 0), _shift(f, -1, ax, 0)
    fp2, fm2 = _shift(f, 2, ax, 0), _shift(f, -2, ax, 0)
    central = vp1 & vm1
    wide = central & vp2 & vm2 if order == 4 else np.zeros_like(central)
    fwd2 = ~central & vp1 & vp2
    bwd2 = ~central & ~fwd2 & vm1 & vm2
    fwd1 = ~central & ~fwd2 & ~bwd2 & vp1
    bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & vm1
    out = np.where(central, (fp1 - fm1) / (2 * h), 0)
    out = np.where(wide, (8 * (fp1 - fm1) - (fp2 - fm2)) / (12 * h), out)
    out = np.where(fwd2, (-3 * f + 4 * fp1 - fp2) / (2 * h), out)
    out = np.where(bwd2, (3 * f - 4 * fm1 + fm2) / (2 * h), out)
    out = np.where(fwd1, (fp1 - f) / h, out)
    out = np.where(bwd1, (f - fm1) / h, out)
    return np.where(valid, out, 0)


def erode(valid: np.ndarray) -> np.ndarray:
    """Nodes whose four axis neighbours are valid."""
    out = valid.copy()
    for k, ax in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
        out &= _shift(valid, k, ax, False)
    return out


def wirtinger(f: np.ndarray, valid: np.ndarray, h: float):
    """(d f, dbar f) with d = (dx - i dy)/2 and dbar = (dx + i dy)/2."""
    fx = masked_diff(f, valid, h, "x")
    fy = masked_diff(f, valid, h, "y")
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def beltrami(values: np.ndarray, valid: np.ndarray, h: float):
    """(dbar + L^2 d) applied to a sequence of grid modes, truncation N-2.

    Returns the result, the derivative d values (for zero-mode formulas)
    and the eroded validity mask.
    """
    if values.shape[0] < 3:
        raise ConfigurationError("need at least three modes to apply dbar + L^2 d")
    d, db = wirtinger(values, valid, h)
    return db[:-2] + d[2:], d, erode(valid)


def interior_weighted_norm(u: ModeSequenceField, p: float, q: int) -> float:
    """sqrt(sum_j (1+j)^{2p} ||u_{-j}||^2_{H^q}) with masked stencils and disc area weights."""
    if u.on_boundary:
        raise ConfigurationError("interior_weighted_norm expects a disc sequence")
    if q not in (0, 1, 2):
        raise ConfigurationError("only q in {0, 1, 2} is supported")
    g = u.grid
    w = g.area_weights
    valid = g.mask
    h = g.spacing
    vals = u.values
    dens = np.abs(vals) ** 2
    if q >= 1:
        fx = masked_diff(vals, valid, h, "x")
        fy = masked_diff(vals, valid, h, "y")
        dens = dens + np.abs(fx) ** 2 + np.abs(fy) ** 2
        if q == 2:
            fxx = masked_diff(fx, valid, h, "x")
            fyy = masked_diff(fy, valid, h, "y")
            fxy = masked_diff(fx, valid, h, "y")
            dens = dens + np.abs(fxx) ** 2 + 2 * np.abs(fxy) ** 2 + np.abs(fyy) ** 2
    per_mode = np.sum(dens * w, axis=(-2, -1))
    j = np.arange(vals.shape[0])
    return float(np.sqrt(np.sum((1.0 + j) ** (2 * p) * per_mode)))
