"""Disc discretization, field containers, phantoms and line-disc geometry.

The computational domain is the unit disc sampled on a uniform Cartesian
grid over [-1, 1]^2. Arrays are indexed ``[iy, ix]`` so that ``x`` varies
along the last axis.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError

SUPPORT_MARGIN = 0.05
MIN_GRID = 16


@dataclass(frozen=True, eq=False)
class DiscGrid:
    """Uniform n x n grid on [-1, 1]^2 with a mask for the open unit disc."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError(f"grid needs at least 2 nodes per axis, got {self.n}")

    @property
    def n_x(self) -> int:
        return self.n

    @property
    def n_y(self) -> int:
        return self.n

    @property
    def spacing(self) -> float:
        return 2.0 / (self.n - 1)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        return np.broadcast_to(self.axis[None, :], (self.n, self.n))

    @cached_property
    def y(self) -> np.ndarray:
        return np.broadcast_to(self.axis[:, None], (self.n, self.n))

    @cached_property
    def z(self) -> np.ndarray:
        return self.x + 1j * self.y

    @cached_property
    def mask(self) -> np.ndarray:
        return np.abs(self.z) < 1.0

    @cached_property
    def area_weights(self) -> np.ndarray:
        """Quadrature weights for integrals over the disc.

        Each node gets the exact area of its cell inside the disc. Cells whose
        node lies outside the disc hand their area to the nearest interior
        node one step inward, so that only masked nodes carry weight.
        """
        return _disc_area_weights(self)

    def region(self, radius: float) -> np.ndarray:
        return np.abs(self.z) <= radius

    def __repr__(self):
        return f"DiscGrid(n={self.n}, spacing={self.spacing:.6g})"


def make_disc_grid(n: int) -> DiscGrid:
    if n < MIN_GRID:
        raise ConfigurationError(f"grid size {n} below minimum {MIN_GRID}")
    return DiscGrid(n)


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    n_beta: int

    def __post_init__(self):
        if self.n_beta < 4:
            raise ConfigurationError("boundary grid needs at least 4 nodes")

    @cached_property
    def beta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_beta) / self.n_beta

    @cached_property
    def zeta(self) -> np.ndarray:
        return np.exp(1j * self.beta)


def _cell_disc_area(x0, x1, y0, y1):
    """Exact area of [x0,x1]x[y0,y1] intersected with the unit disc."""
    x0, x1 = max(x0, -1.0), min(x1, 1.0)
    if x1 <= x0:
        return 0.0
    pts = {x0, x1}
    for yy in (y0, y1):
        if abs(yy) < 1.0:
            r = math.sqrt(1.0 - yy * yy)
            for c in (-r, r):
                if x0 < c < x1:
                    pts.add(c)
    pts = sorted(pts)

    def prim(x):
        x = min(max(x, -1.0), 1.0)
        return 0.5 * (x * math.sqrt(max(0.0, 1.0 - x * x)) + math.asin(x))

    area = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        xm = 0.5 * (a + b)
        ym = math.sqrt(max(0.0, 1.0 - xm * xm))
        top_is_circle = ym < y1
        bot_is_circle = -ym > y0
        lo = -ym if bot_is_circle else y0
        hi = ym if top_is_circle else y1
        if hi <= lo:
            continue
        # length = hi - lo with each end either constant or +-sqrt(1-x^2)
        piece = 0.0
        piece += (prim(b) - prim(a)) if top_is_circle else y1 * (b - a)
        piece -= -(prim(b) - prim(a)) if bot_is_circle else y0 * (b - a)
        area += piece
    return area


def _disc_area_weights(grid: DiscGrid) -> np.ndarray:
    h = grid.spacing
    ax = grid.axis
    n = grid.n
    w = np.zeros((n, n))
    r = np.abs(grid.z)
    near = np.abs(r - 1.0) <= h  # cells cut by the circle lie here
    w[grid.mask & ~near] = h * h
    for iy, ix in zip(*np.nonzero(near)):
        w[iy, ix] = _cell_disc_area(ax[ix] - h / 2, ax[ix] + h / 2, ax[iy] - h / 2, ax[iy] + h / 2)
    # move weight of exterior nodes to an interior neighbour
    for iy, ix in zip(*np.nonzero(~grid.mask & (w > 0))):
        zc = grid.z[iy, ix]
        target = zc / abs(zc) * (abs(zc) - h)
        best, best_d = None, np.inf
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                jy, jx = iy + dy, ix + dx
                if 0 <= jy < n and 0 <= jx < n and grid.mask[jy, jx]:
                    d = abs(grid.z[jy, jx] - target)
                    if d < best_d:
                        best, best_d = (jy, jx), d
        if best is not None:
            w[best] += w[iy, ix]
        w[iy, ix] = 0.0
    return w


def bilinear_sample(values: np.ndarray, grid: DiscGrid, x, y) -> np.ndarray:
    """Bilinear interpolation of grid samples; zero outside [-1, 1]^2.

    ``values`` may carry leading axes, interpolation acts on the last two.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = grid.spacing
    n = grid.n
    fx = (x + 1.0) / h
    fy = (y + 1.0) / h
    inside = (fx >= 0) & (fx <= n - 1) & (fy >= 0) & (fy <= n - 1)
    i0 = np.clip(np.floor(fx).astype(int), 0, n - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, n - 2)
    tx = fx - i0
    ty = fy - j0
    v00 = values[..., j0, i0]
    v01 = values[..., j0, i0 + 1]
    v10 = values[..., j0 + 1, i0]
    v11 = values[..., j0 + 1, i0 + 1]
    out = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)
    return np.where(inside, out, 0.0)


# ---------------------------------------------------------------------------
# phantoms


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass
class PhantomSpec:
    """One bump of a phantom.

    ``radius`` is the support radius around ``center``. For gaussian bumps
    ``width`` is the Gaussian length scale (default radius/3) and the profile
    is cut off smoothly between radius/2 and radius. ``power`` is the exponent
    of the polynomial bump; ``None`` selects m + 2 for tensors.
    """

    kind: str = "polynomial"
    center: tuple = (0.0, 0.0)
    radius: float = 0.5
    amplitudes: Optional[Sequence[float]] = None
    width: Optional[float] = None
    power: Optional[int] = None

    def profile(self, default_power: int) -> Callable:
        cx, cy = map(float, self.center)
        r = float(self.radius)
        if self.kind == "polynomial":
            p = default_power if self.power is None else int(self.power)

            def prof(x, y):
                rho2 = ((x - cx) ** 2 + (y - cy) ** 2) / (r * r)
                return np.where(rho2 < 1.0, np.clip(1.0 - rho2, 0.0, None) ** p, 0.0)

        elif self.kind == "gaussian":
            w = r / 3.0 if self.width is None else float(self.width)

            def prof(x, y):
                rho2 = (x - cx) ** 2 + (y - cy) ** 2
                cut = smooth_step((r - np.sqrt(rho2)) / (0.5 * r))
                return np.exp(-rho2 / (w * w)) * cut

        elif self.kind == "zero":

            def prof(x, y):
                return np.zeros(np.broadcast(x, y).shape)

        else:
            raise ConfigurationError(f"unknown phantom kind {self.kind!r}")
        return prof

    def check_support(self):
        if self.kind == "zero":
            return
        c = math.hypot(*map(float, self.center))
        if self.radius <= 0 or c + self.radius > 1.0 - SUPPORT_MARGIN + 1e-12:
            raise ConfigurationError(
                f"phantom support |c|+r = {c + self.radius:.3f} exceeds {1 - SUPPORT_MARGIN}"
            )


def _as_specs(kind, params) -> list:
    if params is None:
        params = [PhantomSpec(kind=kind)]
    elif isinstance(params, (PhantomSpec, dict)):
        params = [params]
    specs = []
    for p in params:
        if isinstance(p, dict):
            p = PhantomSpec(**{"kind": kind, **p})
        if kind is not None and p.kind != kind and kind != "sum":
            p = PhantomSpec(**{**asdict(p), "kind": kind})
        specs.append(p)
    return specs


@dataclass(frozen=True, eq=False)
class SymmetricTensorField:
    """Symmetric m-tensor stored by its m+1 independent components.

    ``components[k]`` is f_{1..1 2..2} with k indices equal to 2. ``func``
    optionally evaluates the exact generator at arbitrary points; ray
    integrals use it instead of grid interpolation when present.
    """

    m: int
    components: np.ndarray
    grid: DiscGrid
    func: Optional[Callable] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError("tensor order must be >= 1")
        if self.components.shape != (self.m + 1, self.grid.n, self.grid.n):
            raise ConfigurationError(
                f"components shape {self.components.shape} does not match m={self.m}, n={self.grid.n}"
            )

    def sample(self, x, y) -> np.ndarray:
        """Components at arbitrary points, shape (m+1, *x.shape)."""
        if self.func is not None:
            return self.func(np.asarray(x, float), np.asarray(y, float))
        return bilinear_sample(self.components, self.grid, x, y)

    def scaled(self, c: float) -> "SymmetricTensorField":
        func = None if self.func is None else (lambda x, y, f=self.func: c * f(x, y))
        return SymmetricTensorField(self.m, c * self.components, self.grid, func, dict(self.provenance, scale=c))

    def __add__(self, other: "SymmetricTensorField") -> "SymmetricTensorField":
        if other.m != self.m or other.grid.n != self.grid.n:
            raise ConfigurationError("cannot add tensors of different order or grid")
        func = None
        if self.func is not None and other.func is not None:
            func = lambda x, y, f=self.func, g=other.func: f(x, y) + g(x, y)  # noqa: E731
        return SymmetricTensorField(self.m, self.components + other.components, self.grid, func,
                                    {"sum": [self.provenance, other.provenance]})


@dataclass(frozen=True, eq=False)
class AttenuationMap:
    values: np.ndarray
    grid: DiscGrid
    func: Optional[Callable] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ConfigurationError("attenuation shape does not match grid")
        if np.any(self.values < -1e-14):
            raise ConfigurationError("attenuation must be non-negative")

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def sample(self, x, y) -> np.ndarray:
        if self.func is not None:
            return self.func(np.asarray(x, float), np.asarray(y, float))
        return bilinear_sample(self.values, self.grid, x, y)


def zero_attenuation(grid: DiscGrid) -> AttenuationMap:
    return AttenuationMap(np.zeros((grid.n, grid.n)), grid,
                          lambda x, y: np.zeros(np.broadcast(x, y).shape), {"kind": "zero"})


def _tensor_func(m: int, specs: list) -> Callable:
    profiles = [(s.profile(m + 2), _amplitudes(s, m)) for s in specs]

    def func(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.zeros((m + 1,) + np.broadcast(x, y).shape)
        for prof, amp in profiles:
            p = prof(x, y)
            out += amp.reshape((m + 1,) + (1,) * p.ndim) * p
        return out

    return func


def _amplitudes(spec: PhantomSpec, m: int) -> np.ndarray:
    if spec.amplitudes is None:
        return np.ones(m + 1)
    amp = np.asarray(spec.amplitudes, dtype=float)
    if amp.shape != (m + 1,):
        raise ConfigurationError(f"need {m + 1} component amplitudes, got {amp.size}")
    return amp


def make_phantom_tensor(m: int, kind: str = "polynomial", params=None, grid: DiscGrid = None
                        ) -> SymmetricTensorField:
    """Phantom tensor; ``params`` is a PhantomSpec, a dict, or a list of either.

    Components of all listed bumps are summed.
    """
    if grid is None:
        raise ConfigurationError("a grid is required")
    if m < 1:
        raise ConfigurationError("tensor order must be >= 1")
    specs = _as_specs(kind, params)
    for s in specs:
        s.check_support()
        _amplitudes(s, m)
    func = _tensor_func(m, specs)
    comps = func(grid.x, grid.y) * grid.mask
    prov = {"type": "tensor", "m": m, "specs": [asdict(s) for s in specs]}
    return SymmetricTensorField(m, comps, grid, func, prov)


def make_attenuation(kind: str = "gaussian", params=None, grid: DiscGrid = None, amplitude: float = None
                     ) -> AttenuationMap:
    """Non-negative scalar attenuation from bump specs (first amplitude used)."""
    if grid is None:
        raise ConfigurationError("a grid is required")
    if kind == "zero":
        return zero_attenuation(grid)
    specs = _as_specs(kind, params)
    for s in specs:
        s.check_support()
    if amplitude is not None:
        specs = [PhantomSpec(**{**asdict(s), "amplitudes": [amplitude]}) for s in specs]
    profs = []
    for s in specs:
        amp = 1.0 if s.amplitudes is None else float(np.asarray(s.amplitudes, float).ravel()[0])
        if amp < 0:
            raise ConfigurationError("attenuation amplitude must be non-negative")
        profs.append((s.profile(4), amp))

    def func(x, y):
        out = 0.0
        for prof, amp in profs:
            out = out + amp * prof(x, y)
        return np.broadcast_to(out, np.broadcast(x, y).shape).astype(float)

    vals = func(grid.x, grid.y) * grid.mask
    prov = {"type": "attenuation", "specs": [asdict(s) for s in specs]}
    return AttenuationMap(vals, grid, func, prov)


def tensor_from_provenance(prov: dict, grid: DiscGrid) -> SymmetricTensorField:
    specs = [PhantomSpec(**s) for s in prov["specs"]]
    return make_phantom_tensor(prov["m"], "sum", specs, grid)


def attenuation_from_provenance(prov: dict, grid: DiscGrid) -> AttenuationMap:
    if prov.get("kind") == "zero":
        return zero_attenuation(grid)
    specs = [PhantomSpec(**s) for s in prov["specs"]]
    return make_attenuation("sum", specs, grid)


# ---------------------------------------------------------------------------
# line geometry


def line_disc_chord(x, theta):
    """Parameter interval ``(t_in, t_out)`` with x + t*theta in the closed disc, t >= 0.

    ``x`` is a boundary point, ``theta`` a unit direction (2-vectors or
    complex numbers). Outgoing and tangent rays give the degenerate (0, 0).
    """
    xv = complex(*x) if not np.iscomplexobj(x) and np.size(x) == 2 else complex(x)
    tv = complex(*theta) if not np.iscomplexobj(theta) and np.size(theta) == 2 else complex(theta)
    xt = xv.real * tv.real + xv.imag * tv.imag
    return 0.0, max(0.0, -2.0 * xt)
