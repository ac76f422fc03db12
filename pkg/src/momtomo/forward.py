"""Momenta ray transforms in fan-beam coordinates and the k-level flux traces.

Lines are parametrized by a boundary node x = e^{i beta_j} and a direction
theta_l = 2 pi l / n_theta. The line parameter t is measured from the foot
point x - (x.theta) theta, so on the unit circle the chord is t in [-|x.theta|, |x.theta|].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, factorial

import numpy as np

from .errors import ConfigurationError, DataError
from .geometry import AttenuationMap, SymmetricTensorField
from .tensor_algebra import tensor_action_components

TANGENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MomentaSinogram:
    """``data[k, j, l]`` = I_a^k f(e^{i beta_j}, theta_l), k = 0..m."""

    m: int
    data: np.ndarray
    attenuated: bool = False
    provenance: dict = field(default_factory=dict)

    @property
    def n_beta(self) -> int:
        return self.data.shape[1]

    @property
    def n_theta(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class FluxTrace:
    """``g[k, j, l]`` = u^k(e^{i beta_j}, theta_l); zero on the incoming set."""

    m: int
    g: np.ndarray

    @property
    def n_beta(self) -> int:
        return self.g.shape[1]

    @property
    def n_theta(self) -> int:
        return self.g.shape[2]


def fan_angles(n_beta: int, n_theta: int):
    beta = 2 * np.pi * np.arange(n_beta) / n_beta
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return beta, theta


def exit_cosine(n_beta: int, n_theta: int) -> np.ndarray:
    """x.theta = nu(x).theta on the (beta, theta) grid."""
    beta, theta = fan_angles(n_beta, n_theta)
    return np.cos(theta[None, :] - beta[:, None])


def _samples_per_chord(quad_step: float) -> int:
    # every chord has length <= 2, so fixed sample count keeps the step <= quad_step
    return int(ceil(2.0 / quad_step)) + 1


def _chord_integrals(f: SymmetricTensorField, a: AttenuationMap | None, n_beta: int, n_theta: int,
                     quad_step: float, kind: str, chunk: int = 1_500_000) -> np.ndarray:
    """Trapezoid integrals along every fan-beam chord.

    kind="moment":    int t^k e^{-int_t^inf a} <f, theta^m> dt          (all lines)
    kind="transport": int (T-t)^k/k! e^{-int_t^T a} <f, theta^m> dt     (outgoing lines, T = x.theta)
    """
    m = f.m
    K = _samples_per_chord(quad_step)
    beta, theta = fan_angles(n_beta, n_theta)
    out = np.zeros((m + 1, n_beta, n_theta))
    rows = max(1, chunk // (K * n_theta))
    u = np.linspace(-1.0, 1.0, K)
    tw = np.ones(K)
    tw[0] = tw[-1] = 0.5
    ct, st = np.cos(theta), np.sin(theta)
    attenuated = a is not None and not a.is_zero
    for j0 in range(0, n_beta, rows):
        b = beta[j0:j0 + rows]
        xb, yb = np.cos(b)[:, None], np.sin(b)[:, None]
        xt = xb * ct[None, :] + yb * st[None, :]  # (rows, n_theta)
        c = np.abs(xt)
        px = xb - xt * ct[None, :]
        py = yb - xt * st[None, :]
        t = c[..., None] * u  # (rows, n_theta, K)
        X = px[..., None] + t * ct[None, :, None]
        Y = py[..., None] + t * st[None, :, None]
        comps = f.sample(X, Y)
        F = tensor_action_components(comps, m, theta[None, :, None])
        dt = (2.0 * c / (K - 1))[..., None]
        w = dt * tw
        if attenuated:
            av = a.sample(X, Y)
            seg = 0.5 * (av[..., 1:] + av[..., :-1]) * dt
            tail = np.zeros_like(av)
            tail[..., :-1] = np.cumsum(seg[..., ::-1], axis=-1)[..., ::-1]
            w = w * np.exp(-tail)
        wF = w * F
        if kind == "moment":
            tk = np.ones_like(t)
            for k in range(m + 1):
                out[k, j0:j0 + rows] = np.sum(wF * tk, axis=-1)
                tk = tk * t
        elif kind == "transport":
            lag = c[..., None] - t
            lk = np.ones_like(t)
            outgoing = xt > TANGENT_TOL
            for k in range(m + 1):
                out[k, j0:j0 + rows] = np.where(outgoing, np.sum(wF * lk, axis=-1) / factorial(k), 0.0)
                lk = lk * lag
        else:
            raise ValueError(kind)
    tangent = np.abs(exit_cosine(n_beta, n_theta)) <= TANGENT_TOL
    out[:, tangent] = 0.0
    return out


def _default_step(f: SymmetricTensorField, quad_step):
    if quad_step is None:
        return 0.5 * f.grid.spacing
    if quad_step > f.grid.spacing + 1e-15:
        raise ConfigurationError("quadrature step must not exceed the grid spacing")
    return quad_step


def momenta_sinogram(f: SymmetricTensorField, a: AttenuationMap | None, n_beta: int, n_theta: int,
                     quad_step: float | None = None) -> MomentaSinogram:
    """All moments I_a^k f, k = 0..m, sharing one set of chord samples."""
    step = _default_step(f, quad_step)
    data = _chord_integrals(f, a, n_beta, n_theta, step, "moment")
    attenuated = a is not None and not a.is_zero
    prov = {"tensor": f.provenance, "attenuation": None if a is None else a.provenance,
            "quad_step": step, "grid_n": f.grid.n}
    return MomentaSinogram(f.m, data, attenuated, prov)


def ray_transform(f: SymmetricTensorField, a: AttenuationMap | None, k: int, n_beta: int, n_theta: int,
                  quad_step: float | None = None) -> np.ndarray:
    """Single moment slice I_a^k f on the (beta, theta) grid."""
    if not 0 <= k <= f.m:
        raise ConfigurationError(f"moment k={k} outside 0..{f.m}")
    return momenta_sinogram(f, a, n_beta, n_theta, quad_step).data[k]


def solve_transport_traces(f: SymmetricTensorField, a: AttenuationMap | None, n_beta: int, n_theta: int,
                           quad_step: float | None = None) -> FluxTrace:
    """Outgoing traces of the cascade theta.grad u^k + a u^k = u^{k-1}, u^{-1} = <f, theta^m>.

    Integrating the cascade backwards from the exit point T gives the
    iterated kernel (T - t)^k / k! against the attenuated integrand.
    """
    step = _default_step(f, quad_step)
    return FluxTrace(f.m, _chord_integrals(f, a, n_beta, n_theta, step, "transport"))


def traces_from_sinogram(s: MomentaSinogram) -> FluxTrace:
    data = s.data
    if data.ndim != 3 or data.shape[0] != s.m + 1:
        raise DataError(f"need {s.m + 1} moment slices, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise DataError("sinogram has non-finite entries")
    xt = exit_cosine(s.n_beta, s.n_theta)
    g = np.zeros_like(data)
    for k in range(s.m + 1):
        acc = (-1) ** k / factorial(k) * data[k]
        for n in range(1, k + 1):
            acc = acc + (-1) ** (n - 1) * xt**n / factorial(n) * g[k - n]
        g[k] = acc
    g[:, xt <= TANGENT_TOL] = 0.0
    return FluxTrace(s.m, g)


def sinogram_from_traces(t: FluxTrace, attenuated: bool = False) -> MomentaSinogram:
    """Invert the triangular trace relations on the outgoing set.

    Incoming entries are filled from the exit point of the same line,
    beta' = 2 theta + pi - beta, which is a grid node when n_theta divides
    2 n_beta; otherwise a periodic cubic spline in beta is used.
    """
    g = t.g
    m = t.m
    nb, nt = t.n_beta, t.n_theta
    xt = exit_cosine(nb, nt)
    out = np.zeros_like(g)
    for k in range(m + 1):
        acc = g[k].copy()
        for n in range(1, k + 1):
            acc = acc - (-1) ** (n - 1) * xt**n / factorial(n) * g[k - n]
        out[k] = (-1) ** k * factorial(k) * acc
    outgoing = xt > TANGENT_TOL
    out[:, ~outgoing] = 0.0
    _fill_incoming(out, outgoing)
    return MomentaSinogram(m, out, attenuated, {"from": "traces"})


def _fill_incoming(data: np.ndarray, outgoing: np.ndarray):
    nb, nt = data.shape[1:]
    beta, theta = fan_angles(nb, nt)
    incoming = ~outgoing & (exit_cosine(nb, nt) < -TANGENT_TOL)
    if (2 * nb) % nt == 0 and nb % 2 == 0:
        j = np.arange(nb)[:, None]
        l = np.arange(nt)[None, :]
        jp = (l * (2 * nb // nt) + nb // 2 - j) % nb
        src = data[:, jp, np.broadcast_to(l, jp.shape)]
        data[:, incoming] = src[:, incoming]
        return
    from scipy.interpolate import CubicSpline

    for l in range(nt):
        rows = np.nonzero(incoming[:, l])[0]
        if rows.size == 0:
            continue
        bp = np.mod(2 * theta[l] + np.pi - beta[rows], 2 * np.pi)
        for k in range(data.shape[0]):
            col = data[k, :, l]
            cs = CubicSpline(np.r_[beta, 2 * np.pi], np.r_[col, col[0]], bc_type="periodic")
            data[k, rows, l] = cs(bp)


def transport_modes(f: SymmetricTensorField, a: AttenuationMap | None, points: np.ndarray, N: int,
                    n_theta: int, quad_step: float | None = None, chunk: int = 1_500_000) -> np.ndarray:
    """Angular modes u^k_{-n}(z), n = 0..N, of the k-level fluxes at interior points.

    Forward oracle: backward line integrals from each point to the boundary,
    then a discrete angular transform. Returns shape (m+1, N+1, len(points)).
    """
    if n_theta < 2 * N + 2:
        raise ConfigurationError("n_theta must be at least 2N+2")
    step = _default_step(f, quad_step)
    m = f.m
    K = _samples_per_chord(step)
    pts = np.asarray(points, dtype=complex).ravel()
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    ct, st = np.cos(theta), np.sin(theta)
    u = np.linspace(0.0, 1.0, K)
    tw = np.ones(K)
    tw[0] = tw[-1] = 0.5
    vals = np.zeros((m + 1, pts.size, n_theta))
    rows = max(1, chunk // (K * n_theta))
    attenuated = a is not None and not a.is_zero
    for p0 in range(0, pts.size, rows):
        z = pts[p0:p0 + rows]
        zx, zy = z.real[:, None], z.imag[:, None]
        zt = zx * ct + zy * st
        ell = zt + np.sqrt(np.maximum(zt**2 + 1.0 - np.abs(z[:, None]) ** 2, 0.0))
        s = -ell[..., None] * (1.0 - u)  # from the entry point (s=-ell) to z (s=0)
        X = zx[..., None] + s * ct[None, :, None]
        Y = zy[..., None] + s * st[None, :, None]
        F = tensor_action_components(f.sample(X, Y), m, theta[None, :, None])
        ds = (ell / (K - 1))[..., None]
        w = ds * tw
        if attenuated:
            av = a.sample(X, Y)
            seg = 0.5 * (av[..., 1:] + av[..., :-1]) * ds
            tail = np.zeros_like(av)
            tail[..., :-1] = np.cumsum(seg[..., ::-1], axis=-1)[..., ::-1]
            w = w * np.exp(-tail)
        wF = w * F
        lag = -s
        lk = np.ones_like(s)
        for k in range(m + 1):
            vals[k, p0:p0 + rows] = np.sum(wF * lk, axis=-1) / factorial(k)
            lk = lk * lag
    modes = np.fft.ifft(vals, axis=-1)[..., : N + 1]
    return np.moveaxis(modes, -1, 1)
