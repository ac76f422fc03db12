"""Integral operators for L^2-analytic sequences and the attenuation convolutions.

B  (Bukhgeim-Cauchy): boundary integral reproducing solutions of dbar v + L^2 d v = 0.
T  (Pompeiu type):    area integral right inverse of dbar + L^2 d.
e^{-G}, e^{G}:        mode convolutions with the Fourier coefficients of e^{-h}, e^{h}.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy import fft as sfft
from scipy.interpolate import RectBivariateSpline, make_interp_spline
from scipy.special import roots_legendre

from .errors import AccuracyError, AccuracyWarning, ConfigurationError
from .geometry import AttenuationMap, BoundaryGrid, DiscGrid
from .sequences import ModeSequenceField, wirtinger

log = logging.getLogger(__name__)

# trapezoid rule on the circle loses about exp(-M d) at distance d from it
CAUCHY_DECAY = 28.0
MAX_UPSAMPLE = 16
N_EXTRAP = 5


# ---------------------------------------------------------------------------
# Bukhgeim-Cauchy operator


@numba.njit(cache=True)
def _cauchy_kernel(G, zeta, zs):  # pragma: no cover - compiled
    # G: (D, M, N1) boundary modes, zeta: (M,), zs: (P,) -> (D, N1, P)
    D, M, N1 = G.shape
    P = zs.shape[0]
    out = np.zeros((D, N1, P), dtype=np.complex128)
    acc = np.zeros((D, N1), dtype=np.complex128)
    S = np.zeros(N1 + 2, dtype=np.complex128)
    for p in range(P):
        z = zs[p]
        acc[:, :] = 0.0
        for l in range(M):
            dz = zeta[l] - z
            c = zeta[l] / dz
            pr = 2.0 * c.real
            r = np.conj(dz) / dz
            for d in range(D):
                S[N1] = 0.0
                S[N1 + 1] = 0.0
                for n in range(N1 - 1, -1, -1):
                    if n + 2 < N1:
                        S[n] = r * (G[d, l, n + 2] + S[n + 2])
                    else:
                        S[n] = 0.0
                    acc[d, n] += c * G[d, l, n] + pr * S[n]
        for d in range(D):
            for n in range(N1):
                out[d, n, p] = acc[d, n] / M
    return out


def _upsample(G: np.ndarray, M_new: int) -> np.ndarray:
    """Trigonometric interpolation of (D, N1, M) boundary data to M_new nodes."""
    M = G.shape[-1]
    if M_new == M:
        return G
    c = np.fft.fft(G, axis=-1)
    freq = np.rint(np.fft.fftfreq(M) * M).astype(int)
    out = np.zeros(G.shape[:-1] + (M_new,), dtype=complex)
    nyq = (M % 2 == 0) & (freq == -(M // 2))
    out[..., freq[~nyq] % M_new] = c[..., ~nyq]
    if nyq.any():  # split the Nyquist coefficient between +-M/2
        cn = 0.5 * c[..., nyq][..., 0]
        out[..., M // 2] += cn
        out[..., M_new - M // 2] += cn
    return np.fft.ifft(out, axis=-1) * (M_new / M)


def _lagrange_weights(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Weights w[i, p] with sum_i w[i, p] f(nodes[i, p]) interpolating f at x[p]."""
    k = nodes.shape[0]
    w = np.ones_like(nodes)
    for i in range(k):
        for j in range(k):
            if i != j:
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return w


def cauchy_values(G: np.ndarray, points: np.ndarray, near: str = "extrapolate") -> np.ndarray:
    """B applied to boundary mode data at arbitrary interior points.

    ``G`` has shape (D, N+1, M) for D independent sequences sampled at
    zeta_l = exp(2 pi i l / M). Returns (D, N+1, P).

    Near the circle the trapezoid rule is refined by trigonometric
    upsampling of the data; points closer than the finest level supports
    are extrapolated radially from points further in.
    """
    G = np.asarray(G, dtype=complex)
    D, N1, M = G.shape
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size and np.abs(pts).max() >= 1.0:
        raise ConfigurationError("Cauchy targets must lie in the open disc")
    d = 1.0 - np.abs(pts)
    d_min = CAUCHY_DECAY / (MAX_UPSAMPLE * M)
    close = d < d_min
    if near == "direct":
        if close.any():
            warnings.warn(f"{close.sum()} Cauchy targets within {d_min:.2e} of the boundary", AccuracyWarning)
        close = np.zeros_like(close)
    elif near != "extrapolate":
        raise ConfigurationError(f"unknown near-boundary mode {near!r}")

    direct_pts = pts[~close]
    aux = None
    if close.any():
        zc = pts[close]
        unit = zc / np.abs(zc)
        rho = (1.0 - d_min * (1.0 + np.arange(N_EXTRAP)))[:, None] * np.ones(zc.size)
        aux = (unit[None, :] * rho).ravel()
        direct_pts = np.concatenate([direct_pts, aux])

    vals = _cauchy_banded(G, direct_pts, M)
    out = np.zeros((D, N1, pts.size), dtype=complex)
    nf = int((~close).sum())
    out[..., ~close] = vals[..., :nf]
    if aux is not None:
        av = vals[..., nf:].reshape(D, N1, N_EXTRAP, -1)
        w = _lagrange_weights(rho, np.abs(pts[close]))
        out[..., close] = np.einsum("dnip,ip->dnp", av, w)
    return out


def _cauchy_banded(G: np.ndarray, pts: np.ndarray, M: int) -> np.ndarray:
    D, N1, _ = G.shape
    out = np.zeros((D, N1, pts.size), dtype=complex)
    if pts.size == 0:
        return out
    d = 1.0 - np.abs(pts)
    level = np.zeros(pts.size, dtype=int)
    need = CAUCHY_DECAY / np.maximum(d, 1e-300)
    while True:
        bump = (M * 2.0 ** level < need) & (2 ** level < MAX_UPSAMPLE)
        if not bump.any():
            break
        level[bump] += 1
    for lv in np.unique(level):
        sel = level == lv
        Mn = M * 2 ** int(lv)
        Gu = _upsample(G, Mn)
        zeta = np.exp(2j * np.pi * np.arange(Mn) / Mn)
        out[..., sel] = _cauchy_kernel(np.ascontiguousarray(np.swapaxes(Gu, 1, 2)), zeta, pts[sel])
    return out


def bukhgeim_cauchy(g, targets, near: str = "extrapolate"):
    """(Bg)_{-n}(z) on a DiscGrid (returns ModeSequenceField) or at complex points (returns array)."""
    vals = g.values if isinstance(g, ModeSequenceField) else np.asarray(g)
    single = vals.ndim == 2
    G = vals[None] if single else vals
    if isinstance(targets, DiscGrid):
        mask = targets.mask
        res = cauchy_values(G, targets.z[mask], near)
        full = np.zeros(G.shape[:2] + (targets.n, targets.n), dtype=complex)
        full[..., mask] = res
        return ModeSequenceField(full[0], targets) if single else [ModeSequenceField(v, targets) for v in full]
    res = cauchy_values(G, targets, near)
    shape = np.shape(targets)
    res = res.reshape(G.shape[:2] + shape)
    return res[0] if single else res


# ---------------------------------------------------------------------------
# Pompeiu-type operator


_KERNEL_CACHE: dict = {}
_KERNEL_CACHE_SIZE = 2


def _pompeiu_kernels(n: int, h: float, J: int):
    """FFTs of K_j(e) = conj(e)^j / e^{j+1} on the circulant offset lattice, K_j(0) = 0.

    Kept per grid; a request for more j terms than cached rebuilds the entry.
    """
    key = (n, h)
    hit = _KERNEL_CACHE.get(key)
    if hit is not None and hit[1].shape[0] >= J:
        return hit[0], hit[1][:J]
    size = sfft.next_fast_len(2 * n - 1)
    off = np.arange(size)
    off = np.where(off < n, off, off - size) * h
    e = off[None, :] + 1j * off[:, None]  # [iy, ix]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(e != 0, 1.0 / e, 0.0)
        ratio = np.where(e != 0, np.conj(e) * inv, 0.0)
    K = np.empty((J, size, size), dtype=complex)
    cur = inv
    for j in range(J):
        K[j] = sfft.fft2(cur)
        cur = cur * ratio
    _KERNEL_CACHE.pop(key, None)
    while len(_KERNEL_CACHE) >= _KERNEL_CACHE_SIZE:
        _KERNEL_CACHE.pop(next(iter(_KERNEL_CACHE)))
    _KERNEL_CACHE[key] = (size, K)
    return size, K


@numba.njit(cache=True)
def _toeplitz_accumulate(Kh, Wh, out):  # pragma: no cover - compiled
    # out[n] = sum_j Kh[j] * Wh[n + 2j], flattened spatial axis, blocked for cache reuse
    J = Kh.shape[0]
    N1 = Wh.shape[0]
    S = Wh.shape[1]
    B = 512
    for s0 in range(0, S, B):
        s1 = min(s0 + B, S)
        for n in range(N1):
            for j in range(J):
                m = n + 2 * j
                if m >= N1:
                    break
                for s in range(s0, s1):
                    out[n, s] += Kh[j, s] * Wh[m, s]


def _pompeiu_raw(w: np.ndarray, grid: DiscGrid) -> np.ndarray:
    """Punctured lattice sum (1/pi) sum_j sum_zeta K_j(z - zeta) w_{n+2j}(zeta) area(zeta)."""
    N1 = w.shape[0]
    n = grid.n
    active = np.array([np.any(w[k]) for k in range(N1)])
    if not active.any():
        return np.zeros_like(w)
    J = int(np.nonzero(active)[0].max()) // 2 + 1
    size, K = _pompeiu_kernels(n, grid.spacing, J)
    W = np.zeros((N1, size, size), dtype=complex)
    W[:, :n, :n] = w * grid.area_weights
    Wh = sfft.fft2(W, axes=(-2, -1)).reshape(N1, -1)
    acc = np.zeros_like(Wh)
    _toeplitz_accumulate(K.reshape(J, -1), Wh, acc)
    return sfft.ifft2(acc.reshape(N1, size, size), axes=(-2, -1))[:, :n, :n] / np.pi


_CORR_CACHE: dict = {}


def _local_coefficients(grid: DiscGrid, J: int) -> np.ndarray:
    """C[j, i] = exact minus discrete disc integral of K_j times phi_i, phi = (1, e, conj(e)).

    Here e = zeta - z. Only j = 0, 1 have nonzero exact integrals over the
    unit disc (residue at infinity of the boundary form):
    j = 0: (conj z, -1, -conj(z)^2/2), j = 1: (0, -conj(z)^2/2, 0).
    """
    key = (grid.n, grid.spacing)
    hit = _CORR_CACHE.get(key)
    if hit is not None and hit.shape[0] >= J:
        return hit[:J]
    n = grid.n
    z = grid.z
    size, K = _pompeiu_kernels(n, grid.spacing, J)
    base = np.stack([grid.mask * (1.0 + 0j), grid.mask * z, grid.mask * np.conj(z)])
    W = np.zeros((3, size, size), dtype=complex)
    W[:, :n, :n] = base * grid.area_weights
    Wh = sfft.fft2(W, axes=(-2, -1))
    C = np.empty((J, 3, n, n), dtype=complex)
    for j in range(J):
        S = sfft.ifft2(K[j][None] * Wh, axes=(-2, -1))[:, :n, :n] / np.pi
        C[j, 0] = -S[0]
        C[j, 1] = -(S[1] - z * S[0])
        C[j, 2] = -(S[2] - np.conj(z) * S[0])
    zb = np.conj(z)
    C[0, 0] += zb
    C[0, 1] += -1.0
    C[0, 2] += -0.5 * zb**2
    if J > 1:
        C[1, 1] += -0.5 * zb**2
    _CORR_CACHE.clear()
    _CORR_CACHE[key] = C
    return C


def pompeiu_values(w: np.ndarray, grid: DiscGrid, corrected: bool = True) -> np.ndarray:
    """(Tw)_{-n} on every grid node for sequences ``w`` of shape (N+1, n, n).

    The plain punctured lattice sum loses accuracy next to the target node
    and next to the cut boundary cells. With ``corrected`` the local linear
    Taylor part of w at each target is integrated exactly instead, which
    keeps the rule second order up to the circle.
    """
    w = np.asarray(w, dtype=complex)
    out = _pompeiu_raw(w, grid)
    if not corrected or not np.any(w):
        return out
    N1 = w.shape[0]
    J = (N1 + 1) // 2
    C = _local_coefficients(grid, J)
    wm = w * grid.mask
    d, db = wirtinger(wm, grid.mask, grid.spacing)
    for j in range(J):
        k = N1 - 2 * j
        out[:k] += C[j, 0] * wm[2 * j:] + C[j, 1] * d[2 * j:] + C[j, 2] * db[2 * j:]
    return out * grid.mask


def pompeiu_T(w: ModeSequenceField, targets: DiscGrid = None) -> ModeSequenceField:
    grid = w.grid
    if not isinstance(grid, DiscGrid):
        raise ConfigurationError("T acts on sequences sampled on a disc grid")
    if targets is not None and targets.n != grid.n:
        raise ConfigurationError("T evaluates on the source grid only")
    return ModeSequenceField(pompeiu_values(w.values, grid), grid)


def solve_inhomogeneous(g: ModeSequenceField, w: ModeSequenceField, grid: DiscGrid = None) -> ModeSequenceField:
    """v = B g + T w; dbar v + L^2 d v = w in the disc with v|boundary close to g."""
    grid = grid or (w.grid if w is not None else None)
    v = bukhgeim_cauchy(g, grid)
    if w is None:
        return v
    return v + pompeiu_T(w)


# ---------------------------------------------------------------------------
# Radon and Hilbert transforms


def attenuation_evaluator(a: AttenuationMap):
    """Callable a(x, y); the exact generator when known, else a bicubic spline of the grid."""
    if a.func is not None:
        return a.func
    ax = a.grid.axis
    spl = RectBivariateSpline(ax, ax, a.values, kx=3, ky=3)

    def ev(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = spl.ev(y, x)
        return np.where(x * x + y * y < 1.0, out, 0.0)

    return ev


def radon_transform(a: AttenuationMap, n_s: int, n_dir: int, n_quad: int = 96):
    """Ra(s, omega_l) = int a(s omega + t omega^perp) dt, omega_l = (cos phi_l, sin phi_l).

    Returns (s, phi, values[n_s, n_dir]) with s uniform on [-1, 1].
    """
    s = np.linspace(-1.0, 1.0, n_s)
    phi = 2 * np.pi * np.arange(n_dir) / n_dir
    if a.is_zero:
        return s, phi, np.zeros((n_s, n_dir))
    ev = attenuation_evaluator(a)
    x, wq = roots_legendre(n_quad)
    half = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    t = half[:, None] * x[None, :]
    out = np.empty((n_s, n_dir))
    for l, p in enumerate(phi):
        c, sn = np.cos(p), np.sin(p)
        X = s[:, None] * c - t * sn
        Y = s[:, None] * sn + t * c
        out[:, l] = half * np.sum(wq * ev(X, Y), axis=1)
    return s, phi, out


@lru_cache(maxsize=8)
def _hilbert_kernel(n: int) -> np.ndarray:
    d = np.arange(-(n - 1), n)
    k = np.zeros(d.size)
    odd = d % 2 != 0
    k[odd] = 2.0 / (np.pi * d[odd])
    return k


def hilbert_transform(psi: np.ndarray, axis: int = 0) -> np.ndarray:
    """(1/pi) PV int psi(t)/(s - t) dt on a uniform grid.

    Odd-offset rule: the singular node and every second neighbour are
    skipped and the rest get double weight, which cancels the pole
    symmetrically. The step size drops out of the formula.
    """
    psi = np.moveaxis(np.asarray(psi, dtype=float), axis, 0)
    n = psi.shape[0]
    k = _hilbert_kernel(n)
    flat = psi.reshape(n, -1)
    res = sfft.irfft(sfft.rfft(k, 3 * n)[:, None] * sfft.rfft(flat, 3 * n, axis=0), 3 * n, axis=0)
    out = res[n - 1: 2 * n - 1].reshape(psi.shape)
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# integrating factor and e^{+-G}


@dataclass(frozen=True, eq=False)
class IntegratingFactor:
    """Modes alpha_k, beta_k (k = 0..N) of e^{-h}, e^{h} at a set of points.

    ``alpha`` and ``beta`` have shape (N+1, *points.shape). ``a_values`` is
    the attenuation at the same points, used by zero-mode formulas.
    """

    alpha: np.ndarray
    beta: np.ndarray
    points: np.ndarray
    a_values: np.ndarray
    negative_residual: float = 0.0
    l11_alpha: float = 1.0
    l11_beta: float = 1.0

    @property
    def N(self) -> int:
        return self.alpha.shape[0] - 1

    @property
    def is_identity(self) -> bool:
        return not np.any(self.alpha[1:]) and not np.any(self.beta[1:]) and np.all(self.alpha[0] == 1)


def identity_factor(N: int, points: np.ndarray) -> IntegratingFactor:
    shape = np.shape(points)
    one = np.zeros((N + 1,) + shape, dtype=complex)
    one[0] = 1.0
    return IntegratingFactor(one, one.copy(), np.asarray(points), np.zeros(shape))


def integrating_factor(a: AttenuationMap, N: int, n_theta: int, points=None, n_lines: int = 257,
                       neg_tol: float = 1e-4) -> IntegratingFactor:
    """h(z, theta) = int_0^inf a(z + t theta) dt - (1/2)(I - iH) Ra(z.theta^perp, theta^perp).

    For every direction, a is sampled on a rotated (s, tau) lattice with
    s = z.theta^perp and tau = z.theta. The tail integral in tau, the Radon
    transform and its Hilbert transform are computed there and interpolated
    to the points with quintic splines. ``points`` defaults to the closed
    disc nodes of the attenuation grid (identity elsewhere).
    """
    if n_theta < 2 * N + 2:
        raise ConfigurationError("n_theta must be at least 2N+2")
    grid = a.grid
    on_grid = points is None
    if on_grid:
        pts_full = grid.z
        sel = np.abs(pts_full) <= 1.0
        pts = pts_full[sel]
    else:
        pts_full = np.asarray(points, dtype=complex)
        pts = pts_full.ravel()
    if a.is_zero:
        return identity_factor(N, pts_full)
    ev = attenuation_evaluator(a)
    lat = np.linspace(-1.0, 1.0, n_lines)
    px, py = pts.real, pts.imag
    H = np.empty((pts.size, n_theta), dtype=complex)
    for l in range(n_theta):
        th = 2 * np.pi * l / n_theta
        c, s = np.cos(th), np.sin(th)
        # point = s_ * perp + tau * theta with perp = (-sin, cos)
        X = -lat[:, None] * s + lat[None, :] * c
        Y = lat[:, None] * c + lat[None, :] * s
        A = ev(X, Y)  # (n_s, n_tau)
        prim = make_interp_spline(lat, A, k=5, axis=1).antiderivative()
        P = prim(lat)  # (n_s, n_tau) cumulative from tau = -1
        Da = P[:, -1:] - P
        Ra = Da[:, 0]
        HRa = hilbert_transform(Ra)
        sp = -px * s + py * c
        tp = px * c + py * s
        da = RectBivariateSpline(lat, lat, Da, kx=5, ky=5).ev(sp, tp)
        ra = make_interp_spline(lat, Ra, k=5)(sp)
        hra = make_interp_spline(lat, HRa, k=5)(sp)
        H[:, l] = da - 0.5 * ra + 0.5j * hra
    em = np.fft.fft(np.exp(-H), axis=1) / n_theta
    ep = np.fft.fft(np.exp(H), axis=1) / n_theta
    neg = n_theta // 2
    residual = float(max(np.abs(em[:, neg + 1:]).max(), np.abs(ep[:, neg + 1:]).max()))
    if residual > neg_tol:
        raise AccuracyError(f"negative modes of exp(-h) reach {residual:.2e}; refine n_lines or n_theta")
    alpha = em[:, : N + 1].T
    beta = ep[:, : N + 1].T
    kw = (1.0 + np.arange(N + 1))[:, None]
    l11a = float(np.max(np.sum(kw * np.abs(alpha), axis=0)))
    l11b = float(np.max(np.sum(kw * np.abs(beta), axis=0)))
    a_pts = ev(px, py)
    log.info("integrating factor: negative-mode residual %.2e, l11 %.3f / %.3f", residual, l11a, l11b)
    if on_grid:
        shape = pts_full.shape
        fa = np.zeros((N + 1,) + shape, dtype=complex)
        fb = np.zeros_like(fa)
        fa[0] = fb[0] = 1.0
        fa[:, sel] = alpha
        fb[:, sel] = beta
        av = np.zeros(shape)
        av[sel] = a_pts
        return IntegratingFactor(fa, fb, pts_full, av, residual, l11a, l11b)
    shape = pts_full.shape
    return IntegratingFactor(alpha.reshape((N + 1,) + shape), beta.reshape((N + 1,) + shape), pts_full,
                             a_pts.reshape(shape), residual, l11a, l11b)


def convolve_modes(c: np.ndarray, u: np.ndarray) -> np.ndarray:
    """(c * u)_n = sum_k c_k u_{n+k}, truncated at u's length."""
    N1 = u.shape[0]
    out = np.zeros(np.broadcast_shapes(u.shape, (N1,) + c.shape[1:]), dtype=complex)
    for k in range(min(N1, c.shape[0])):
        out[: N1 - k] += c[k] * u[k:]
    return out


def cauchy_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients of the product of two power series in e^{i theta}, truncated."""
    N1 = min(a.shape[0], b.shape[0])
    out = np.zeros((N1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]), dtype=complex)
    for k in range(N1):
        out[k:] += a[k] * b[: N1 - k]
    return out


def apply_eG(sign: int, fac: IntegratingFactor, u):
    """e^{-G} u = alpha * u (sign=-1) or e^{G} u = beta * u (sign=+1)."""
    if sign not in (1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    vals = u.values if isinstance(u, ModeSequenceField) else np.asarray(u)
    coef = fac.alpha if sign < 0 else fac.beta
    if coef.shape[1:] != vals.shape[1:]:
        raise ConfigurationError("integrating factor and sequence live on different nodes")
    out = convolve_modes(coef, vals)
    return ModeSequenceField(out, u.grid) if isinstance(u, ModeSequenceField) else out


def boundary_factor(a: AttenuationMap, N: int, n_theta: int, n_beta: int, **kw) -> IntegratingFactor:
    """Integrating factor at the boundary nodes exp(2 pi i j / n_beta)."""
    return integrating_factor(a, N, n_theta, BoundaryGrid(n_beta).zeta, **kw)
