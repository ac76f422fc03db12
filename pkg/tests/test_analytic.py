import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from momtomo.analytic import (apply_eG, bukhgeim_cauchy, cauchy_product, cauchy_values, convolve_modes,
                              hilbert_transform, identity_factor, integrating_factor, pompeiu_T,
                              pompeiu_values, radon_transform, solve_inhomogeneous)
from momtomo.errors import AccuracyWarning, ConfigurationError
from momtomo.geometry import AttenuationMap, BoundaryGrid, DiscGrid, make_attenuation, zero_attenuation
from momtomo.sequences import ModeSequenceField, beltrami, left_shift, wirtinger
from momtomo.verify import right_inverse_residual, smooth_test_sequence


def interior_points(n, radius, seed=0):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))


def gauss_atten(grid, amp=0.5):
    return make_attenuation("gaussian", {"center": (-0.1, 0.1), "radius": 0.7}, grid, amp)


# -- Bukhgeim-Cauchy operator ------------------------------------------------

def test_cauchy_reproduces_holomorphic():
    zeta = BoundaryGrid(256).zeta
    g = np.zeros((5, 256), complex)
    g[0] = zeta
    z = interior_points(200, 0.9)
    v = bukhgeim_cauchy(g, z)
    assert np.abs(v[0] - z).max() < 1e-12 and np.abs(v[1:]).max() < 1e-12


def test_cauchy_reproduces_l2_analytic_sequence():
    zeta = BoundaryGrid(512).zeta
    g = np.zeros((6, 512), complex)
    g[0], g[2] = np.conj(zeta), -zeta
    z = interior_points(200, 0.8)
    v = bukhgeim_cauchy(g, z)
    ref = np.zeros_like(v)
    ref[0], ref[2] = np.conj(z), -z
    assert np.abs(v - ref).max() < 1e-4


def test_cauchy_zero():
    assert not np.any(bukhgeim_cauchy(np.zeros((3, 64), complex), interior_points(10, 0.5)))


def test_cauchy_near_boundary_extrapolation_accurate():
    zeta = BoundaryGrid(128).zeta
    g = np.zeros((3, 128), complex)
    g[0] = zeta**3
    z = (1 - np.logspace(-6, -2, 20)) * np.exp(0.3j)
    assert np.abs(bukhgeim_cauchy(g, z)[0] - z**3).max() < 1e-6


def test_cauchy_direct_mode_warns_near_boundary():
    g = np.zeros((1, 3, 64), complex)
    with pytest.warns(AccuracyWarning):
        cauchy_values(g, np.array([0.999 + 0j]), near="direct")


def test_cauchy_output_is_l2_analytic_under_refinement():
    # B of arbitrary smooth data solves dbar v + L^2 d v = 0; residual shrinks at second order
    res = []
    for n in (65, 129):
        grid = DiscGrid(n)
        beta = BoundaryGrid(256).beta
        g = np.stack([np.cos((k + 1) * beta) + 1j * np.sin(2 * beta) / (k + 1) for k in range(8)])
        v = bukhgeim_cauchy(ModeSequenceField(g, BoundaryGrid(256)), grid)
        D, _, valid = beltrami(v.values, grid.mask, grid.spacing)
        res.append(np.abs(D)[:, valid & grid.region(0.8)].max())
    assert res[1] < res[0] / 3


# -- Pompeiu operator ------------------------------------------------------------

def test_pompeiu_zbar_identity(grid129):
    w = np.zeros((3, 129, 129), complex)
    w[0] = grid129.mask
    region = grid129.region(0.8)
    base = pompeiu_values(w, grid129, corrected=False)
    assert np.abs(base[0] - np.conj(grid129.z))[region].max() <= 5e-3
    full = pompeiu_values(w, grid129)
    assert np.abs(full[0] - np.conj(grid129.z))[grid129.mask].max() < 1e-12
    assert np.abs(full[1:])[:, grid129.mask].max() < 1e-12


def test_pompeiu_zero(grid65):
    assert not np.any(pompeiu_values(np.zeros((4, 65, 65), complex), grid65))


def test_pompeiu_right_inverse_converges():
    rng_seed = 7
    res = []
    for n in (65, 129, 257):
        g = DiscGrid(n)
        w = smooth_test_sequence(g, 6, np.random.default_rng(rng_seed))
        res.append(right_inverse_residual(w, g))
    assert res[1] < res[0] / 2 and res[2] < res[1] / 2


def test_pompeiu_kernel_sign_flip_detected(grid65, monkeypatch):
    import momtomo.analytic as an

    good = right_inverse_residual(smooth_test_sequence(grid65, 4, np.random.default_rng(1)), grid65)
    orig = an._pompeiu_kernels

    def flipped(n, h, J):
        size, K = orig(n, h, J)
        return size, -K

    monkeypatch.setattr(an, "_pompeiu_kernels", flipped)
    an._CORR_CACHE.clear()
    bad = right_inverse_residual(smooth_test_sequence(grid65, 4, np.random.default_rng(1)), grid65)
    an._CORR_CACHE.clear()
    an._KERNEL_CACHE.clear()
    assert bad > 100 * good


def test_pompeiu_T_wrapper_and_targets(grid65):
    w = ModeSequenceField(np.zeros((3, 65, 65), complex), grid65)
    assert pompeiu_T(w).N == 2
    with pytest.raises(ConfigurationError):
        pompeiu_T(w, DiscGrid(33))


def test_TL_powers_stay_bounded(grid65):
    rng = np.random.default_rng(5)
    w = smooth_test_sequence(grid65, 12, rng)
    wt = grid65.area_weights
    norm = lambda u: np.sqrt(np.sum(np.abs(u) ** 2 * wt))  # noqa: E731
    u = w / norm(w)
    growth = []
    for _ in range(4):
        u = pompeiu_values(u[1:], grid65)
        growth.append(norm(u))
    assert np.all(np.isfinite(growth)) and max(growth) < 5


def test_solve_inhomogeneous_reduces_to_cauchy(grid65):
    beta = BoundaryGrid(128).beta
    g = ModeSequenceField(np.stack([np.exp(1j * beta), np.cos(beta) + 0j, 0 * beta + 0j]), BoundaryGrid(128))
    v = solve_inhomogeneous(g, None, grid65)
    assert np.array_equal(v.values, bukhgeim_cauchy(g, grid65).values)


def test_solve_inhomogeneous_residual(grid129):
    w = smooth_test_sequence(grid129, 5, np.random.default_rng(2))
    g = ModeSequenceField(np.zeros((6, 256), complex), BoundaryGrid(256))
    v = solve_inhomogeneous(g, ModeSequenceField(w, grid129))
    D, _, valid = beltrami(v.values, grid129.mask, grid129.spacing)
    assert np.abs(D - w[:4])[:, valid & grid129.region(0.9)].max() < 1e-2


# -- Radon and Hilbert -----------------------------------------------------------

def test_radon_zero(grid65):
    assert not np.any(radon_transform(zero_attenuation(grid65), 33, 8)[2])


def test_radon_paraboloid_closed_form(grid65):
    f = lambda x, y: np.clip(1 - x**2 - y**2, 0, None)  # noqa: E731
    a = AttenuationMap(f(grid65.x, grid65.y), grid65, f, {"kind": "paraboloid"})
    s, phi, R = radon_transform(a, 41, 6)
    ref = 4 / 3 * np.clip(1 - s**2, 0, None) ** 1.5
    assert np.abs(R - ref[:, None]).max() < 1e-12


def test_radon_radial_rotation_invariance(grid65):
    a = make_attenuation("gaussian", {"center": (0, 0), "radius": 0.8}, grid65, 1.0)
    R = radon_transform(a, 33, 12)[2]
    assert np.abs(R - R[:, :1]).max() < 1e-10


def test_hilbert_zero_and_linear():
    assert not np.any(hilbert_transform(np.zeros(64)))
    psi = np.random.default_rng(0).normal(size=65)
    assert np.allclose(hilbert_transform(2 * psi), 2 * hilbert_transform(psi))


def test_hilbert_lorentzian():
    # 1/(1+t^2) has Hilbert transform s/(1+s^2); window wide enough for a negligible tail
    L = 2000.0
    t = np.linspace(-L, L, 400001)
    H = hilbert_transform(1 / (1 + t**2))
    sel = np.abs(t) <= 5
    # truncating the tail at |t| = L changes Hpsi by about 2 s / (pi L^2) ... and 2/(pi L) offsets cancel by symmetry
    assert np.abs(H[sel] - t[sel] / (1 + t[sel] ** 2)).max() < 1e-4


def test_hilbert_of_semicircle():
    # H[(1-t^2)^{1/2}_+](s) = s inside [-1, 1]
    t = np.linspace(-1, 1, 4001)
    H = hilbert_transform(np.sqrt(np.clip(1 - t**2, 0, None)))
    sel = np.abs(t) < 0.9
    assert np.abs(H[sel] - t[sel]).max() < 1e-3


# -- integrating factor and e^{+-G} ------------------------------------------------

def test_zero_attenuation_identity_factor(grid65):
    fac = integrating_factor(zero_attenuation(grid65), 8, 32)
    assert fac.is_identity
    u = np.random.default_rng(0).normal(size=(9, 65, 65)) + 0j
    assert np.array_equal(apply_eG(-1, fac, u), u)


@pytest.fixture(scope="module")
def gauss_factor():
    g = DiscGrid(65)
    a = gauss_atten(g)
    pts = interior_points(120, 0.95, seed=3)
    return a, pts, integrating_factor(a, 32, 512, pts)


def test_alpha_beta_inverse(gauss_factor):
    _, _, fac = gauss_factor
    prod = cauchy_product(fac.alpha, fac.beta)
    delta = np.zeros_like(prod)
    delta[0] = 1
    assert np.abs(prod - delta).max() <= 1e-8


def test_negative_modes_vanish(gauss_factor):
    assert gauss_factor[2].negative_residual <= 1e-6


def test_eG_round_trip(gauss_factor):
    _, pts, fac = gauss_factor
    rng = np.random.default_rng(9)
    u = rng.normal(size=(33, pts.size)) + 1j * rng.normal(size=(33, pts.size))
    assert np.abs(apply_eG(1, fac, apply_eG(-1, fac, u)) - u).max() <= 1e-8 * np.abs(u).max()


def test_eG_commutes_with_shift(gauss_factor):
    _, pts, fac = gauss_factor
    u = np.random.default_rng(4).normal(size=(33, pts.size)) + 0j
    lhs = convolve_modes(fac.alpha, u[1:])
    rhs = convolve_modes(fac.alpha, u)[1:]
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(u).max()


def test_factor_sign_of_h_at_zero_attenuation_limit(grid65):
    # alpha_0 = mean of exp(-h) over directions; for small a, h is small
    a = gauss_atten(grid65, 1e-6)
    fac = integrating_factor(a, 4, 16, interior_points(5, 0.5))
    assert np.abs(fac.alpha[0] - 1).max() < 1e-5 and np.abs(fac.alpha[1:]).max() < 1e-5


def test_reduction_removes_attenuation_term():
    # u with dbar u + L^2 d u + a L u = w  =>  v = alpha * u solves dbar v + L^2 d v = alpha * w
    res = []
    for n in (65, 129):
        g = DiscGrid(n)
        a = gauss_atten(g)
        N = 10
        fac = integrating_factor(a, N, 64)
        # u has modes 0..N; two zero modes on top make w complete up to N
        u = np.concatenate([smooth_test_sequence(g, N, np.random.default_rng(11)), np.zeros((2, n, n))])
        d, db = wirtinger(u, g.mask, g.spacing)
        w = db[:-2] + d[2:] + a.values * u[1:-1]
        v = convolve_modes(fac.alpha, u[: N + 1])
        Dv, _, valid = beltrami(np.concatenate([v, np.zeros((2, n, n))]), g.mask, g.spacing)
        rhs = convolve_modes(fac.alpha, w)
        res.append(np.abs(Dv - rhs)[:, valid & g.region(0.8)].max())
    assert res[1] < res[0] / 2.5 and res[1] < 5e-2


def test_identity_factor_shape():
    fac = identity_factor(3, np.zeros((4, 5)))
    assert fac.alpha.shape == (4, 4, 5) and fac.is_identity
