import numpy as np
import pytest
from hypothesis import given, strategies as st

from momtomo.errors import ConfigurationError
from momtomo.forward import FluxTrace
from momtomo.geometry import BoundaryGrid, DiscGrid
from momtomo.sequences import (ModeSequenceField, angular_modes, beltrami, boundary_fourier, erode,
                               interior_weighted_norm, left_shift, masked_diff, synthesize, weighted_norm,
                               weighted_norm_sq, wirtinger)


def trace_of(fn, n_beta=8, n_theta=32, m=0):
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    g = np.broadcast_to(fn(th), (m + 1, n_beta, n_theta)).copy()
    return FluxTrace(m, g)


def test_constant_trace_modes():
    b = angular_modes(trace_of(lambda th: np.ones_like(th)), 8)
    assert np.allclose(b.values[0, 0], 1) and np.allclose(b.values[0, 1:], 0, atol=1e-15)


def test_cosine_trace_modes():
    b = angular_modes(trace_of(np.cos), 8)
    assert np.allclose(b.values[0, 1], 0.5)
    assert np.allclose(np.delete(b.values[0], 1, axis=0), 0, atol=1e-15)


def test_undersampled_directions_rejected():
    with pytest.raises(ConfigurationError):
        angular_modes(trace_of(np.cos, n_theta=16), 8)


@given(st.integers(1, 12), st.integers(0, 2**31))
def test_band_limited_round_trip(N, seed):
    rng = np.random.default_rng(seed)
    modes = rng.normal(size=(N + 1, 4)) + 1j * rng.normal(size=(N + 1, 4))
    modes[0] = modes[0].real
    th = 2 * np.pi * np.arange(2 * N + 2) / (2 * N + 2)
    u = synthesize(modes, th)  # (4, n_theta)
    b = angular_modes(FluxTrace(0, u[None]), N)
    # the Nyquist mode of a real signal is only determined up to its real part
    assert np.abs(b.values[0, :N] - modes[:N]).max() < 1e-12


def test_left_shift_definition():
    u = ModeSequenceField(np.arange(3.0)[:, None] * np.ones((3, 4)), BoundaryGrid(4))
    assert np.array_equal(left_shift(u, 1).values, u.values[1:])
    assert left_shift(u, 0).values is u.values or np.array_equal(left_shift(u, 0).values, u.values)
    with pytest.raises(ConfigurationError):
        left_shift(u, 3)


def test_weighted_norm_single_entry():
    vals = np.zeros((3, 16), complex)
    vals[1] = 1.0  # g_{-1, 0} = 1
    assert weighted_norm(ModeSequenceField(vals, BoundaryGrid(16)), 1, 0.5) ** 2 == pytest.approx(4)


def test_weighted_norm_zero():
    assert weighted_norm(ModeSequenceField(np.zeros((3, 8), complex), BoundaryGrid(8)), 2, 1) == 0


@given(st.floats(0, 3), st.floats(0, 2), st.integers(0, 2**31))
def test_weighted_norm_direct_sum_oracle(p, q, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(4, 16)) + 1j * rng.normal(size=(4, 16))
    beta = 2 * np.pi * np.arange(16) / 16
    total = 0.0
    for j in range(4):
        for n in range(-8, 8):
            c = np.mean(vals[j] * np.exp(-1j * n * beta))
            total += (1 + j) ** (2 * p) * (1 + abs(n)) ** (2 * q - 1) * abs(c) ** 2
    assert weighted_norm_sq(vals, p, q) == pytest.approx(total, rel=1e-12)


@given(st.floats(0, 3), st.floats(0, 2), st.integers(0, 2**31))
def test_shift_does_not_increase_norm(p, q, seed):
    rng = np.random.default_rng(seed)
    u = ModeSequenceField(rng.normal(size=(6, 16)) + 0j, BoundaryGrid(16))
    assert weighted_norm(left_shift(u, 1), p, q) <= weighted_norm(u, p, q) * (1 + 1e-12)


def test_double_fourier_frequencies():
    coef, freq = boundary_fourier(np.exp(3j * BoundaryGrid(16).beta)[None])
    assert np.isclose(coef[0, freq == 3][0], 1)


def test_interior_norm_constant_is_area(grid129):
    vals = np.zeros((2, 129, 129), complex)
    vals[0] = grid129.mask
    nrm = interior_weighted_norm(ModeSequenceField(vals, grid129), 2.0, 0)
    assert abs(nrm**2 - np.pi) / np.pi <= 0.02


def test_interior_norm_h1_of_re_z(grid129):
    vals = np.zeros((1, 129, 129), complex)
    vals[0] = grid129.x * grid129.mask
    nrm = interior_weighted_norm(ModeSequenceField(vals, grid129), 0.0, 1)
    assert nrm**2 == pytest.approx(np.pi / 4 + np.pi, rel=0.02)


def test_interior_norm_zero_and_bad_q(grid65):
    u = ModeSequenceField(np.zeros((2, 65, 65), complex), grid65)
    assert interior_weighted_norm(u, 1, 2) == 0
    with pytest.raises(ConfigurationError):
        interior_weighted_norm(u, 1, 3)


def test_masked_diff_exact_on_quadratics(grid65):
    f = grid65.x**2 - 3 * grid65.x * grid65.y
    fx = masked_diff(f, grid65.mask, grid65.spacing, "x")
    assert np.abs(fx - (2 * grid65.x - 3 * grid65.y))[grid65.mask].max() < 1e-11


def test_wirtinger_of_zbar(grid65):
    d, db = wirtinger(np.conj(grid65.z), grid65.mask, grid65.spacing)
    assert np.abs(db - 1)[grid65.mask].max() < 1e-12 and np.abs(d)[grid65.mask].max() < 1e-12


def test_beltrami_recursion_example(grid65):
    # v_{-n} = conj(z), v_{-n-2} = 0 gives dbar v_{-n} + d v_{-n-2} = 1
    v = np.zeros((3, 65, 65), complex)
    v[0] = np.conj(grid65.z)
    D, _, eroded = beltrami(v, grid65.mask, grid65.spacing)
    assert np.allclose(D[0][grid65.mask], 1)
    assert eroded.sum() < grid65.mask.sum()


def test_beltrami_needs_three_modes(grid65):
    with pytest.raises(ConfigurationError):
        beltrami(np.zeros((2, 65, 65)), grid65.mask, grid65.spacing)


def test_erode_removes_edge(grid65):
    m = grid65.mask
    e = erode(m)
    assert np.all(m[e])
    edge = m & ~(np.roll(m, 1, 0) & np.roll(m, -1, 0) & np.roll(m, 1, 1) & np.roll(m, -1, 1))
    assert edge.any() and not np.any(e & edge)


def test_sequence_padding_and_tail():
    u = ModeSequenceField(np.ones((3, 4)), BoundaryGrid(4))
    assert u.padded(5).N == 5 and not np.any(u.padded(5).values[3:])
    assert (u + u.padded(5)).N == 5
    assert u.tail_ratio() == 1.0
