"""Tensor components <-> angular Fourier modes of <f, theta^m>.

With packed components f_k (k indices equal to 2),

    <f, theta^m> = sum_k C(m, k) f_k cos^(m-k) theta sin^k theta
                 = sum_n f_n e^{-i n theta},   n in {-m, -m+2, ..., m}.

The (m+1) x (m+1) map between the two is built once by exact expansion of
cos^a sin^b in exponentials.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import sympy as sp

from .errors import DataError
from .geometry import SymmetricTensorField


def mode_indices(m: int) -> np.ndarray:
    """Fourier indices carried by an m-tensor: -m, -m+2, ..., m."""
    return np.arange(-m, m + 1, 2)


@lru_cache(maxsize=None)
def _conversion_matrices(m: int):
    E = sp.Symbol("E")  # e^{i theta}
    cos = (E + 1 / E) / 2
    sin = (E - 1 / E) / (2 * sp.I)
    idx = mode_indices(m)
    A = sp.zeros(m + 1, m + 1)
    for k in range(m + 1):
        # E^m * cos^(m-k) sin^k is a polynomial in E; e^{-i n theta} sits at E^(m-n)
        poly = sp.Poly(sp.expand(comb(m, k) * cos ** (m - k) * sin**k * E**m), E)
        for row, n in enumerate(idx):
            A[row, k] = poly.coeff_monomial(E ** int(m - n))
    Ainv = A.inv()
    to_modes = np.array(A.evalf(30).tolist(), dtype=complex)
    to_comps = np.array(Ainv.evalf(30).tolist(), dtype=complex)
    return to_modes, to_comps


def conversion_matrix(m: int) -> np.ndarray:
    """Matrix A with f_n = sum_k A[n, k] f_k over n in mode_indices(m)."""
    return _conversion_matrices(m)[0].copy()


@dataclass(frozen=True, eq=False)
class TensorModeVector:
    """Modes f_n, n = -m..m, stored at index n + m; wrong-parity rows are zero."""

    m: int
    modes: np.ndarray  # (2m+1, *spatial) complex

    def mode(self, n: int) -> np.ndarray:
        return self.modes[n + self.m]

    def source_sequence(self, N: int) -> np.ndarray:
        """Sequence <F_0, F_{-1}, ...> of non-negative modes, length N+1.

        Entry j holds f_j for 0 <= j <= m (zero for the other parity);
        shifting by one gives the right-hand side of the level-0
        Beltrami equation for either parity.
        """
        F = np.zeros((N + 1,) + self.modes.shape[1:], dtype=complex)
        for j in range(0, min(self.m, N) + 1):
            F[j] = self.mode(j)
        return F


def _reality_error(modes: np.ndarray, m: int) -> float:
    scale = max(np.abs(modes).max(), 1e-300)
    err = 0.0
    for n in range(0, m + 1):
        err = max(err, np.abs(modes[m + n] - np.conj(modes[m - n])).max())
    return err / scale


def components_to_modes(f: SymmetricTensorField) -> TensorModeVector:
    return components_array_to_modes(f.components, f.m)


def components_array_to_modes(components: np.ndarray, m: int) -> TensorModeVector:
    A = _conversion_matrices(m)[0]
    spatial = components.shape[1:]
    sub = np.tensordot(A, components, axes=(1, 0))  # rows follow mode_indices
    modes = np.zeros((2 * m + 1,) + spatial, dtype=complex)
    modes[mode_indices(m) + m] = sub
    return TensorModeVector(m, modes)


def modes_to_components_array(v: TensorModeVector, tol: float = 1e-9) -> np.ndarray:
    m = v.m
    idx = mode_indices(m) + m
    off = np.setdiff1d(np.arange(2 * m + 1), idx)
    scale = max(np.abs(v.modes).max(), 1e-300)
    if off.size and np.abs(v.modes[off]).max() > tol * scale:
        raise DataError("modes of the wrong parity are nonzero")
    if _reality_error(v.modes, m) > tol:
        raise DataError("modes violate f_{-n} = conj(f_n)")
    Ainv = _conversion_matrices(m)[1]
    return np.tensordot(Ainv, v.modes[idx], axes=(1, 0)).real


def modes_to_components(v: TensorModeVector, grid, tol: float = 1e-9) -> SymmetricTensorField:
    comps = modes_to_components_array(v, tol)
    return SymmetricTensorField(v.m, comps, grid, provenance={"type": "reconstructed"})


def modes_from_nonnegative(F: np.ndarray, m: int) -> TensorModeVector:
    """Tensor modes from f_0..f_m, filling negative indices by conjugation."""
    spatial = F.shape[1:]
    modes = np.zeros((2 * m + 1,) + spatial, dtype=complex)
    for n in mode_indices(m):
        if n >= 0:
            modes[m + n] = F[n]
        else:
            modes[m + n] = np.conj(F[-n])
    if m % 2 == 0:
        modes[m] = modes[m].real
    return TensorModeVector(m, modes)


def tensor_action_components(components: np.ndarray, m: int, theta) -> np.ndarray:
    """<f, theta^m> from packed components; ``theta`` broadcasts against the spatial shape."""
    c = np.cos(theta)
    s = np.sin(theta)
    out = 0.0
    for k in range(m + 1):
        out = out + comb(m, k) * components[k] * c ** (m - k) * s**k
    return out


def tensor_action(f: SymmetricTensorField, theta) -> np.ndarray:
    return tensor_action_components(f.components, f.m, theta)
