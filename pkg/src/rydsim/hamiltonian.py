"""Matrix-free applicator for the driven Rydberg Hamiltonian

    H = (Omega/2) sum_i (e^{i phi}|g_i><r_i| + e^{-i phi}|r_i><g_i|)
        - Delta sum_i n_i + sum_{i<j} V_ij n_i n_j      (hbar = 1, rad/s)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from . import _kernels
from .hilbert import StateVector

SPARSE_CACHE_LIMIT = 2 ** 16


@dataclass(frozen=True)
class DriveParams:
    omega: float
    delta: float
    phi: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.omega, self.delta, self.phi)):
            raise ValueError("drive parameters must be finite")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        phi = float(self.phi) % (2 * math.pi)
        object.__setattr__(self, "phi", 0.0 if phi == 2 * math.pi else phi)  # -tiny % 2pi rounds up to 2pi

    def couplings(self):
        """(<raised|H|lowered>, <lowered|H|raised>) for a single-site flip."""
        c_raise = 0.5 * self.omega * np.exp(-1j * self.phi)
        if self.phi == 0.0:
            c_raise = complex(0.5 * self.omega, 0.0)
        return c_raise, np.conj(c_raise)

    @property
    def is_real(self):
        return self.phi == 0.0 or self.omega == 0.0


class BasisMismatchError(ValueError):
    pass


class HamiltonianOperator:
    """Precomputed diagonals plus the single-flip coupling structure.

    Below ``SPARSE_CACHE_LIMIT`` configurations the raising pairs are cached as a
    sparse matrix; above it every application recomputes flip partners on the fly.
    """

    def __init__(self, basis, interactions):
        if interactions.n_sites != basis.n_sites:
            raise BasisMismatchError(
                f"interaction matrix has {interactions.n_sites} sites, basis has {basis.n_sites}")
        self.basis = basis
        self.interactions = interactions
        self.interaction_diag = _kernels.interaction_diagonal(
            basis.configs, interactions.pair_i, interactions.pair_j, interactions.values)
        self.popcount = _kernels.popcount(basis.configs).astype(np.float64)
        self._raise = None
        if basis.size <= SPARSE_CACHE_LIMIT:
            src, dst = _kernels.raising_pairs(basis.configs, basis.n_sites, basis.is_full)
            n = basis.size
            self._raise = sp.csr_matrix((np.ones(src.size), (dst, src)), shape=(n, n))
            self._lower = self._raise.T.tocsr()

    @property
    def matrix_free(self):
        return self._raise is None

    @property
    def size(self):
        return self.basis.size

    def diagonal(self, params):
        return self.interaction_diag - params.delta * self.popcount

    def norm_bound(self, params):
        """Cheap upper bound on the spectral norm."""
        return float(np.abs(self.diagonal(params)).max() + 0.5 * params.omega * self.basis.n_sites)

    def _check(self, x):
        n = x.amplitudes.size if isinstance(x, StateVector) else np.shape(x)[0]
        if isinstance(x, StateVector) and not x.basis.same_as(self.basis):
            raise BasisMismatchError("state lives on a different basis")
        if n != self.size:
            raise BasisMismatchError(f"vector of length {n} for a basis of {self.size}")

    def matvec(self, params, x, out=None):
        """H x for a raw amplitude array."""
        c_raise, c_lower = self.couplings(params)
        diag = self.diagonal(params)
        if self._raise is None:
            return _kernels.apply_matrix_free(self.basis.configs, self.basis.n_sites, self.basis.is_full,
                                              diag, x, c_raise, c_lower, out)
        y = diag * x
        if params.omega != 0.0:
            y = y + c_raise * (self._raise @ x) + c_lower * (self._lower @ x)
        if out is not None:
            out[:] = y
            return out
        return y

    def bind(self, params):
        """Matvec closure with the diagonal for ``params`` precomputed."""
        c_raise, c_lower = self.couplings(params)
        diag = self.diagonal(params)
        if self._raise is None:
            cfg, n, full = self.basis.configs, self.basis.n_sites, self.basis.is_full
            return lambda x: _kernels.apply_matrix_free(cfg, n, full, diag, x, c_raise, c_lower)
        if params.omega == 0.0:
            return lambda x: diag * x
        up, down = self._raise, self._lower
        return lambda x: diag * x + c_raise * (up @ x) + c_lower * (down @ x)

    @staticmethod
    def couplings(params):
        c_raise, c_lower = params.couplings()
        if params.is_real:
            return float(c_raise.real), float(c_lower.real)
        return c_raise, c_lower

    def apply(self, params, state):
        """Unnormalised image H psi as a StateVector on the same basis."""
        self._check(state)
        return StateVector(self.basis, self.matvec(params, state.amplitudes))

    def expectation(self, params, amplitudes):
        return float(np.vdot(amplitudes, self.matvec(params, amplitudes)).real)

    def linear_operator(self, params):
        dtype = np.float64 if params.is_real else np.complex128
        return LinearOperator((self.size, self.size), matvec=lambda v: self.matvec(params, v.ravel()),
                              dtype=dtype)

    def to_dense(self, params):
        if self.size > 4096:
            raise ValueError("dense reconstruction limited to 4096 configurations")
        eye = np.eye(self.size, dtype=complex)
        return np.stack([self.matvec(params, eye[:, k]) for k in range(self.size)], axis=1)


def build_operator(basis, interactions):
    return HamiltonianOperator(basis, interactions)


def apply(op, params, state):
    return op.apply(params, state)
