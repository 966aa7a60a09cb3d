"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)  # basis order (r, g): +1 on |r>


def kron_hamiltonian(n_sites, pairs, omega, delta, phi=0.0):
    """Sparse H from single-site Kronecker products, basis index = sum_i n_i 2^i.

    Per site, in (g, r) order: [[0, (omega/2) e^{i phi}], [(omega/2) e^{-i phi}, -delta]].
    ``pairs`` is an iterable of (i, j, V_ij).
    """
    eye = sp.identity(2, format="csr", dtype=complex)
    h1 = sp.csr_matrix(np.array([[0, 0.5 * omega * np.exp(1j * phi)],
                                 [0.5 * omega * np.exp(-1j * phi), -delta]], dtype=complex))
    n_op = sp.csr_matrix(np.diag([0.0, 1.0]).astype(complex))

    def embed(ops):
        # site n-1 is the most significant bit, so it goes first in the product
        out = sp.identity(1, format="csr", dtype=complex)
        for s in range(n_sites - 1, -1, -1):
            out = sp.kron(out, ops.get(s, eye), format="csr")
        return out

    dim = 2 ** n_sites
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for s in range(n_sites):
        h = h + embed({s: h1})
    for i, j, v in pairs:
        h = h + v * embed({i: n_op, j: n_op})
    return h.tocsr()


def brute_force_independent_sets(n_sites, edges):
    """Every bit pattern with no edge fully set, by filtering all 2^n patterns."""
    pats = np.arange(2 ** n_sites, dtype=np.uint64)
    ok = np.ones(pats.size, dtype=bool)
    for i, j in edges:
        ok &= ((pats >> np.uint64(i)) & (pats >> np.uint64(j)) & np.uint64(1)) == 0
    return pats[ok]


def grid_edges(nx, ny):
    edges = []
    for r in range(ny):
        for c in range(nx):
            s = r * nx + c
            if c + 1 < nx:
                edges.append((s, s + 1))
            if r + 1 < ny:
                edges.append((s, s + nx))
    return edges


def transfer_matrix_count(nx, ny):
    """Number of independent sets of the nx-by-ny grid graph by row transfer matrix."""
    rows = [m for m in range(2 ** nx) if m & (m >> 1) == 0]
    t = np.array([[1 if a & b == 0 else 0 for b in rows] for a in rows], dtype=object)
    v = np.ones(len(rows), dtype=object)
    for _ in range(ny - 1):
        v = t.dot(v)
    return int(sum(v))


def two_level_quench_sz(omega, delta, tau, phi, bloch):
    """<sz> after exp(-i H tau) with H = omega (cos phi sx + sin phi sy)/2 + delta sz/2."""
    h = 0.5 * omega * (math.cos(phi) * SX + math.sin(phi) * SY) + 0.5 * delta * SZ
    u = expm(-1j * tau * h)
    sx, sy, sz = bloch
    rho = 0.5 * (np.eye(2) + sx * SX + sy * SY + sz * SZ)
    return float(np.trace(u @ rho @ u.conj().T @ SZ).real)


def pattern_ensemble(images):
    """Uniform mixture of the given (ny, nx) images as an image stack."""
    return np.stack([np.asarray(im, dtype=np.uint8) for im in images])


def all_square_shapes(max_side):
    return [(nx, ny) for nx, ny in itertools.product(range(1, max_side + 1), repeat=2)]
