import math

import numpy as np
import pytest
from conftest import make_system
from hypothesis import given
from hypothesis import strategies as st
from oracles import kron_hamiltonian

from rydsim import hamiltonian
from rydsim.hamiltonian import BasisMismatchError, DriveParams, build_operator
from rydsim.hilbert import BasisConfig, StateVector, enumerate_basis
from rydsim.lattice import build_lattice, interaction_matrix

params_st = st.builds(DriveParams, st.floats(0, 5), st.floats(-5, 5), st.floats(0, 2 * math.pi))


@pytest.mark.parametrize("nx,ny", [(2, 2), (3, 2), (2, 3)])
@pytest.mark.parametrize("phi", [0.0, 0.7])
def test_dense_matches_kronecker_oracle(nx, ny, phi):
    lat, inter, basis, op = make_system(nx, ny, truncation=math.inf)
    p = DriveParams(1.3, 0.4, phi)
    ref = kron_hamiltonian(lat.n_sites, inter.pair_terms, p.omega, p.delta, phi).toarray()
    assert np.abs(op.to_dense(p) - ref).max() < 1e-13 * np.abs(ref).max()


def test_blockade_operator_is_projected_full_operator():
    lat, inter, basis, op = make_system(3, 3, "nn_blockade")
    p = DriveParams(0.9, 1.1, 0.3)
    full = kron_hamiltonian(9, inter.pair_terms, p.omega, p.delta, p.phi).toarray()
    idx = basis.configs.astype(np.int64)
    assert np.abs(op.to_dense(p) - full[np.ix_(idx, idx)]).max() < 1e-14


@pytest.mark.parametrize("kind", ["full", "nn_blockade"])
def test_matrix_free_equals_cached_sparse(kind, monkeypatch, rng):
    _, inter, basis, cached = make_system(3, 3, kind)
    monkeypatch.setattr(hamiltonian, "SPARSE_CACHE_LIMIT", 0)
    free = build_operator(basis, inter)
    assert free.matrix_free and not cached.matrix_free
    x = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
    for p in (DriveParams(1.0, 0.5), DriveParams(0.7, -0.2, 2.0), DriveParams(0.0, 1.0)):
        np.testing.assert_allclose(free.matvec(p, x), cached.matvec(p, x), atol=1e-13)
        np.testing.assert_allclose(free.bind(p)(x), cached.bind(p)(x), atol=1e-13)


@given(params_st, st.integers(0, 2 ** 32 - 1))
def test_hermitian(p, seed):
    _, _, basis, op = make_system(2, 3, "nn_blockade")
    r = np.random.default_rng(seed)
    x, y = (r.normal(size=(2, basis.size)) + 1j * r.normal(size=(2, basis.size)))
    assert np.vdot(x, op.matvec(p, y)) == pytest.approx(np.vdot(op.matvec(p, x), y), abs=1e-9)


@given(params_st)
def test_norm_bound_is_an_upper_bound(p):
    _, _, _, op = make_system(2, 2)
    assert np.linalg.norm(op.to_dense(p), 2) <= op.norm_bound(p) * (1 + 1e-12) + 1e-12


def test_zero_drive_is_diagonal():
    _, _, basis, op = make_system(2, 2)
    p = DriveParams(0.0, 0.8)
    dense = op.to_dense(p)
    assert np.count_nonzero(dense - np.diag(np.diag(dense))) == 0
    np.testing.assert_allclose(np.diag(dense).real, op.diagonal(p))


def test_apply_checks_basis():
    _, _, basis, op = make_system(2, 2)
    other = enumerate_basis(BasisConfig(4, neighbor_pairs=()))
    psi = StateVector.basis_state(other, 0)
    assert hamiltonian.apply(op, DriveParams(1.0, 0.0), psi).norm() > 0  # equal config -> same basis
    with pytest.raises(BasisMismatchError):
        op.apply(DriveParams(1.0, 0.0), StateVector.basis_state(enumerate_basis(BasisConfig(3)), 0))
    lat = build_lattice("square", 3, 3)
    with pytest.raises(BasisMismatchError):
        build_operator(basis, interaction_matrix(lat, 1.0))


@pytest.mark.parametrize("bad", [(-1.0, 0.0), (math.nan, 0.0), (1.0, math.inf)])
def test_drive_params_validation(bad):
    with pytest.raises(ValueError):
        DriveParams(*bad)


def test_phase_is_wrapped():
    assert DriveParams(1.0, 0.0, 2 * math.pi + 0.5).phi == pytest.approx(0.5)
    assert DriveParams(1.0, 0.0, 0.0).is_real and not DriveParams(1.0, 0.0, 1.0).is_real
