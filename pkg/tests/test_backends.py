"""The numba kernels and their numpy twins must agree exactly (or to rounding)."""
import numpy as np
import pytest
from conftest import make_system

from rydsim import _kernels
from rydsim.hamiltonian import DriveParams
from rydsim.hilbert import BasisConfig, enumerate_basis
from rydsim.lattice import build_lattice

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not importable")


def both(monkeypatch, fn):
    out = {}
    for name, flag in (("numba", "0"), ("numpy", "1")):
        monkeypatch.setenv("RYDSIM_NO_NUMBA", flag)
        assert _kernels.backend_name() == name
        out[name] = fn()
    return out["numba"], out["numpy"]


def test_flag_values(monkeypatch):
    for flag, name in (("1", "numpy"), ("true", "numpy"), ("0", "numba"), ("", "numba"), ("off", "numba")):
        monkeypatch.setenv("RYDSIM_NO_NUMBA", flag)
        assert _kernels.backend_name() == name


@pytest.mark.parametrize("shape", [(3, 3), (4, 4), (5, 3)])
def test_independent_sets(monkeypatch, shape):
    lat = build_lattice("square", *shape)
    a, b = both(monkeypatch, lambda: enumerate_basis(BasisConfig.for_lattice(lat, "nn_blockade")).configs)
    np.testing.assert_array_equal(a, b)


def test_diagonal_kernels(monkeypatch):
    _, inter, basis, _ = make_system(3, 3)
    a, b = both(monkeypatch, lambda: (_kernels.popcount(basis.configs),
                                      _kernels.interaction_diagonal(basis.configs, inter.pair_i, inter.pair_j,
                                                                    inter.values)))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=1e-14)


@pytest.mark.parametrize("kind", ["full", "nn_blockade"])
def test_raising_pairs(monkeypatch, kind):
    _, _, basis, _ = make_system(3, 3, kind)
    (sa, da), (sb, db) = both(monkeypatch, lambda: _kernels.raising_pairs(basis.configs, basis.n_sites,
                                                                          basis.is_full))
    assert sorted(zip(sa.tolist(), da.tolist())) == sorted(zip(sb.tolist(), db.tolist()))


@pytest.mark.parametrize("kind", ["full", "nn_blockade"])
def test_matrix_free_apply(monkeypatch, kind, rng):
    _, _, basis, op = make_system(3, 3, kind)
    p = DriveParams(1.3, 0.4, 0.7)
    c_raise, c_lower = op.couplings(p)
    x = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
    diag = op.diagonal(p)
    a, b = both(monkeypatch, lambda: _kernels.apply_matrix_free(basis.configs, basis.n_sites, basis.is_full,
                                                                diag, x, c_raise, c_lower))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(a, op.to_dense(p) @ x, atol=1e-12)


def test_displacement_sums(monkeypatch, rng):
    cov = rng.normal(size=(12, 12))
    (sa, ca), (sb, cb) = both(monkeypatch, lambda: _kernels.displacement_sums(cov, 4, 3))
    np.testing.assert_allclose(sa, sb, rtol=1e-13)
    np.testing.assert_array_equal(ca, cb)


@pytest.mark.parametrize("d", range(5))
def test_conditional_counts(monkeypatch, rng, d):
    images = rng.integers(0, 2, (40, 6, 7)).astype(np.uint8)
    w = rng.random(40)
    a, b = both(monkeypatch, lambda: _kernels.conditional_counts(images, d, w))
    assert a == pytest.approx(b, rel=1e-13)
