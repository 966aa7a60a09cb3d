import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydsim.lattice import (GridRequiredError, Lattice, blockade_radius, build_lattice, interaction_matrix,
                            v0_for_blockade)


def test_square_sites_are_row_major():
    lat = build_lattice("square", 3, 2)
    assert lat.n_sites == 6
    assert lat.sites[4].tolist() == [1.0, 1.0]
    assert lat.grid[5].tolist() == [2, 1]


@pytest.mark.parametrize("nx,ny", [(1, 1), (2, 3), (4, 4), (5, 2)])
def test_square_nearest_neighbour_count(nx, ny):
    lat = build_lattice("square", nx, ny)
    assert len(lat.nearest_neighbor_pairs()) == nx * (ny - 1) + ny * (nx - 1)


def test_triangular_bulk_site_has_six_neighbours():
    lat = build_lattice("triangular", 5, 5)
    pairs = lat.nearest_neighbor_pairs()
    centre = 2 * 5 + 2
    assert sum(centre in p for p in pairs) == 6


def test_honeycomb_has_two_sites_per_cell_and_coordination_three():
    lat = build_lattice("honeycomb", 4, 4)
    assert lat.n_sites == 32
    deg = np.zeros(lat.n_sites, int)
    for i, j in lat.nearest_neighbor_pairs():
        deg[i] += 1
        deg[j] += 1
    assert deg.max() == 3


def test_non_square_lattices_have_no_grid():
    with pytest.raises(GridRequiredError):
        build_lattice("honeycomb", 2, 2).require_grid()


@pytest.mark.parametrize("args", [("square", 0, 2), ("square", 2, 2, 0.0), ("hexagon", 2, 2)])
def test_invalid_lattice_arguments(args):
    with pytest.raises(ValueError):
        build_lattice(*args)


def test_default_truncation_keeps_three_neighbour_shells():
    lat = build_lattice("square", 4, 4)
    im = interaction_matrix(lat, 64.0)
    d = lat.distances()[im.pair_i, im.pair_j]
    assert sorted(set(np.round(d, 9))) == [1.0, round(math.sqrt(2), 9), 2.0]
    np.testing.assert_allclose(im.values, 64.0 / d ** 6)


def test_infinite_truncation_keeps_all_pairs():
    lat = build_lattice("square", 3, 3)
    im = interaction_matrix(lat, 1.0, math.inf)
    assert len(im.values) == 9 * 8 // 2
    dense = im.dense()
    assert np.allclose(dense, dense.T) and np.all(np.diag(dense) == 0)


def test_interaction_validation():
    lat = build_lattice("square", 2, 2)
    with pytest.raises(ValueError):
        interaction_matrix(lat, 0.0)
    with pytest.raises(ValueError):
        interaction_matrix(lat, 1.0, 0.5)


def test_json_roundtrip_and_tamper_detection():
    lat = build_lattice("triangular", 3, 2, 1.5)
    back = Lattice.from_json(lat.to_json())
    assert np.allclose(back.sites, lat.sites) and back.kind == lat.kind
    d = lat.to_dict()
    d["sites"][0] = [9.0, 9.0]
    with pytest.raises(ValueError):
        Lattice.from_dict(d)


@given(st.floats(0.5, 3.0), st.floats(1e-3, 1e9))
def test_blockade_radius_inverts_v0(rb, omega):
    assert blockade_radius(v0_for_blockade(rb, omega), omega) == pytest.approx(rb, rel=1e-12)


def test_blockade_radius_rejects_non_positive():
    with pytest.raises(ValueError):
        blockade_radius(1.0, 0.0)
