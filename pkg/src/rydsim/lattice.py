"""Array geometries and the truncated van der Waals interaction matrix."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_TOL = 1e-9


class LatticeKind(str, Enum):
    SQUARE = "square"
    HONEYCOMB = "honeycomb"
    TRIANGULAR = "triangular"


class GridRequiredError(ValueError):
    """Raised when a grid-indexed analysis receives a lattice without (col, row) indices."""


@dataclass(frozen=True, eq=False)
class Lattice:
    """Site coordinates in units of ``spacing_a``; ``grid`` holds (col, row) for square lattices."""

    kind: LatticeKind
    nx: int
    ny: int
    spacing_a: float
    sites: np.ndarray
    grid: np.ndarray | None = None

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def is_grid(self):
        return self.grid is not None

    def require_grid(self):
        if self.grid is None:
            raise GridRequiredError(f"{self.kind.value} lattice has no (col, row) grid indices")
        return self.grid

    def distances(self):
        """Pairwise distances in units of the lattice spacing."""
        diff = self.sites[:, None, :] - self.sites[None, :, :]
        return np.sqrt((diff ** 2).sum(-1))

    def nearest_neighbor_pairs(self):
        d = self.distances()
        dmin = d[np.triu_indices(self.n_sites, 1)].min() if self.n_sites > 1 else 1.0
        i, j = np.nonzero(np.triu(np.abs(d - dmin) < _TOL, 1))
        return list(zip(i.tolist(), j.tolist()))

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "nx": self.nx,
            "ny": self.ny,
            "spacing_a": self.spacing_a,
            "sites": self.sites.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        lat = build_lattice(data["kind"], data["nx"], data["ny"], data["spacing_a"])
        if "sites" in data and not np.allclose(np.asarray(data["sites"]), lat.sites):
            raise ValueError("site list does not match the declared geometry")
        return lat

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_lattice(kind, nx, ny, spacing_a=1.0):
    """Build a square, triangular (nx*ny sites) or honeycomb (2*nx*ny sites) patch.

    Sites are ordered row by row. Triangular rows are offset by half a spacing
    on odd rows; honeycomb cells hold an A site and the B site directly above it.
    """
    kind = LatticeKind(kind)
    if nx < 1 or ny < 1:
        raise ValueError(f"lattice dimensions must be >= 1, got {nx}x{ny}")
    if not spacing_a > 0:
        raise ValueError("spacing_a must be positive")

    grid = None
    if kind is LatticeKind.SQUARE:
        rows, cols = np.divmod(np.arange(nx * ny), nx)
        sites = np.stack([cols, rows], axis=1).astype(float)
        grid = np.stack([cols, rows], axis=1).astype(np.int64)
    elif kind is LatticeKind.TRIANGULAR:
        rows, cols = np.divmod(np.arange(nx * ny), nx)
        sites = np.stack([cols + 0.5 * (rows % 2), rows * math.sqrt(3) / 2], axis=1)
    else:
        pts = []
        s3 = math.sqrt(3)
        for r in range(ny):
            for c in range(nx):
                x = s3 * c + 0.5 * s3 * (r % 2)
                y = 1.5 * r
                pts.append((x, y))
                pts.append((x, y + 1.0))
        sites = np.array(pts, dtype=float)
    sites.setflags(write=False)
    if grid is not None:
        grid.setflags(write=False)
    return Lattice(kind, int(nx), int(ny), float(spacing_a), sites, grid)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Retained pairs i < j with V_ij = v0 / |x_i - x_j|^6 (physical lengths)."""

    v0: float
    truncation_range: float
    pair_i: np.ndarray
    pair_j: np.ndarray
    values: np.ndarray
    n_sites: int = field(default=0)

    @property
    def pair_terms(self):
        return list(zip(self.pair_i.tolist(), self.pair_j.tolist(), self.values.tolist()))

    def dense(self):
        m = np.zeros((self.n_sites, self.n_sites))
        m[self.pair_i, self.pair_j] = self.values
        m[self.pair_j, self.pair_i] = self.values
        return m


def interaction_matrix(lattice, v0, truncation_range=None):
    """Pairs within ``truncation_range`` (physical length; default 2a, third neighbours).

    Pass ``math.inf`` to keep every pair.
    """
    if not v0 > 0:
        raise ValueError("v0 must be positive")
    a = lattice.spacing_a
    if truncation_range is None:
        truncation_range = 2.0 * a
    if truncation_range < a * (1 - _TOL):
        raise ValueError("truncation_range must be at least the lattice spacing")
    d = lattice.distances() * a
    iu, ju = np.triu_indices(lattice.n_sites, 1)
    r = d[iu, ju]
    keep = r <= truncation_range * (1 + _TOL)
    iu, ju, r = iu[keep], ju[keep], r[keep]
    vals = v0 / r ** 6
    for arr in (iu, ju, vals):
        arr.setflags(write=False)
    return InteractionMatrix(float(v0), float(truncation_range), iu.astype(np.int64), ju.astype(np.int64),
                             vals, lattice.n_sites)


def blockade_radius(v0, omega):
    """R_b = (v0 / omega)^(1/6)."""
    if not (v0 > 0 and omega > 0):
        raise ValueError("v0 and omega must be positive")
    return (v0 / omega) ** (1.0 / 6.0)


def v0_for_blockade(rb_over_a, omega, spacing_a=1.0):
    """Inverse of :func:`blockade_radius`: the v0 giving R_b = rb_over_a * spacing_a."""
    return omega * (rb_over_a * spacing_a) ** 6
