"""Many-body bases (full or nearest-neighbour blockaded) and state vectors."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels

FULL_CAP = 24
BLOCKADE_CAP = 36


class Constraint(str, Enum):
    FULL = "full"
    NN_BLOCKADE = "nn_blockade"


class BasisSizeError(ValueError):
    """Requested basis exceeds the enumeration cap."""


@dataclass(frozen=True)
class BasisConfig:
    n_sites: int
    constraint: Constraint = Constraint.FULL
    neighbor_pairs: tuple = ()

    @classmethod
    def for_lattice(cls, lattice, constraint="full"):
        constraint = Constraint(constraint)
        pairs = tuple(lattice.nearest_neighbor_pairs()) if constraint is Constraint.NN_BLOCKADE else ()
        return cls(lattice.n_sites, constraint, pairs)


@dataclass(frozen=True, eq=False)
class Basis:
    """Configurations as bit patterns (bit i = n_i), strictly ascending."""

    config: BasisConfig
    configs: np.ndarray

    @property
    def n_sites(self):
        return self.config.n_sites

    @property
    def constraint(self):
        return self.config.constraint

    @property
    def is_full(self):
        return self.config.constraint is Constraint.FULL

    @property
    def size(self):
        return self.configs.size

    def __len__(self):
        return self.configs.size

    def lookup(self, patterns):
        """Index of each bit pattern; raises KeyError for patterns outside the basis."""
        patterns = np.asarray(patterns, dtype=np.uint64)
        if self.is_full:
            idx = patterns.astype(np.int64)
            bad = idx >= self.size
        else:
            idx = np.searchsorted(self.configs, patterns)
            clipped = np.minimum(idx, self.size - 1)
            bad = (idx >= self.size) | (self.configs[clipped] != patterns)
        if np.any(bad):
            raise KeyError(f"pattern(s) not in basis: {patterns[bad][:5].tolist()}")
        return idx

    def occupations(self):
        """(n_configs, n_sites) uint8 array of bits."""
        return unpack_bits(self.configs, self.n_sites)

    def same_as(self, other):
        return self is other or (
            self.config == other.config and np.array_equal(self.configs, other.configs)
        )


def enumerate_basis(config):
    n = config.n_sites
    if config.constraint is Constraint.FULL:
        if n > FULL_CAP:
            raise BasisSizeError(f"full basis with {n} sites exceeds the cap of {FULL_CAP} sites (2^{FULL_CAP} configs)")
        configs = np.arange(2 ** n, dtype=np.uint64)
    else:
        if n > BLOCKADE_CAP:
            raise BasisSizeError(f"blockade basis with {n} sites exceeds the cap of {BLOCKADE_CAP} sites (6x6)")
        lower = np.zeros(n, dtype=np.uint64)
        for i, j in config.neighbor_pairs:
            lo, hi = min(i, j), max(i, j)
            if hi >= n:
                raise ValueError(f"neighbor pair ({i}, {j}) outside {n} sites")
            lower[hi] |= np.uint64(1 << lo)
        configs = _kernels.independent_sets(n, lower)
    configs.setflags(write=False)
    return Basis(config, configs)


def occupation(config_bits, site, n_sites=64):
    if not 0 <= site < n_sites:
        raise IndexError(f"site {site} out of range for {n_sites} sites")
    return (int(config_bits) >> site) & 1


def hamming_density(config_bits, n):
    return bin(int(config_bits)).count("1") / n


def unpack_bits(configs, n_sites):
    configs = np.asarray(configs, dtype=np.uint64)
    shifts = np.arange(n_sites, dtype=np.uint64)
    return ((configs[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def pack_bits(occupations):
    occ = np.asarray(occupations, dtype=np.uint64)
    if occ.shape[-1] > 64:
        raise ValueError("cannot pack more than 64 sites into a bit pattern")
    weights = np.uint64(1) << np.arange(occ.shape[-1], dtype=np.uint64)
    return (occ * weights).sum(axis=-1, dtype=np.uint64)


_MAGIC = b"RYSV"
_HEADER = struct.Struct("<4sIBBQ")
_CONSTRAINT_CODE = {Constraint.FULL: 0, Constraint.NN_BLOCKADE: 1}


@dataclass(eq=False)
class StateVector:
    basis: Basis
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes)
        if self.amplitudes.shape != (self.basis.size,):
            raise ValueError(f"expected {self.basis.size} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def basis_state(cls, basis, pattern=0):
        amps = np.zeros(basis.size, dtype=complex)
        amps[basis.lookup(pattern)] = 1.0
        return cls(basis, amps)

    @classmethod
    def from_patterns(cls, basis, patterns, coeffs):
        amps = np.zeros(basis.size, dtype=complex)
        amps[basis.lookup(np.asarray(patterns, dtype=np.uint64))] = coeffs
        return cls(basis, amps).normalized()

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        return StateVector(self.basis, self.amplitudes / self.norm(), dict(self.meta))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_bytes(self, precision=128):
        if precision not in (64, 128):
            raise ValueError("precision must be 64 or 128 (complex bits)")
        dtype = np.dtype("<c8") if precision == 64 else np.dtype("<c16")
        header = _HEADER.pack(_MAGIC, self.basis.n_sites, _CONSTRAINT_CODE[self.basis.constraint],
                              precision // 8, self.basis.size)
        return header + self.amplitudes.astype(dtype).tobytes()

    @classmethod
    def from_bytes(cls, data, basis=None):
        magic, n_sites, code, width, n_configs = _HEADER.unpack_from(data)
        if magic != _MAGIC:
            raise ValueError("not a state vector record")
        constraint = {v: k for k, v in _CONSTRAINT_CODE.items()}[code]
        if basis is None:
            if constraint is not Constraint.FULL:
                raise ValueError("a blockade-constrained record needs its basis to be supplied")
            basis = enumerate_basis(BasisConfig(n_sites))
        if (basis.n_sites, basis.constraint, basis.size) != (n_sites, constraint, n_configs):
            raise ValueError("record header does not match the supplied basis")
        dtype = np.dtype("<c8") if width == 8 else np.dtype("<c16")
        amps = np.frombuffer(data, dtype=dtype, count=n_configs, offset=_HEADER.size)
        return cls(basis, amps.astype(complex))
