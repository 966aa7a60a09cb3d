"""State-vector ensembles: every configuration weighted by its Born probability.

Pass the returned ``(shots, weights)`` to any estimator to obtain its exact
expectation instead of a sampled one.
"""
import numpy as np

from ..hilbert import unpack_bits
from ..measure import ShotSet


def exact_ensemble(state, grid, cutoff=0.0):
    p = state.probabilities()
    keep = p > cutoff
    bits = unpack_bits(state.basis.configs[keep], state.basis.n_sites)
    return ShotSet(bits, grid, {"exact": True}), p[keep] / p[keep].sum()


def density_moments(state):
    """(<n_i>, <n_i n_j>) from the state vector."""
    p = state.probabilities()
    occ = unpack_bits(state.basis.configs, state.basis.n_sites).astype(float)
    return p @ occ, occ.T @ (p[:, None] * occ)
