"""Conditional Rydberg density given the local neighbourhood."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .. import _kernels
from ._common import grid_images, normalized_weights


@dataclass(frozen=True)
class ConditionalDensity:
    d: int
    value: float
    numerator: float
    denominator: float

    @property
    def defined(self):
        return self.denominator > 0


def conditional_density(shots, d, weights=None):
    """P(n_i = 1 | four nearest neighbours empty, exactly ``d`` diagonal neighbours excited).

    Only bulk sites (full 3x3 neighbourhood) are counted. With unit weights the
    numerator and denominator are event counts; with probabilities they are
    exact expectations. An empty denominator yields ``value = nan``.
    """
    if d not in (0, 1, 2, 3, 4):
        raise ValueError("d must be in 0..4")
    images = grid_images(shots)
    if weights is not None:
        weights = normalized_weights(weights, images.shape[0])
    num, den = _kernels.conditional_counts(images, d, weights)
    value = num / den if den > 0 else math.nan
    return ConditionalDensity(d, value, float(num), float(den))
