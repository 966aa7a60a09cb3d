"""Single-shot Fourier amplitudes and the density-wave order parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._common import grid_images, normalized_weights


@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    kpoints: np.ndarray  # (K, 2) as (k1 along columns, k2 along rows)
    values: np.ndarray  # (K,)
    symmetrized: bool

    def at(self, k1, k2):
        d = np.abs(self.kpoints - np.array([k1, k2]) % (2 * math.pi)).sum(axis=1)
        i = int(np.argmin(d))
        if d[i] > 1e-9:
            raise KeyError(f"k = ({k1}, {k2}) not in spectrum")
        return float(self.values[i])

    def grid(self):
        """Values reshaped to (n_k2, n_k1) when the k-points form a full product grid."""
        k1 = np.unique(self.kpoints[:, 0])
        k2 = np.unique(self.kpoints[:, 1])
        return k1, k2, self.values.reshape(k2.size, k1.size)


def _phases(k, x, y):
    """exp(i (k1 x + k2 y)), exact at multiples of pi/2."""
    q = np.asarray(k) / (math.pi / 2)
    qi = np.rint(q)
    if np.allclose(q, qi, atol=1e-12):
        quarter = np.array([1, 1j, -1, -1j])
        return quarter[((qi[0] * x + qi[1] * y) % 4).astype(np.int64)]
    return np.exp(1j * (k[0] * x + k[1] * y))


def fourier(shots, kpoints=None, symmetrize=False, weights=None):
    """Ensemble-mean |sum_i exp(i k.x_i) n_i| / sqrt(N) at each k-point.

    Default k-points are the discrete grid 2 pi m / nx by 2 pi n / ny.
    With ``symmetrize`` each value is the mean of F(k1, k2) and F(k2, k1).
    """
    images = grid_images(shots)
    s, ny, nx = images.shape
    if kpoints is None:
        k2, k1 = np.meshgrid(2 * math.pi * np.arange(ny) / ny, 2 * math.pi * np.arange(nx) / nx, indexing="ij")
        kpoints = np.stack([k1.ravel(), k2.ravel()], axis=1)
    kpoints = np.asarray(kpoints, dtype=float).reshape(-1, 2) % (2 * math.pi)
    w = normalized_weights(weights, s)
    y, x = np.mgrid[0:ny, 0:nx]
    x, y = x.ravel(), y.ravel()
    flat = images.reshape(s, -1).astype(float)
    norm = math.sqrt(nx * ny)

    def mean_amp(ks):
        ph = np.stack([_phases(k, x, y) for k in ks], axis=1)  # (N, K)
        return w @ (np.abs(flat @ ph) / norm)

    vals = mean_amp(kpoints)
    if symmetrize:
        vals = 0.5 * (vals + mean_amp(kpoints[:, ::-1]))
    return FourierSpectrum(kpoints, vals, symmetrize)


ORDER_KPOINTS = np.array([
    [math.pi, math.pi],
    [0.0, math.pi],
    [math.pi / 2, math.pi],
    [math.pi, math.pi / 2],
])


def order_parameters(shots, weights=None):
    """Checkerboard, striated and star order parameters from the symmetrised spectrum."""
    f = fourier(shots, ORDER_KPOINTS, symmetrize=True, weights=weights).values
    f_pp, f_0p, f_hp, f_ph = f
    return {
        "checkerboard": float(f_pp - f_0p),
        "striated": float(f_0p - f_hp),
        "star": float(f_ph),
    }
