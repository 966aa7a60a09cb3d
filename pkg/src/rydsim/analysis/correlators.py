"""Connected correlators on the displacement grid, staggered magnetisation and correlation lengths."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import _kernels
from ._common import grid_images, normalized_weights


@dataclass(frozen=True, eq=False)
class CorrelationMap:
    """G(k, l) for column displacement k and row displacement l.

    ``values`` and ``counts`` are indexed ``[l + ny - 1, k + nx - 1]``.
    """

    values: np.ndarray
    counts: np.ndarray
    nx: int
    ny: int
    kind: str = "density"  # or "magnetization"

    def at(self, k, l):
        return float(self.values[l + self.ny - 1, k + self.nx - 1])

    def count(self, k, l):
        return int(self.counts[l + self.ny - 1, k + self.nx - 1])

    def displacements(self):
        l, k = np.mgrid[-(self.ny - 1):self.ny, -(self.nx - 1):self.nx]
        return k, l

    def rectified(self):
        """Sign-rectified map: (-1)^(k+l) G for density maps, G itself for magnetisation."""
        if self.kind != "density":
            return self.values.copy()
        k, l = self.displacements()
        return np.where((k + l) % 2 == 0, 1.0, -1.0) * self.values

    def rows(self):
        k, l = self.displacements()
        return [(int(a), int(b), float(v), int(c))
                for a, b, v, c in zip(k.ravel(), l.ravel(), self.values.ravel(), self.counts.ravel())]

    def write_csv(self, path, header_lines=()):
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "l", "value", "count"])
            for k, l, v, c in self.rows():
                w.writerow([k, l, repr(v), c])
        return path


def correlation_map(values, nx, ny, weights=None, kind="density"):
    """Connected correlator of per-site ``values`` (n_shots, nx*ny) averaged per displacement class."""
    x = np.asarray(values, dtype=float).reshape(len(values), -1)
    if weights is None and x.shape[0] < 2:
        raise ValueError("need at least 2 shots for a connected correlator")
    w = normalized_weights(weights, x.shape[0])
    mean = w @ x
    cov = x.T @ (w[:, None] * x) - np.outer(mean, mean)
    sums, counts = _kernels.displacement_sums(cov, nx, ny)
    if np.any(counts == 0):
        raise ValueError("empty displacement class")
    g = sums / counts
    g = 0.5 * (g + g[::-1, ::-1])
    return CorrelationMap(g, counts.astype(np.int64), nx, ny, kind)


def g2_density(shots, weights=None):
    images = grid_images(shots)
    s, ny, nx = images.shape
    return correlation_map(images.reshape(s, -1), nx, ny, weights, "density")


def staggered_field(shot):
    """Coarse-grained local staggered magnetisation of one (ny, nx) image or a stack.

    m_i = (-1)^(col+row) / N_i * sum_j (n_i - n_j) over the N_i nearest neighbours;
    a perfect pattern with excitations on even col+row gives +1 everywhere.
    """
    im = np.asarray(shot, dtype=float)
    single = im.ndim == 2
    if single:
        im = im[None]
    total = np.zeros_like(im)
    nbrs = np.zeros(im.shape[1:])
    for axis, step in ((1, 1), (1, -1), (2, 1), (2, -1)):
        shifted = np.roll(im, step, axis=axis)
        valid = np.ones(im.shape[1:], dtype=bool)
        edge = 0 if step == 1 else -1
        if axis == 1:
            valid[edge, :] = False
        else:
            valid[:, edge] = False
        total += np.where(valid, im - shifted, 0.0)
        nbrs += valid
    if np.any(nbrs == 0):
        raise ValueError("staggered field needs at least a 1x2 grid")
    y, x = np.mgrid[0:im.shape[1], 0:im.shape[2]]
    m = np.where((x + y) % 2 == 0, 1.0, -1.0) * total / nbrs
    return m[0] if single else m


def g2_m(shots, weights=None):
    images = grid_images(shots)
    s, ny, nx = images.shape
    m = staggered_field(images)
    return correlation_map(m.reshape(s, -1), nx, ny, weights, "magnetization")


@dataclass(frozen=True)
class CorrelationFit:
    xi: float
    xi_err: float
    slope: float
    intercept: float
    infinite: bool
    r: np.ndarray
    values: np.ndarray

    def to_dict(self):
        return {"xi": self.xi, "xi_err": self.xi_err, "slope": self.slope, "intercept": self.intercept,
                "infinite": self.infinite, "r": self.r.tolist(), "values": self.values.tolist()}


def _profile(cmap, direction):
    rect = cmap.rectified()
    if direction == "horizontal":
        r = np.arange(cmap.nx)
        return r.astype(float), rect[cmap.ny - 1, cmap.nx - 1:]
    if direction == "vertical":
        r = np.arange(cmap.ny)
        return r.astype(float), rect[cmap.ny - 1:, cmap.nx - 1]
    if direction == "radial":
        k, l = cmap.displacements()
        dist = np.hypot(k, l).ravel()
        vals = rect.ravel()
        weight = cmap.counts.ravel().astype(float)
        bins = np.floor(dist / 0.5 + 1e-9).astype(int)
        r_out, v_out = [], []
        for b in np.unique(bins):
            sel = bins == b
            r_out.append(np.average(dist[sel], weights=weight[sel]))
            v_out.append(np.average(vals[sel], weights=weight[sel]))
        return np.array(r_out), np.array(v_out)
    raise ValueError(f"direction must be horizontal, vertical or radial, got {direction!r}")


def fit_correlation_length(cmap, direction="horizontal", r_min=1.0, r_max=None):
    """Exponential fit of the rectified correlator, log G = c - r / xi.

    The default window is 1 <= r <= L/2 with L the extent along ``direction``
    (the smaller extent for radial fits). Non-positive points are dropped.
    """
    r, v = _profile(cmap, direction)
    if r_max is None:
        extent = {"horizontal": cmap.nx, "vertical": cmap.ny}.get(direction, min(cmap.nx, cmap.ny))
        r_max = extent / 2
    sel = (r >= r_min - 1e-9) & (r <= r_max + 1e-9) & (v > 0)
    r, v = r[sel], v[sel]
    if r.size < 3:
        raise ValueError(f"only {r.size} positive rectified points in the fit window (need 3)")
    A = np.stack([r, np.ones_like(r)], axis=1)
    y = np.log(v)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = y - A @ coef
    dof = r.size - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    slope_err = math.sqrt(s2 * np.linalg.inv(A.T @ A)[0, 0])
    if slope >= -1e-6:
        return CorrelationFit(math.inf, math.inf, slope, intercept, True, r, v)
    xi = -1.0 / slope
    return CorrelationFit(xi, slope_err / slope ** 2, slope, intercept, False, r, v)
