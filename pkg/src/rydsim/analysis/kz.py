"""Kibble-Zurek rescaling of correlation-length growth curves and the collapse distance."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

NU_GRID = (0.3, 1.2, 0.005)


def kz_exponents(nu, z=1.0):
    """(mu, kappa) = (nu / (1 + z nu), -1 / (1 + z nu))."""
    return nu / (1 + z * nu), -1.0 / (1 + z * nu)


@dataclass
class CollapseCurves:
    """Correlation-length curves xi(Delta) at several sweep rates."""

    rates: list
    deltas: list
    xis: list
    s0: float
    xi_errs: list | None = None
    z: float = 1.0
    nu: float | None = None
    delta_c: float | None = None

    def __post_init__(self):
        self.rates = [float(s) for s in self.rates]
        self.deltas = [np.asarray(d, dtype=float) for d in self.deltas]
        self.xis = [np.asarray(x, dtype=float) for x in self.xis]
        if not (len(self.rates) == len(self.deltas) == len(self.xis)):
            raise ValueError("rates, deltas and xis must have equal length")
        if any(s <= 0 for s in self.rates) or self.s0 <= 0:
            raise ValueError("sweep rates must be positive")
        for d, x in zip(self.deltas, self.xis):
            if d.shape != x.shape:
                raise ValueError("each delta series needs a matching xi series")
            if np.any(np.diff(d) <= 0):
                raise ValueError("delta must be strictly increasing within a curve")

    def subset(self, index_sets):
        """Copy keeping only the given point indices of each curve."""
        return CollapseCurves(self.rates, [d[i] for d, i in zip(self.deltas, index_sets)],
                              [x[i] for x, i in zip(self.xis, index_sets)], self.s0, None, self.z, self.nu,
                              self.delta_c)


@dataclass(frozen=True)
class RescaledCurve:
    rate: float
    delta: np.ndarray
    xi: np.ndarray


def kz_rescale(curves, nu=None, delta_c=None, exponents=None):
    """xi~ = xi (s/s0)^mu and Delta~ = (Delta - Delta_c)(s/s0)^kappa.

    ``exponents=(mu, kappa)`` overrides the values derived from ``nu`` and ``z``.
    """
    delta_c = curves.delta_c if delta_c is None else delta_c
    if delta_c is None:
        raise ValueError("delta_c is required")
    if exponents is None:
        nu = curves.nu if nu is None else nu
        if nu is None:
            raise ValueError("nu or explicit exponents are required")
        exponents = kz_exponents(nu, curves.z)
    mu, kappa = exponents
    out = []
    for s, d, x in zip(curves.rates, curves.deltas, curves.xis):
        r = s / curves.s0
        out.append(RescaledCurve(s, (d - delta_c) * r ** kappa, x * r ** mu))
    return out


def collapse_distance(rescaled):
    """RMS of |xi~_j^(i') - f^(i)(Delta~_j^(i'))| over ordered pairs i != i'.

    ``f^(i)`` is the linear interpolant of curve i, and only points inside the
    common overlap of all curves enter the sum.
    """
    if len(rescaled) < 2:
        raise ValueError("collapse distance needs at least 2 curves")
    lo = max(c.delta.min() for c in rescaled)
    hi = min(c.delta.max() for c in rescaled)
    if lo > hi:
        raise ValueError("rescaled curves have no common overlap domain")
    total, n = 0.0, 0
    for i, ci in enumerate(rescaled):
        for ip, cp in enumerate(rescaled):
            if i == ip:
                continue
            sel = (cp.delta >= lo) & (cp.delta <= hi)
            diff = cp.xi[sel] - np.interp(cp.delta[sel], ci.delta, ci.xi)
            total += float(diff @ diff)
            n += int(sel.sum())
    if n == 0:
        raise ValueError("no data points inside the overlap domain")
    return math.sqrt(total / n)


@dataclass
class NuFit:
    nu: float
    nu_err: float
    delta_c: float
    d_min: float
    curvature_err: float
    delta_c_err_contrib: float
    nus: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"nu": self.nu, "nu_err": self.nu_err, "delta_c": self.delta_c, "D_min": self.d_min}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _scan(curves, delta_c, nus):
    d = np.empty(nus.size)
    for k, nu in enumerate(nus):
        try:
            d[k] = collapse_distance(kz_rescale(curves, nu, delta_c))
        except ValueError:
            d[k] = np.inf
    return d


def _argmin_nu(nus, d):
    k = int(np.argmin(d))
    if not np.isfinite(d[k]):
        raise ValueError("no nu on the grid gives an overlapping collapse")
    return k


def fit_nu(curves, delta_c, z=None, delta_c_err=0.0, grid=NU_GRID):
    """Grid scan of nu minimising the collapse distance.

    The uncertainty combines the local curvature of D(nu) around the minimum
    with the shift of the argmin when delta_c moves by +-delta_c_err.
    """
    if z is not None:
        curves = CollapseCurves(curves.rates, curves.deltas, curves.xis, curves.s0, curves.xi_errs, z,
                                curves.nu, curves.delta_c)
    lo, hi, step = grid
    nus = np.round(np.arange(lo, hi + step / 2, step), 10)
    d = _scan(curves, delta_c, nus)
    k = _argmin_nu(nus, d)
    nu_best, d_min = float(nus[k]), float(d[k])

    curv_err = 0.0
    if 0 < k < nus.size - 1 and np.all(np.isfinite(d[k - 1:k + 2])):
        d2 = (d[k + 1] - 2 * d[k] + d[k - 1]) / step ** 2
        if d2 > 0:
            curv_err = math.sqrt(d_min / d2)

    dc_err = 0.0
    if delta_c_err > 0:
        shifted = []
        for sign in (-1, 1):
            ds = _scan(curves, delta_c + sign * delta_c_err, nus)
            shifted.append(float(nus[_argmin_nu(nus, ds)]))
        dc_err = 0.5 * abs(shifted[1] - shifted[0])
    return NuFit(nu_best, math.hypot(curv_err, dc_err), float(delta_c), d_min, curv_err, dc_err, nus, d)


def softplus_scaling(u):
    """Default universal function for synthetic families: smooth, positive and growing."""
    return 1.0 + np.logaddexp(0.0, 1.5 * u)


def synthetic_family(nu, rates, s0, delta_c, deltas, z=1.0, scaling=softplus_scaling):
    """Exact scaling family xi = (s/s0)^-mu Phi((Delta - Delta_c)(s/s0)^kappa)."""
    mu, kappa = kz_exponents(nu, z)
    deltas = np.asarray(deltas, dtype=float)
    xis = []
    for s in rates:
        r = s / s0
        xis.append(r ** -mu * scaling((deltas - delta_c) * r ** kappa))
    return CollapseCurves(list(rates), [deltas.copy() for _ in rates], xis, s0, None, z, None, delta_c)
