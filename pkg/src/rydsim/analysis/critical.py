"""Critical-point location from the peak of d<n>/dDelta via windowed cubic fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_HALF_WIDTHS = (0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)


class NoPeakError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalPoint:
    delta_c: float  # rad/s
    delta_c_err: float
    omega: float
    windows: list = field(default_factory=list)  # (lo, hi, peak, reduced chi2) in units of omega

    @property
    def ratio(self):
        return self.delta_c / self.omega

    @property
    def ratio_err(self):
        return self.delta_c_err / self.omega

    def to_dict(self):
        return {"delta_c_over_omega": self.ratio, "delta_c_over_omega_err": self.ratio_err,
                "windows": [list(w) for w in self.windows]}


def _cubic_peak(x, y, lo, hi, sigma=None, min_points=5):
    """(peak, reduced chi2) of the cubic fit on [lo, hi], or None without an interior derivative maximum.

    Without ``sigma`` the reduced chi2 is reported as nan.
    """
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < min_points:
        return None
    xs, ys = x[sel], y[sel]
    scale = np.ptp(ys) or 1.0
    coef = np.polyfit(xs, ys, 3)
    a, b = coef[0], coef[1]
    # the derivative 3a x^2 + 2b x + c peaks at -b / 3a when a < 0
    if not a < -1e-9 * scale:
        return None
    peak = -b / (3 * a)
    if not lo < peak < hi:
        return None
    chi2 = np.nan
    if sigma is not None:
        r = (ys - np.polyval(coef, xs)) / sigma[sel]
        chi2 = float(r @ r) / max(1, xs.size - 4)
    return float(peak), chi2


def critical_point(delta, density, omega, half_widths=DEFAULT_HALF_WIDTHS, center_range=(0.0, 2.0),
                   n_iter=8, sigma=None, max_reduced_chi2=2.0):
    """Mean and spread of the susceptibility peak over a family of fit windows.

    Works in x = Delta / omega. The finite-difference maximum inside
    ``center_range`` seeds the centre, with a cubic fit over the whole range
    as the second choice. Half-widths are then taken from widest to narrowest; each window
    starts at the previous window's peak and re-centres on its own fitted peak
    until it stops moving (centres clipped to ``center_range``).

    ``sigma`` (scalar or per point) is the uncertainty of the densities. When
    given, only windows whose cubic fit has reduced chi2 <= ``max_reduced_chi2``
    enter the average.
    """
    x = np.asarray(delta, dtype=float) / omega
    y = np.asarray(density, dtype=float)
    if x.size != y.size or x.size < 10:
        raise ValueError("need at least 10 (delta, density) points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if sigma is not None:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), x.shape)[order]
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
    lo_c, hi_c = center_range

    inside = (x >= lo_c) & (x <= hi_c)
    if not inside.any():
        raise NoPeakError("no data inside the window centre range")
    dydx = np.gradient(y, x)
    seeds = [float(x[inside][np.argmax(dydx[inside])])]
    fit = _cubic_peak(x, y, lo_c, hi_c)
    if fit is not None:
        seeds.append(fit[0])

    windows = []
    for h in sorted(half_widths, reverse=True):
        starts = [min(max(windows[-1][2], lo_c), hi_c)] if windows else seeds
        for c in starts:
            best = None
            for _ in range(n_iter):
                fit = _cubic_peak(x, y, c - h, c + h, sigma)
                if fit is None:
                    break
                best = (c - h, c + h, *fit)
                new_c = min(max(fit[0], lo_c), hi_c)
                if abs(new_c - c) < 1e-9:
                    break
                c = new_c
            if best is not None:
                windows.append(best)
                break
    if not windows:
        raise NoPeakError("no fit window produced an interior susceptibility maximum")
    if sigma is not None:
        windows = [w for w in windows if w[3] <= max_reduced_chi2]
        if not windows:
            raise NoPeakError(f"no fit window reaches reduced chi2 <= {max_reduced_chi2:g}")
    peaks = np.array([w[2] for w in windows])
    err = float(peaks.std(ddof=1)) if peaks.size > 1 else 0.0
    return CriticalPoint(float(peaks.mean()) * omega, err * omega, omega, windows)
