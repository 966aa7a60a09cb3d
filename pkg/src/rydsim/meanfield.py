"""Sublattice mean-field ansatz for striated order, classical energies, and the
single-atom quench model used to read out Bloch vectors.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import brentq, minimize


class PoleError(ValueError):
    """Perturbative expression evaluated at its resonance 4 V(sqrt2 a) = Delta."""


# ---------------------------------------------------------------------------
# classical limit

def classical_energies(v_sqrt2a, v_2a, delta):
    """Energy per site of the perfect checkerboard, star and striated patterns at omega = 0.

    Interactions beyond 2a are neglected. ``boundary`` is the detuning at which
    checkerboard and star are degenerate.
    """
    if v_sqrt2a < 0 or v_2a < 0:
        raise ValueError("interactions must be non-negative")
    return {
        "checkerboard": -delta / 2 + v_sqrt2a + v_2a,
        "star": -delta / 4,
        "striated": -delta / 4 + v_2a / 2,
        "boundary": 4 * (v_sqrt2a + v_2a),
    }


# ---------------------------------------------------------------------------
# variational ansatz

@dataclass(frozen=True)
class SublatticeCouplings:
    """Summed interaction of one A1 site with all A2 sites (``c12``) and with the other A1 sites (``c11``).

    A1 holds sites with even column and even row, A2 those with odd column and
    odd row; the remaining half (B) stays in |g>.
    """

    c12: float
    c11: float

    @classmethod
    def truncated(cls, v_sqrt2a, v_2a):
        """Four diagonal A2 neighbours at sqrt2 a and four A1 neighbours at 2a."""
        return cls(4.0 * v_sqrt2a, 4.0 * v_2a)

    @classmethod
    def all_pairs(cls, v_a, cutoff=60):
        """Lattice sums of v_a / r^6 over the infinite A1 and A2 sublattices."""
        m = np.arange(-cutoff, cutoff + 1)
        i, j = np.meshgrid(m, m, indexing="ij")
        r2_12 = (2 * i + 1.0) ** 2 + (2 * j + 1.0) ** 2
        r2_11 = (2.0 * i) ** 2 + (2.0 * j) ** 2
        r2_11[cutoff, cutoff] = np.inf
        return cls(float(v_a * np.sum(r2_12 ** -3.0)), float(v_a * np.sum(r2_11 ** -3.0)))

    @classmethod
    def from_blockade(cls, rb_over_a, omega, all_pairs=False):
        v_a = omega * rb_over_a ** 6
        return cls.all_pairs(v_a) if all_pairs else cls.truncated(v_a / 8.0, v_a / 64.0)


@dataclass(frozen=True)
class SublatticeAnsatz:
    """Product state cos a|g> + sin a|r> on A1 (angle a1) and A2 (angle a2), B in |g>."""

    a1: float
    a2: float
    energy: float = math.nan
    gradient_norm: float = math.nan

    def __post_init__(self):
        for a in (self.a1, self.a2):
            if not -1e-12 <= a <= math.pi / 2 + 1e-12:
                raise ValueError("mixing angles must lie in [0, pi/2]")

    @property
    def is_striated(self):
        return abs(self.a1 - self.a2) > 1e-4

    def densities(self):
        return math.sin(self.a1) ** 2, math.sin(self.a2) ** 2


def striated_energy(a1, a2, omega, delta, couplings):
    """Mean-field energy per site of the sublattice ansatz.

    The drive phase is chosen so the coherent admixture lowers the energy, so
    the single-site term is -(omega/2) sin 2a for a in [0, pi/2].
    """
    s1, s2 = math.sin(a1) ** 2, math.sin(a2) ** 2
    single = -0.5 * omega * (math.sin(2 * a1) + math.sin(2 * a2)) - delta * (s1 + s2)
    return 0.25 * (single + couplings.c12 * s1 * s2 + 0.5 * couplings.c11 * (s1 * s1 + s2 * s2))


def checkerboard_mean_field_energy(a, omega, delta, couplings):
    return striated_energy(a, a, omega, delta, couplings)


def _pole(v_sqrt2a, delta):
    gap = 4 * v_sqrt2a - delta
    if abs(gap) <= 1e-12 * max(1.0, abs(delta), 4 * v_sqrt2a):
        raise PoleError("4 V(sqrt2 a) equals Delta: perturbative expression diverges")
    return gap


def perturbative_striated_energy(omega, delta, v_sqrt2a, v_2a):
    """Striated energy per site with the dressed sublattice admixture omega / (4 V(sqrt2 a) - Delta),
    as the four-term closed form including the mean-field interaction shift."""
    gap = _pole(v_sqrt2a, delta)
    return -delta / 4 + v_2a / 2 - omega ** 2 / (4 * gap) + omega ** 2 * v_sqrt2a / (2 * gap ** 2)


def second_order_striated_energy(omega, delta, v_sqrt2a, v_2a):
    """O(omega^2) expansion of the ansatz minimum around a1 = pi/2, a2 = 0.

    Both sublattices relax: the dressed A2 sites gain omega^2 / (4 V(sqrt2 a) - Delta)
    and the excited A1 sites omega^2 / (Delta - 4 V(2a)), each weighted by 1/16.
    """
    gap2 = _pole(v_sqrt2a, delta)
    gap1 = delta - 4 * v_2a
    if abs(gap1) <= 1e-12 * max(1.0, abs(delta)):
        raise PoleError("Delta equals 4 V(2a): excited sublattice is unstable")
    return -delta / 4 + v_2a / 2 - omega ** 2 / 16 * (1 / gap2 + 1 / gap1)


def _numeric_gradient(f, x, h=1e-6):
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def minimize_striated(omega, delta, couplings, n_grid=25):
    """Global minimum of the ansatz energy over [0, pi/2]^2.

    A dense grid seeds bounded quasi-Newton refinements from its lowest cells;
    the returned angles are ordered a1 >= a2 (the two sublattices are equivalent).
    """
    scale = max(abs(omega), abs(delta), couplings.c12, couplings.c11, 1e-300)
    f = lambda x: striated_energy(x[0], x[1], omega, delta, couplings) / scale
    grid = np.linspace(0.0, math.pi / 2, n_grid)
    vals = np.array([[f((x, y)) for y in grid] for x in grid])
    seeds = np.argsort(vals, axis=None)[:6]
    bounds = [(0.0, math.pi / 2)] * 2
    best = None
    for s in seeds:
        x0 = np.array([grid[s // n_grid], grid[s % n_grid]])
        res = minimize(f, x0, method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12})
        if best is None or res.fun < best.fun - 1e-14:
            best = res
    x = np.clip(best.x, 0.0, math.pi / 2)
    a1, a2 = max(x), min(x)
    grad = _numeric_gradient(f, np.array([a1, a2]))
    # components pinned at a bound are not expected to vanish
    free = np.array([0.0 < a < math.pi / 2 for a in (a1, a2)])
    return SublatticeAnsatz(float(a1), float(a2), float(f((a1, a2)) * scale),
                            float(np.linalg.norm(grad[free])) if free.any() else 0.0)


def grid_scan_minimum(omega, delta, couplings, n=801):
    """Brute-force grid minimum (cross-check for :func:`minimize_striated`)."""
    a = np.linspace(0.0, math.pi / 2, n)
    a1, a2 = np.meshgrid(a, a, indexing="ij")
    s1, s2 = np.sin(a1) ** 2, np.sin(a2) ** 2
    e = 0.25 * (-0.5 * omega * (np.sin(2 * a1) + np.sin(2 * a2)) - delta * (s1 + s2)
                + couplings.c12 * s1 * s2 + 0.5 * couplings.c11 * (s1 ** 2 + s2 ** 2))
    k = np.unravel_index(np.argmin(e), e.shape)
    return float(a[k[0]]), float(a[k[1]]), float(e[k])


# ---------------------------------------------------------------------------
# quench spectroscopy

@dataclass(frozen=True)
class BlochVector:
    sx: float
    sy: float
    sz: float

    def __post_init__(self):
        if self.norm() > 1 + 1e-9:
            raise ValueError(f"Bloch vector norm {self.norm():.6g} exceeds 1")

    def norm(self):
        return math.sqrt(self.sx ** 2 + self.sy ** 2 + self.sz ** 2)

    def as_array(self):
        return np.array([self.sx, self.sy, self.sz])


@dataclass(frozen=True)
class QuenchModel:
    """Single atom under H = omega (cos phi_q sx + sin phi_q sy)/2 + delta sz/2 for time tau.

    ``delta`` is the detuning from the interaction-shifted resonance in this
    sign convention (sz = +1 is |r>); see :meth:`for_resonance`. Jitter: the
    detuning fluctuates with standard deviation ``delta_jitter_frac * interaction_shift``
    and omega with relative standard deviation ``area_jitter``.
    """

    omega: float
    delta: float
    tau: float
    phi_q: float = 0.0
    interaction_shift: float = 0.0
    delta_jitter_frac: float = 0.15
    area_jitter: float = 0.10

    def __post_init__(self):
        if self.omega < 0 or self.tau < 0:
            raise ValueError("omega and tau must be non-negative")

    @classmethod
    def for_resonance(cls, omega_q, delta_q, tau, n_diagonal, v_sqrt2a, **kw):
        """Model for a site whose ``n_diagonal`` diagonal neighbours are excited.

        The site sees -delta_q n + n_diagonal V(sqrt2 a) n, i.e. an sz coefficient
        of (n_diagonal V(sqrt2 a) - delta_q) / 2.
        """
        shift = n_diagonal * v_sqrt2a
        return cls(omega_q, shift - delta_q, tau, interaction_shift=shift, **kw)

    @property
    def generalized_rabi(self):
        return math.hypot(self.delta, self.omega)

    @property
    def _axis_angle(self):
        # atan2 stays exact where delta / hypot underflows
        return math.atan2(self.omega, self.delta) if (self.omega or self.delta) else math.pi / 2

    @property
    def delta_tilde(self):
        return math.cos(self._axis_angle)

    @property
    def omega_tilde(self):
        return math.sin(self._axis_angle)

    @property
    def alpha(self):
        return 0.5 * self.tau * self.generalized_rabi

    def response_row(self, phi_q=None, jitter=False, n_nodes=16):
        """Coefficients (c_x, c_y, c_z) with <sz'> = c . (sx, sy, sz)."""
        phi = self.phi_q if phi_q is None else phi_q
        if not jitter:
            return _response(self.omega, self.delta, self.tau, phi)
        nodes, weights = hermegauss(n_nodes)
        weights = weights / weights.sum()
        sd_delta = self.delta_jitter_frac * abs(self.interaction_shift)
        d_nodes, d_w = (nodes, weights) if sd_delta > 0 else (np.zeros(1), np.ones(1))
        a_nodes, a_w = (nodes, weights) if self.area_jitter > 0 else (np.zeros(1), np.ones(1))
        out = np.zeros(3)
        for xd, wd in zip(d_nodes, d_w):
            for xa, wa in zip(a_nodes, a_w):
                om = max(0.0, self.omega * (1 + self.area_jitter * xa))
                out += wd * wa * _response(om, self.delta + sd_delta * xd, self.tau, phi)
        return out


def _response(omega, delta, tau, phi):
    w = math.hypot(delta, omega)
    if w == 0.0:
        return np.array([0.0, 0.0, 1.0])
    dt, ot = delta / w, omega / w
    alpha = 0.5 * tau * w
    s2a, sa2 = math.sin(2 * alpha), math.sin(alpha) ** 2
    cp, sp = math.cos(phi), math.sin(phi)
    return np.array([
        -ot * s2a * sp + 2 * dt * ot * sa2 * cp,
        ot * s2a * cp + 2 * dt * ot * sa2 * sp,
        math.cos(alpha) ** 2 - (1 - 2 * dt * dt) * sa2,
    ])


def _as_vec(bloch):
    return bloch.as_array() if isinstance(bloch, BlochVector) else np.asarray(bloch, dtype=float)


def quench_sigma_z(model, bloch_in, phi_q=None, jitter=False, n_nodes=16):
    """Expected sz after the quench, optionally averaged over detuning and pulse-area jitter."""
    return float(model.response_row(phi_q, jitter, n_nodes) @ _as_vec(bloch_in))


@dataclass(frozen=True)
class BlochFit:
    bloch: BlochVector
    errors: np.ndarray
    residual: float  # rms of the sigma_z residuals
    flagged: bool
    constrained: bool

    def to_dict(self):
        return {"sx": self.bloch.sx, "sy": self.bloch.sy, "sz": self.bloch.sz,
                "errs": [float(e) for e in self.errors], "residual": self.residual,
                "residual_flag": self.flagged, "norm_constrained": self.constrained}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def fit_bloch(phi_values, p_values, model, p_errors=None, jitter=False, residual_threshold=0.1):
    """Least-squares Bloch vector from excitation probabilities P(phi_q) = (1 + <sz'>)/2.

    The fit is linear in (sx, sy, sz); when the unconstrained optimum leaves the
    unit ball, the norm-constrained optimum on the sphere is returned instead.
    Errors come from the linearised covariance, scaled by the residual variance
    when ``p_errors`` is not given.
    """
    phi = np.asarray(phi_values, dtype=float)
    p = np.asarray(p_values, dtype=float)
    if phi.shape != p.shape:
        raise ValueError("phi_values and p_values must have equal length")
    if np.unique(np.round(phi % (2 * math.pi), 12)).size < 6:
        raise ValueError("need at least 6 distinct phi_q points")
    A = np.array([model.response_row(ph, jitter) for ph in phi])
    b = 2.0 * p - 1.0
    if p_errors is not None:
        sig = 2.0 * np.asarray(p_errors, dtype=float)
        if np.any(sig <= 0):
            raise ValueError("p_errors must be positive")
    else:
        sig = np.ones_like(b)
    Aw, bw = A / sig[:, None], b / sig
    if np.linalg.matrix_rank(Aw, tol=1e-10 * max(1.0, np.abs(Aw).max())) < 3:
        raise ValueError("quench response is degenerate: Bloch components are underdetermined")
    ata, atb = Aw.T @ Aw, Aw.T @ bw
    s = np.linalg.solve(ata, atb)
    constrained = False
    if np.linalg.norm(s) > 1.0:
        constrained = True
        g = lambda lam: np.linalg.norm(np.linalg.solve(ata + lam * np.eye(3), atb)) - 1.0
        hi = 1.0
        while g(hi) > 0:
            hi *= 4.0
        s = np.linalg.solve(ata + brentq(g, 0.0, hi, xtol=1e-14) * np.eye(3), atb)
        s /= max(1.0, np.linalg.norm(s))
    resid = b - A @ s
    dof = max(1, b.size - 3)
    cov = np.linalg.inv(ata)
    if p_errors is None:
        cov = cov * float(resid @ resid) / dof
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return BlochFit(BlochVector(*map(float, s)), np.sqrt(np.diag(cov)), rms, rms > residual_threshold, constrained)
