"""Time evolution under drive schedules, ground states, and static observables."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .hilbert import StateVector
from .schedule import schedule_eval

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvolveOptions:
    substep_dt: float | None = None  # default: duration / 2000, one step for constant schedules
    krylov_dim: int = 16
    norm_tol: float = 1e-9
    method: str = "krylov_expm"
    rk4_max_phase: float = 0.02  # rk4 micro-step bound on |H| h

    def __post_init__(self):
        if self.substep_dt is not None and not self.substep_dt > 0:
            raise ValueError("substep_dt must be positive")
        if self.krylov_dim < 2:
            raise ValueError("krylov_dim must be >= 2")
        if self.method not in ("krylov_expm", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")


def krylov_expm_step(matvec, v, dt, m_max=16, tol=1e-13, _depth=0):
    """exp(-i H dt) v by Lanczos projection with full re-orthogonalisation.

    Falls back to halving ``dt`` when the subspace of size ``m_max`` does not
    meet the a-posteriori error estimate.
    """
    beta = np.linalg.norm(v)
    if beta == 0.0:
        return v.copy()
    n = v.size
    m_max = min(m_max, n)
    basis = np.empty((m_max + 1, n), dtype=complex)
    basis[0] = v / beta
    alphas, betas = [], []
    for j in range(m_max):
        w = matvec(basis[j])
        a = np.vdot(basis[j], w).real
        w = w - a * basis[j]
        if j:
            w -= betas[-1] * basis[j - 1]
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        alphas.append(a)
        if len(alphas) == 1:
            evals, evecs = np.array(alphas), np.ones((1, 1))
        else:
            evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
        coeffs = evecs @ (np.exp(-1j * dt * evals) * evecs[0])
        err = b * dt * abs(coeffs[-1])
        if err < tol or b < 1e-12 * max(1.0, abs(a)) or j + 1 == n:
            return beta * (basis[: j + 1].T @ coeffs)
        betas.append(b)
        basis[j + 1] = w / b
    if _depth > 30:
        raise IntegrationError("Krylov step failed to converge; reduce substep_dt")
    half = krylov_expm_step(matvec, v, dt / 2, m_max, tol, _depth + 1)
    return krylov_expm_step(matvec, half, dt / 2, m_max, tol, _depth + 1)


def _rk4_step(matvec, v, dt, hnorm, max_phase):
    n_micro = max(1, math.ceil(hnorm * dt / max_phase))
    h = dt / n_micro
    f = lambda x: -1j * matvec(x)
    for _ in range(n_micro):
        k1 = f(v)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


def _time_grid(schedule, snapshot_times, substep_dt):
    total = schedule.duration
    n = max(1, math.ceil(total / substep_dt - 1e-9))
    pts = set(np.linspace(0.0, total, n + 1).tolist())
    pts.update(t for t in schedule.breakpoints() if 0.0 < t < total)
    pts.update(snapshot_times)
    grid = np.array(sorted(pts))
    keep = np.concatenate([[True], np.diff(grid) > 1e-9 * max(total, 1e-300)])
    grid = grid[keep]
    for t in snapshot_times:
        grid[np.argmin(np.abs(grid - t))] = t
    return grid


def evolve_snapshots(state, op, schedule, times, options=None):
    """Evolve from t=0 and return the normalised state at each requested time."""
    options = options or EvolveOptions()
    if not state.basis.same_as(op.basis):
        raise ValueError("state and operator use different bases")
    norm0 = state.norm()
    if abs(norm0 - 1.0) > 1e-8:
        raise ValueError(f"input state is not normalised (norm {norm0:.12g})")
    times = sorted(float(t) for t in times)
    if times and (times[0] < 0 or times[-1] > schedule.duration * (1 + 1e-12)):
        raise ValueError("snapshot times must lie within the schedule")
    total = schedule.duration
    substep = options.substep_dt
    if substep is None:
        # a constant H needs no time grid; the Krylov step splits itself when needed
        substep = total if getattr(schedule, "is_constant", False) and total > 0 else (total / 2000.0 or 1.0)

    psi = state.amplitudes.astype(complex)
    out = []
    pending = list(times)
    while pending and pending[0] <= 0.0:
        out.append(StateVector(op.basis, psi.copy(), {"t": 0.0, "norm_drift": 0.0}))
        pending.pop(0)
    if total > 0 and pending:
        grid = _time_grid(schedule, pending, substep)
        for t0, t1 in zip(grid[:-1], grid[1:]):
            if t0 >= pending[-1]:
                break
            params = schedule_eval(schedule, 0.5 * (t0 + t1))
            matvec = op.bind(params)
            dt = t1 - t0
            if options.method == "krylov_expm":
                psi = krylov_expm_step(matvec, psi, dt, options.krylov_dim)
            else:
                psi = _rk4_step(matvec, psi, dt, op.norm_bound(params), options.rk4_max_phase)
            while pending and abs(t1 - pending[0]) <= 1e-9 * max(total, 1e-300):
                drift = abs(np.linalg.norm(psi) - 1.0)
                if drift > 1e-6:
                    raise IntegrationError(
                        f"norm drift {drift:.3g} at t={t1:.4g} s exceeds 1e-6; reduce substep_dt")
                log.debug("snapshot t=%g norm drift %.3g", t1, drift)
                out.append(StateVector(op.basis, psi / np.linalg.norm(psi), {"t": float(t1), "norm_drift": float(drift)}))
                pending.pop(0)
    return out


def evolve(state, op, schedule, options=None):
    """Propagate over the full schedule with a piecewise-constant H per substep.

    The Hamiltonian of each substep is evaluated at its midpoint. The output is
    renormalised; the pre-normalisation drift is stored in ``meta["norm_drift"]``.
    """
    return evolve_snapshots(state, op, schedule, [schedule.duration], options)[-1]


@dataclass
class GroundStateResult:
    energy: float
    state: StateVector
    residual: float
    gap: float
    degeneracy: int
    n_matvecs: int

    @property
    def degenerate(self):
        return self.degeneracy > 1


def _thick_restart_lanczos(matvec, v0, n_keep, m, tol_fn, max_matvecs):
    n = v0.size
    m = min(m, n)
    n_keep = min(n_keep, m - 1) if m > 1 else 1
    dtype = v0.dtype
    V = np.zeros((m, n), dtype=dtype)
    W = np.zeros((m, n), dtype=dtype)
    V[0] = v0 / np.linalg.norm(v0)
    W[0] = matvec(V[0])
    nv, n_mv = 1, 1
    while True:
        exhausted = False
        while nv < m:
            r = W[nv - 1] - V[:nv].T @ (V[:nv].conj() @ W[nv - 1])
            r -= V[:nv].T @ (V[:nv].conj() @ r)
            b = np.linalg.norm(r)
            if b < 1e-12 * max(1.0, np.linalg.norm(W[nv - 1])):
                exhausted = True
                break
            V[nv] = r / b
            W[nv] = matvec(V[nv])
            nv += 1
            n_mv += 1
        T = V[:nv].conj() @ W[:nv].T
        T = 0.5 * (T + T.conj().T)
        theta, S = eigh(T)
        kk = min(n_keep, nv)
        Y = S[:, :kk].T @ V[:nv]
        HY = S[:, :kk].T @ W[:nv]
        R = HY - theta[:kk, None] * Y
        res = np.linalg.norm(R, axis=1)
        if res[0] < tol_fn(theta[0]) or exhausted or nv == n:
            return theta[:kk], Y, res, n_mv
        if n_mv >= max_matvecs:
            raise ConvergenceError(f"Lanczos did not converge in {n_mv} matvecs (residual {res[0]:.3g})")
        V[:kk], W[:kk] = Y, HY
        r = R[0] - V[:kk].T @ (V[:kk].conj() @ R[0])
        r -= V[:kk].T @ (V[:kk].conj() @ r)
        V[kk] = r / np.linalg.norm(r)
        W[kk] = matvec(V[kk])
        nv = kk + 1
        n_mv += 1


def ground_state(op, params, seed=0, krylov_size=40, n_keep=4, max_matvecs=50_000, gap_tol=1e-10):
    """Lowest eigenpair by thick-restart Lanczos from a seeded random start vector.

    At omega = 0 the Hamiltonian is diagonal; the returned state is then the
    seeded start vector projected onto the (possibly degenerate) ground space,
    which is what an exact Krylov iteration would converge to.
    """
    n = op.size
    rng = np.random.default_rng(seed)
    real = params.is_real
    v0 = rng.standard_normal(n)
    if not real:
        v0 = v0 + 1j * rng.standard_normal(n)
    hnorm = op.norm_bound(params)
    gap_abs = gap_tol * max(1.0, hnorm)

    if params.omega == 0.0:
        diag = op.diagonal(params)
        e0 = diag.min()
        ground = np.abs(diag - e0) <= gap_abs
        amps = np.where(ground, v0, 0.0).astype(complex)
        amps /= np.linalg.norm(amps)
        excited = diag[~ground]
        gap = float(excited.min() - e0) if excited.size else math.inf
        return GroundStateResult(float(e0), StateVector(op.basis, amps), 0.0, gap, int(ground.sum()), 0)

    matvec = op.bind(params)
    tol_fn = lambda e: max(1e-10 * max(1.0, abs(e)), 1e-14 * hnorm)
    theta, Y, res, n_mv = _thick_restart_lanczos(matvec, v0, n_keep, krylov_size, tol_fn, max_matvecs)
    psi = Y[0] / np.linalg.norm(Y[0])
    # fix the global phase so the largest amplitude is real positive
    k = np.argmax(np.abs(psi))
    psi = psi * (abs(psi[k]) / psi[k])
    gaps = theta[1:] - theta[0]
    degeneracy = 1 + int(np.sum(gaps < gap_abs))
    gap = float(gaps[0]) if gaps.size else math.inf
    return GroundStateResult(float(theta[0]), StateVector(op.basis, psi.astype(complex)), float(res[0]), gap,
                             degeneracy, n_mv)


def site_densities(state):
    """<n_i> for every site."""
    p = state.probabilities()
    cfg = state.basis.configs
    return np.array([p[((cfg >> np.uint64(i)) & np.uint64(1)).astype(bool)].sum()
                     for i in range(state.basis.n_sites)])


def mean_density(state):
    return float(site_densities(state).mean())
