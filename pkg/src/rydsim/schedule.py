"""Drive schedules: linear sweeps, cubic-spline quasi-adiabatic sweeps and quenches."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .hamiltonian import DriveParams
from .units import FREQUENCY_UNITS, TIME_UNITS

_T_EPS = 1e-12


class ScheduleRangeError(ValueError):
    pass


@dataclass(frozen=True)
class LinearSweep:
    """Delta(t) = delta_start + rate_s * t at constant omega, then an optional
    linear omega ramp to zero over ``end_ramp_time`` at fixed ``delta_end``.
    """

    delta_start: float
    delta_end: float
    rate_s: float
    omega: float
    end_ramp_time: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.sweep_time > 0:
            raise ValueError("linear sweep needs (delta_end - delta_start) / rate_s > 0")
        if self.end_ramp_time < 0:
            raise ValueError("end_ramp_time must be >= 0")

    @property
    def sweep_time(self):
        return (self.delta_end - self.delta_start) / self.rate_s

    @property
    def duration(self):
        return self.sweep_time + self.end_ramp_time

    def truncated(self, delta_stop):
        """Same sweep stopped early at ``delta_stop`` (variable-endpoint sweeps)."""
        return LinearSweep(self.delta_start, delta_stop, self.rate_s, self.omega, self.end_ramp_time, self.phi)

    def breakpoints(self):
        return (self.sweep_time,)

    def time_at(self, delta):
        return (delta - self.delta_start) / self.rate_s

    def _eval(self, t):
        ts = self.sweep_time
        if t <= ts:
            return DriveParams(self.omega, self.delta_start + self.rate_s * t, self.phi)
        frac = (t - ts) / self.end_ramp_time
        return DriveParams(max(0.0, self.omega * (1.0 - frac)), self.delta_end, self.phi)


@dataclass(frozen=True)
class SplineSweep:
    """Natural cubic spline through five (t, Delta) control points, with linear
    omega ramps of length ``omega_ramp_time`` before and after at the end detunings.

    Control times are measured from the start of the spline section; the schedule
    clock includes the leading ramp, see :meth:`control_times`.
    """

    control_t: tuple
    control_delta: tuple
    omega: float
    omega_ramp_time: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.control_t, dtype=float)
        if t.size != 5 or len(self.control_delta) != 5:
            raise ValueError("spline sweep needs exactly five control points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("control times must be strictly increasing")
        if self.omega_ramp_time < 0:
            raise ValueError("omega_ramp_time must be >= 0")
        object.__setattr__(self, "control_t", tuple(float(v) for v in self.control_t))
        object.__setattr__(self, "control_delta", tuple(float(v) for v in self.control_delta))

    @cached_property
    def spline(self):
        t = np.asarray(self.control_t) - self.control_t[0]
        return CubicSpline(t, np.asarray(self.control_delta), bc_type="natural")

    @property
    def spline_time(self):
        return self.control_t[-1] - self.control_t[0]

    @property
    def duration(self):
        return self.spline_time + 2 * self.omega_ramp_time

    def breakpoints(self):
        return (self.omega_ramp_time, self.omega_ramp_time + self.spline_time)

    def control_times(self):
        return tuple(self.omega_ramp_time + t - self.control_t[0] for t in self.control_t)

    def _eval(self, t):
        tr = self.omega_ramp_time
        if t < tr:
            return DriveParams(self.omega * t / tr, self.control_delta[0], self.phi)
        ts = t - tr
        if ts <= self.spline_time:
            return DriveParams(self.omega, float(self.spline(ts)), self.phi)
        frac = (ts - self.spline_time) / tr
        return DriveParams(max(0.0, self.omega * (1.0 - frac)), self.control_delta[-1], self.phi)


@dataclass(frozen=True)
class Quench:
    omega_q: float
    delta_q: float
    phi_q: float
    t_q: float

    def __post_init__(self):
        if self.t_q < 0:
            raise ValueError("t_q must be >= 0")
        if self.omega_q > 0 and self.t_q * self.omega_q >= 1.0:
            warnings.warn(f"quench time t_q={self.t_q:g} s is not shorter than 1/omega_q", stacklevel=3)

    is_constant = True

    @property
    def duration(self):
        return self.t_q

    def breakpoints(self):
        return ()

    def _eval(self, t):
        return DriveParams(self.omega_q, self.delta_q, self.phi_q)


SCHEDULE_TYPES = {"linear_sweep": LinearSweep, "spline_sweep": SplineSweep, "quench": Quench}
_TYPE_NAMES = {v: k for k, v in SCHEDULE_TYPES.items()}

# field name -> dimension, for unit conversion on (de)serialisation
_FIELD_DIMS = {
    "delta_start": "f", "delta_end": "f", "rate_s": "f/t", "omega": "f", "end_ramp_time": "t",
    "control_t": "t", "control_delta": "f", "omega_ramp_time": "t",
    "omega_q": "f", "delta_q": "f", "t_q": "t", "phi": "", "phi_q": "",
}


def schedule_eval(schedule, t):
    if t < -_T_EPS * max(1.0, schedule.duration) or t > schedule.duration * (1 + 1e-12) + _T_EPS:
        raise ScheduleRangeError(f"t={t:g} s outside [0, {schedule.duration:g}] s")
    return schedule._eval(min(max(t, 0.0), schedule.duration))


def _scale(dim, fu, tu):
    return {"f": fu, "t": tu, "f/t": fu / tu, "": 1.0}[dim]


def schedule_to_dict(schedule, frequency_unit="MHz", time_unit="us"):
    fu, tu = FREQUENCY_UNITS[frequency_unit], TIME_UNITS[time_unit]
    out = {"kind": _TYPE_NAMES[type(schedule)], "units": {"frequency": frequency_unit, "time": time_unit}}
    for name, value in asdict(schedule).items():
        s = _scale(_FIELD_DIMS[name], fu, tu)
        out[name] = [v / s for v in value] if isinstance(value, (tuple, list)) else value / s
    return out


def schedule_from_dict(data):
    data = dict(data)
    kind = data.pop("kind")
    if kind not in SCHEDULE_TYPES:
        raise ValueError(f"unknown schedule kind {kind!r}")
    units = data.pop("units", {"frequency": "MHz", "time": "us"})
    fu, tu = FREQUENCY_UNITS[units.get("frequency", "MHz")], TIME_UNITS[units.get("time", "us")]
    kwargs = {}
    for name, value in data.items():
        if name not in _FIELD_DIMS:
            raise ValueError(f"unknown schedule field {name!r}")
        s = _scale(_FIELD_DIMS[name], fu, tu)
        kwargs[name] = tuple(v * s for v in value) if isinstance(value, (tuple, list)) else value * s
    return SCHEDULE_TYPES[kind](**kwargs)


def schedule_to_json(schedule, **kw):
    return json.dumps(schedule_to_dict(schedule, **kw), sort_keys=True)


def schedule_from_json(text):
    return schedule_from_dict(json.loads(text))


def schedule_hash(schedule):
    return hashlib.sha256(schedule_to_json(schedule, frequency_unit="rad/s", time_unit="s").encode()).hexdigest()[:16]
