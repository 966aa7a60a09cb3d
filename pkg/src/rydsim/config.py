"""Validated experiment configurations for the command-line front end.

Frequencies are given in MHz (meaning 2 pi x 10^6 rad/s) and times in us.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import units
from .lattice import build_lattice, interaction_matrix, v0_for_blockade
from .measure import DETECTION_PRESETS, DetectionModel
from .schedule import LinearSweep, SplineSweep


class ConfigError(ValueError):
    pass


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeSpec(Strict):
    kind: Literal["square", "honeycomb", "triangular"] = "square"
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    spacing_um: float = Field(6.7, gt=0)
    truncation_sites: float | None = Field(2.0, ge=1.0)  # None keeps all pairs

    def build(self):
        return build_lattice(self.kind, self.nx, self.ny, 1.0)

    def interactions(self, v0):
        lat = self.build()
        return lat, interaction_matrix(lat, v0, float("inf") if self.truncation_sites is None
                                       else self.truncation_sites)


class InteractionSpec(Strict):
    """Either the blockade radius relative to a reference Rabi frequency, or V(a) directly."""

    rb_over_a: float | None = Field(None, gt=0)
    omega_ref_mhz: float | None = Field(None, gt=0)
    v_a_mhz: float | None = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.rb_over_a is None) == (self.v_a_mhz is None):
            raise ValueError("give exactly one of rb_over_a or v_a_mhz")
        return self

    def v0(self, omega_rad):
        """V(a) in rad/s for unit lattice spacing."""
        if self.v_a_mhz is not None:
            return units.mhz(self.v_a_mhz)
        ref = units.mhz(self.omega_ref_mhz) if self.omega_ref_mhz is not None else omega_rad
        if not ref > 0:
            raise ConfigError("rb_over_a needs a positive Rabi frequency (set omega_ref_mhz)")
        return v0_for_blockade(self.rb_over_a, ref)


class LinearSweepSpec(Strict):
    kind: Literal["linear_sweep"]
    delta_start_mhz: float
    delta_end_mhz: float
    rate_mhz_per_us: float = Field(gt=0)
    omega_mhz: float = Field(ge=0)
    end_ramp_time_us: float = Field(0.0, ge=0)
    phi: float = 0.0

    def build(self):
        return LinearSweep(units.mhz(self.delta_start_mhz), units.mhz(self.delta_end_mhz),
                           units.mhz_per_us(self.rate_mhz_per_us), units.mhz(self.omega_mhz),
                           units.us(self.end_ramp_time_us), self.phi)


class SplineSweepSpec(Strict):
    kind: Literal["spline_sweep"]
    control_t_us: list[float] = Field(min_length=5, max_length=5)
    control_delta_mhz: list[float] = Field(min_length=5, max_length=5)
    omega_mhz: float = Field(ge=0)
    omega_ramp_time_us: float = Field(0.0, ge=0)
    phi: float = 0.0

    def build(self):
        return SplineSweep(tuple(units.us(t) for t in self.control_t_us),
                           tuple(units.mhz(d) for d in self.control_delta_mhz), units.mhz(self.omega_mhz),
                           units.us(self.omega_ramp_time_us), self.phi)


ScheduleSpec = Annotated[Union[LinearSweepSpec, SplineSweepSpec], Field(discriminator="kind")]


class NoiseSpec(Strict):
    preset: Literal["ideal", "microwave", "no_microwave"] | None = "microwave"
    p_g_loss: float | None = Field(None, ge=0, lt=1)
    p_r_recapture: float | None = Field(None, ge=0, lt=1)

    def build(self):
        base = DETECTION_PRESETS[self.preset]() if self.preset else DetectionModel.ideal()
        return DetectionModel(base.p_g_loss if self.p_g_loss is None else self.p_g_loss,
                              base.p_r_recapture if self.p_r_recapture is None else self.p_r_recapture)


class EvolveSpec(Strict):
    substep_dt_us: float | None = Field(None, gt=0)
    krylov_dim: int = Field(16, ge=2)
    method: Literal["krylov_expm", "rk4"] = "krylov_expm"

    def build(self):
        from .evolve import EvolveOptions

        dt = units.us(self.substep_dt_us) if self.substep_dt_us is not None else None
        return EvolveOptions(substep_dt=dt, krylov_dim=self.krylov_dim, method=self.method)


class FitSpec(Strict):
    directions: list[Literal["horizontal", "vertical", "radial"]] = ["horizontal", "vertical"]
    r_min: float = Field(1.0, ge=0)
    r_max: float | None = Field(None, gt=0)


class SweepConfig(Strict):
    lattice: LatticeSpec
    basis: Literal["full", "nn_blockade"] = "full"
    interaction: InteractionSpec
    schedule: ScheduleSpec
    shots: int = Field(10_000, ge=1)
    seed: int = 0
    noise: NoiseSpec = NoiseSpec()
    evolve: EvolveSpec = EvolveSpec()
    fit: FitSpec = FitSpec()


class Axis(Strict):
    start: float
    stop: float
    num: int = Field(ge=0)

    def values(self):
        import numpy as np

        return np.linspace(self.start, self.stop, self.num) if self.num else np.zeros(0)


class PhaseDiagramConfig(Strict):
    lattice: LatticeSpec
    basis: Literal["full", "nn_blockade"] = "nn_blockade"
    omega_mhz: float = Field(gt=0)
    rb_over_a: Axis
    delta_over_omega: Axis
    seed: int = 0

    @model_validator(mode="after")
    def _non_empty(self):
        if self.rb_over_a.num == 0 or self.delta_over_omega.num == 0:
            raise ValueError("phase-diagram raster is empty")
        return self


class SyntheticKZ(Strict):
    kind: Literal["synthetic"]
    nu: float = Field(gt=0)
    delta_c_over_omega: float = 1.12
    delta_over_omega: Axis
    rates: list[float] = Field(min_length=2)
    s0: float = Field(gt=0)


class SimulatedKZ(Strict):
    kind: Literal["simulate"]
    lattice: LatticeSpec
    basis: Literal["full", "nn_blockade"] = "nn_blockade"
    interaction: InteractionSpec
    omega_mhz: float = Field(gt=0)
    delta_start_mhz: float
    endpoints_delta_over_omega: list[float] = Field(min_length=5)
    rates_mhz_per_us: list[float] = Field(min_length=2)
    s0_mhz_per_us: float | None = Field(None, gt=0)
    delta_c_over_omega: float | None = None
    delta_c_err_over_omega: float = Field(0.0, ge=0)
    critical_scan: Axis = Axis(start=-1.0, stop=3.0, num=41)
    correlator: Literal["magnetization", "density"] = "magnetization"
    fit: FitSpec = FitSpec()
    evolve: EvolveSpec = EvolveSpec()


class KZConfig(Strict):
    source: Annotated[Union[SyntheticKZ, SimulatedKZ], Field(discriminator="kind")]
    z: float = Field(1.0, gt=0)
    nu_grid: tuple[float, float, float] = (0.3, 1.2, 0.005)
    seed: int = 0


class QuenchSpec(Strict):
    omega_q_mhz: float = Field(ge=0)
    t_q_us: float = Field(ge=0)
    delta_q_mhz: list[float] = Field(min_length=1)
    phi_q: list[float] = Field(min_length=1)
    delta_scan_phi_q: float = 0.0
    phi_scan_delta_q_mhz: dict[int, float] = {}  # d -> quench detuning for the phase scan
    conditions: list[int] = [0, 4]
    jitter: bool = True


class QuenchConfig(Strict):
    lattice: LatticeSpec
    basis: Literal["full", "nn_blockade"] = "nn_blockade"
    interaction: InteractionSpec
    schedule: ScheduleSpec
    quench: QuenchSpec
    shots: int | None = Field(None, ge=1)  # None: exact expectations
    seed: int = 0
    noise: NoiseSpec = NoiseSpec(preset="ideal")
    evolve: EvolveSpec = EvolveSpec()

    @model_validator(mode="after")
    def _conditions(self):
        if any(d not in range(5) for d in self.quench.conditions):
            raise ValueError("quench.conditions entries must be in 0..4")
        return self


class CostSpec(Strict):
    pickup_ms: float = Field(0.030, gt=0)
    speed_um_per_ms: float = Field(75.0, gt=0)
    site_pitch_um: float = Field(6.7, gt=0)
    background_lifetime_s: float | None = Field(10.0, gt=0)


class RearrangeConfig(Strict):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    load_probability: float = Field(ge=0, le=1)
    target_height: int = Field(ge=1)
    target_width: int | None = Field(None, ge=1)
    n_instances: int = Field(1, ge=1)
    two_rounds: bool = False
    seed: int = 0
    cost: CostSpec = CostSpec()
    export_plans: int = Field(1, ge=0)

    @model_validator(mode="after")
    def _fits(self):
        if self.target_height > self.rows or (self.target_width or self.target_height) > self.cols:
            raise ValueError("target block larger than the grid")
        return self


COMMAND_MODELS = {
    "sweep": SweepConfig,
    "phase-diagram": PhaseDiagramConfig,
    "kz": KZConfig,
    "quench": QuenchConfig,
    "rearrange": RearrangeConfig,
}


def _line_of(text, loc):
    """Best-effort source line of a field path in a YAML/JSON document."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    line, nxt = k.start_mark.line + 1, v
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def load_config(command, path):
    """Parse and validate the config file for ``command``; raise ConfigError with diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return COMMAND_MODELS[command].model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            ln = _line_of(text, [p for p in err["loc"] if not isinstance(p, str) or p not in
                                 ("linear_sweep", "spline_sweep", "synthetic", "simulate")])
            where = f"line {ln}: " if ln else ""
            lines.append(f"{path}: {where}{loc}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from exc


def config_hash(cfg, seed):
    payload = json.dumps({"config": cfg.model_dump(mode="json"), "seed": seed}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
