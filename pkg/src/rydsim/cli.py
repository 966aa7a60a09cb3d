"""rydsim <sweep|phase-diagram|kz|quench|rearrange> --config PATH --out DIR [--seed N] [--workers K]

Exit codes: 0 success, 1 runtime error, 2 config error, 3 resource-cap error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, units
from .analysis import (CollapseCurves, conditional_density, critical_point, exact_ensemble, fit_correlation_length,
                       fit_nu, g2_density, g2_m, order_parameters, synthetic_family)
from .analysis.kz import kz_rescale
from .config import ConfigError, config_hash, load_config
from .evolve import evolve, evolve_snapshots, ground_state, mean_density
from .hamiltonian import DriveParams, build_operator
from .hilbert import BasisConfig, BasisSizeError, StateVector, enumerate_basis
from .lattice import GridRequiredError, interaction_matrix, v0_for_blockade
from .measure import apply_detection_noise, perfect_order_probability, sample
from .meanfield import QuenchModel, fit_bloch
from .patterns import checkerboard_pair
from .rearrange import CostModel, centered_target, plan_and_simulate, random_load
from .schedule import LinearSweep, Quench, schedule_hash

log = logging.getLogger("rydsim")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


class Outputs:
    """Writes files into the output directory, stamping each with version and config hash."""

    def __init__(self, out_dir, chash):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.chash = chash
        self.written = []

    @property
    def header(self):
        return [f"rydsim {__version__}", f"config_hash {self.chash}"]

    @property
    def provenance(self):
        return {"tool": "rydsim", "version": __version__, "config_hash": self.chash}

    def path(self, name):
        p = self.dir / name
        self.written.append(p.name)
        return p

    def json(self, name, payload):
        body = {"provenance": self.provenance, **payload}
        self.path(name).write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def csv(self, name, columns, rows):
        with self.path(name).open("w", newline="") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def pmap(fn, items, workers):
    """Ordered map, fanned out over a process pool when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _system(lattice_spec, basis_kind, v0):
    lat, inter = lattice_spec.interactions(v0)
    basis = enumerate_basis(BasisConfig.for_lattice(lat, basis_kind))
    return lat, basis, build_operator(basis, inter)


def _grid_of(lattice_spec):
    if lattice_spec.kind != "square":
        raise GridRequiredError(f"{lattice_spec.kind} lattice has no (col, row) grid for shot analyses")
    return lattice_spec.nx, lattice_spec.ny


def _fit_all(cmap, fit_spec):
    out = {}
    for direction in fit_spec.directions:
        try:
            f = fit_correlation_length(cmap, direction, fit_spec.r_min, fit_spec.r_max)
            out[direction] = {"xi": _finite(f.xi), "xi_err": _finite(f.xi_err), "infinite": f.infinite,
                              "slope": f.slope, "r": f.r.tolist(), "values": f.values.tolist()}
        except ValueError as exc:
            out[direction] = {"error": str(exc)}
    return out


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(cfg, out, workers):
    schedule = cfg.schedule.build()
    grid = _grid_of(cfg.lattice)
    v0 = cfg.interaction.v0(schedule.omega)
    lat, basis, op = _system(cfg.lattice, cfg.basis, v0)
    psi0 = StateVector.basis_state(basis, 0)
    psi = evolve(psi0, op, schedule, cfg.evolve.build())
    shots = sample(psi, cfg.shots, cfg.seed, grid, schedule_hash(schedule))
    noise = cfg.noise.build()
    noisy = apply_detection_noise(shots, noise, cfg.seed + 1)
    noisy.write_csv(out.path("shots.csv"), out.header, {"provenance": out.provenance})
    out.written.append("shots.json")

    nx, ny = grid
    if noisy.n_shots >= 2:
        g2 = g2_density(noisy)
        gm = g2_m(noisy)
        g2.write_csv(out.path("g2_density.csv"), out.header)
        gm.write_csv(out.path("g2_magnetization.csv"), out.header)
        fits = {"density": _fit_all(g2, cfg.fit), "magnetization": _fit_all(gm, cfg.fit)}
    else:
        fits = {"error": "need at least 2 shots for correlators"}
    out.json("correlation_length.json", fits)
    out.json("perfect_order.json", {
        "probability": perfect_order_probability(noisy, checkerboard_pair(nx, ny)),
        "n_shots": noisy.n_shots, "n_sites": noisy.n_sites, "noise": noise.to_dict(),
    })
    out.json("state.json", {"mean_density": mean_density(psi), "norm_drift": psi.meta.get("norm_drift"),
                            "basis_size": basis.size, "order_parameters": order_parameters(noisy)})


# ---------------------------------------------------------------------------
# phase diagram

def _phase_point(args):
    lattice_spec, basis_kind, omega, rb, dr, seed = args
    _, basis, op = _system(lattice_spec, basis_kind, v0_for_blockade(rb, omega))
    gs = ground_state(op, DriveParams(omega, dr * omega), seed=seed)
    shots, w = exact_ensemble(gs.state, (lattice_spec.nx, lattice_spec.ny))
    op_vals = order_parameters(shots, weights=w)
    return (rb, dr, op_vals["checkerboard"], op_vals["striated"], op_vals["star"], gs.energy / omega,
            mean_density(gs.state), gs.degeneracy)


def cmd_phase_diagram(cfg, out, workers):
    _grid_of(cfg.lattice)
    omega = units.mhz(cfg.omega_mhz)
    # enumerate once up front so cap violations surface before any work is fanned out
    enumerate_basis(BasisConfig.for_lattice(cfg.lattice.build(), cfg.basis))
    points = [(cfg.lattice, cfg.basis, omega, float(rb), float(dr), cfg.seed)
              for rb in cfg.rb_over_a.values() for dr in cfg.delta_over_omega.values()]
    rows = pmap(_phase_point, points, workers)
    out.csv("phase_diagram.csv", ["rb_over_a", "delta_over_omega", "checkerboard", "striated", "star",
                                  "energy_over_omega", "mean_density", "degeneracy"], rows)
    best = {}
    for name, col in (("checkerboard", 2), ("striated", 3), ("star", 4)):
        r = max(rows, key=lambda row: row[col])
        best[name] = {"rb_over_a": r[0], "delta_over_omega": r[1], "value": r[col]}
    out.json("phase_diagram_summary.json", {"n_points": len(rows), "maxima": best})


# ---------------------------------------------------------------------------
# Kibble-Zurek

def _kz_rate(args):
    src, rate = args
    omega = units.mhz(src.omega_mhz)
    v0 = src.interaction.v0(omega)
    lat, basis, op = _system(src.lattice, src.basis, v0)
    nx, ny = src.lattice.nx, src.lattice.ny
    ends = sorted(src.endpoints_delta_over_omega)
    sweep = LinearSweep(units.mhz(src.delta_start_mhz), ends[-1] * omega, units.mhz_per_us(rate), omega)
    times = [sweep.time_at(e * omega) for e in ends]
    states = evolve_snapshots(StateVector.basis_state(basis, 0), op, sweep, times, src.evolve.build())
    rows = []
    for e, st in zip(ends, states):
        shots, w = exact_ensemble(st, (nx, ny))
        cmap = g2_m(shots, w) if src.correlator == "magnetization" else g2_density(shots, w)
        xis = []
        for direction in src.fit.directions:
            try:
                f = fit_correlation_length(cmap, direction, src.fit.r_min, src.fit.r_max)
                if not f.infinite:
                    xis.append(f.xi)
            except ValueError:
                pass
        rows.append((rate, e, float(np.mean(xis)) if xis else math.nan, mean_density(st)))
    return rows


def _density_point(args):
    src, dr = args
    omega = units.mhz(src.omega_mhz)
    _, _, op = _system(src.lattice, src.basis, src.interaction.v0(omega))
    return mean_density(ground_state(op, DriveParams(omega, dr * omega)).state)


def cmd_kz(cfg, out, workers):
    src = cfg.source
    lo, hi, step = cfg.nu_grid
    if src.kind == "synthetic":
        curves = synthetic_family(src.nu, src.rates, src.s0, src.delta_c_over_omega, src.delta_over_omega.values(),
                                  z=cfg.z)
        delta_c, delta_c_err = src.delta_c_over_omega, 0.0
        crit = None
    else:
        enumerate_basis(BasisConfig.for_lattice(src.lattice.build(), src.basis))
        per_rate = pmap(_kz_rate, [(src, r) for r in src.rates_mhz_per_us], workers)
        rows = [r for rr in per_rate for r in rr]
        out.csv("kz_raw.csv", ["rate_mhz_per_us", "delta_over_omega", "xi", "mean_density"], rows)
        deltas, xis = [], []
        for rr in per_rate:
            good = [(e, x) for _, e, x, _ in rr if math.isfinite(x)]
            deltas.append([g[0] for g in good])
            xis.append([g[1] for g in good])
        s0 = src.s0_mhz_per_us or min(src.rates_mhz_per_us)
        curves = CollapseCurves(src.rates_mhz_per_us, deltas, xis, s0, z=cfg.z)
        crit = None
        if src.delta_c_over_omega is None:
            scan = src.critical_scan.values()
            dens = pmap(_density_point, [(src, float(d)) for d in scan], workers)
            cp = critical_point(scan, dens, 1.0)
            delta_c, delta_c_err = cp.ratio, cp.ratio_err
            crit = cp.to_dict()
            out.csv("critical_scan.csv", ["delta_over_omega", "mean_density"], zip(scan, dens))
        else:
            delta_c, delta_c_err = src.delta_c_over_omega, src.delta_c_err_over_omega
    fit = fit_nu(curves, delta_c, z=cfg.z, delta_c_err=delta_c_err, grid=(lo, hi, step))
    rows = []
    for s, d, x in zip(curves.rates, curves.deltas, curves.xis):
        rows.extend((s, float(a), float(b)) for a, b in zip(d, x))
    out.csv("kz_curves.csv", ["rate", "delta_over_omega", "xi"], rows)
    resc = kz_rescale(curves, fit.nu, delta_c)
    out.csv("kz_collapsed.csv", ["rate", "delta_tilde", "xi_tilde"],
            [(c.rate, float(a), float(b)) for c in resc for a, b in zip(c.delta, c.xi)])
    out.csv("collapse_distance.csv", ["nu", "D"], [(float(n), _finite(d)) for n, d in zip(fit.nus, fit.distances)])
    out.json("collapse.json", {**fit.to_dict(), "delta_c_err": delta_c_err, "z": cfg.z, "critical_point": crit})


# ---------------------------------------------------------------------------
# quench

def _prepare_quench(cfg):
    schedule = cfg.schedule.build()
    _, basis, op = _system(cfg.lattice, cfg.basis, cfg.interaction.v0(schedule.omega))
    return op, evolve(StateVector.basis_state(basis, 0), op, schedule, cfg.evolve.build())


def _quench_point(args):
    cfg, op, psi, delta_q_mhz, phi_q = args
    q = cfg.quench
    if q.t_q_us > 0:
        quench = Quench(units.mhz(q.omega_q_mhz), units.mhz(delta_q_mhz), phi_q, units.us(q.t_q_us))
        psi = evolve(psi, op, quench, cfg.evolve.build())
    grid = (cfg.lattice.nx, cfg.lattice.ny)
    if cfg.shots is None:
        shots, w = exact_ensemble(psi, grid)
    else:
        shots = apply_detection_noise(sample(psi, cfg.shots, cfg.seed, grid), cfg.noise.build(), cfg.seed + 1)
        w = None
    return [(d, conditional_density(shots, d, w)) for d in q.conditions]


def cmd_quench(cfg, out, workers):
    _grid_of(cfg.lattice)
    enumerate_basis(BasisConfig.for_lattice(cfg.lattice.build(), cfg.basis))
    q = cfg.quench
    schedule = cfg.schedule.build()
    v_sqrt2a = cfg.interaction.v0(schedule.omega) / 8.0
    res_mhz = {d: q.phi_scan_delta_q_mhz.get(d, units.to_mhz(d * v_sqrt2a)) for d in q.conditions}

    op, psi = _prepare_quench(cfg)
    spectrum = pmap(_quench_point, [(cfg, op, psi, dq, q.delta_scan_phi_q) for dq in q.delta_q_mhz], workers)
    out.csv("pd_vs_delta_q.csv", ["delta_q_mhz", "d", "P", "numerator", "denominator"],
            [(dq, d, _finite(c.value), c.numerator, c.denominator)
             for dq, per in zip(q.delta_q_mhz, spectrum) for d, c in per])

    fits = {}
    phase_rows = []
    for d in q.conditions:
        scan = pmap(_quench_point, [(cfg, op, psi, res_mhz[d], ph) for ph in q.phi_q], workers)
        vals = [dict(per)[d] for per in scan]
        phase_rows.extend((ph, d, res_mhz[d], _finite(c.value), c.denominator) for ph, c in zip(q.phi_q, vals))
        model = QuenchModel.for_resonance(units.mhz(q.omega_q_mhz), units.mhz(res_mhz[d]), units.us(q.t_q_us), d,
                                          v_sqrt2a)
        ok = [(ph, c.value) for ph, c in zip(q.phi_q, vals) if c.defined]
        try:
            fit = fit_bloch([o[0] for o in ok], [o[1] for o in ok], model, jitter=q.jitter)
            fits[str(d)] = fit.to_dict()
        except ValueError as exc:
            fits[str(d)] = {"error": str(exc)}
    out.csv("pd_vs_phi_q.csv", ["phi_q", "d", "delta_q_mhz", "P", "denominator"], phase_rows)
    out.json("bloch_fits.json", {"fits": fits, "resonances_mhz": {str(k): v for k, v in res_mhz.items()}})


# ---------------------------------------------------------------------------
# rearrangement

def _rearrange_instance(args):
    cfg, seed = args
    target = centered_target(cfg.rows, cfg.cols, cfg.target_height, cfg.target_width)
    grid = random_load(cfg.rows, cfg.cols, cfg.load_probability, seed, target)
    model = CostModel(**cfg.cost.model_dump())
    res = plan_and_simulate(grid, model, cfg.two_rounds, seed)
    return seed, res, model


def cmd_rearrange(cfg, out, workers):
    seeds = [cfg.seed + k for k in range(cfg.n_instances)]
    results = pmap(_rearrange_instance, [(cfg, s) for s in seeds], workers)
    rows = []
    for k, (seed, res, model) in enumerate(results):
        s = res.summary()
        rows.append((seed, s["filling_fraction"], s["est_time_ms"], s["losses"], s["n_moves"], s["n_scans"],
                     len(s["unresolved"])))
        if k < cfg.export_plans:
            out.json(f"plan_seed{seed}.json", {"seed": seed, **res.plan.to_dict(model), "summary": s})
            res.plan.write_csv(out.path(f"events_seed{seed}.csv"), model, out.header)
    out.csv("instances.csv", ["seed", "filling_fraction", "est_time_ms", "losses", "n_moves", "n_scans",
                              "n_unresolved"], rows)
    fill = np.array([r[1] for r in rows])
    out.json("rearrange_summary.json", {
        "n_instances": len(rows), "mean_filling": float(fill.mean()),
        "std_filling": float(fill.std(ddof=1)) if fill.size > 1 else 0.0,
        "fully_filled_fraction": float(np.mean(fill == 1.0)),
        "mean_time_ms": float(np.mean([r[2] for r in rows])), "two_rounds": cfg.two_rounds,
    })


COMMANDS = {
    "sweep": cmd_sweep,
    "phase-diagram": cmd_phase_diagram,
    "kz": cmd_kz,
    "quench": cmd_quench,
    "rearrange": cmd_rearrange,
}


def build_parser():
    p = argparse.ArgumentParser(prog="rydsim", description="Rydberg array simulation and analysis campaigns.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML or JSON experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes for raster/seed fan-out")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("rydsim: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.command, args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
    except ConfigError as exc:
        print(f"rydsim: config error\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Outputs(args.out, config_hash(cfg, cfg.seed))
    try:
        COMMANDS[args.command](cfg, out, args.workers)
    except ConfigError as exc:
        print(f"rydsim: config error\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BasisSizeError as exc:
        print(f"rydsim: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (GridRequiredError, ValueError, RuntimeError) as exc:
        print(f"rydsim {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s", ", ".join(out.written))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
