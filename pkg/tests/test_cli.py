import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from rydsim import __version__
from rydsim.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SWEEP = {
    "lattice": {"kind": "square", "nx": 3, "ny": 3},
    "basis": "nn_blockade",
    "interaction": {"rb_over_a": 1.15},
    "schedule": {"kind": "linear_sweep", "delta_start_mhz": -5.0, "delta_end_mhz": 7.0,
                 "rate_mhz_per_us": 30.0, "omega_mhz": 4.3},
    "shots": 300,
    "seed": 3,
    "noise": {"preset": "ideal"},
}

QUENCH = {
    "lattice": {"kind": "square", "nx": 3, "ny": 3},
    "basis": "nn_blockade",
    "interaction": {"rb_over_a": 1.47},
    "schedule": {"kind": "linear_sweep", "delta_start_mhz": -5.0, "delta_end_mhz": 10.0,
                 "rate_mhz_per_us": 30.0, "omega_mhz": 4.3},
    "quench": {"omega_q_mhz": 4.3, "t_q_us": 0.0, "delta_q_mhz": [0.0, 5.0],
               "phi_q": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]},
}


def write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg) if isinstance(cfg, dict) else cfg)
    return str(p)


def run(tmp_path, command, cfg, out="out", *extra):
    code = main([command, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_unknown_key_is_a_config_error_with_line(tmp_path, capsys):
    text = yaml.safe_dump(SWEEP, sort_keys=False) + "bogus: 1\n"
    code, _ = run(tmp_path, "sweep", text)
    err = capsys.readouterr().err
    assert code == 2 and "bogus" in err and "line" in err


@pytest.mark.parametrize("text", ["a: [\n", "- 1\n- 2\n"])
def test_malformed_config(tmp_path, text):
    assert run(tmp_path, "sweep", text)[0] == 2


def test_missing_config_and_bad_workers(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "none.yaml"), "--out", str(tmp_path)]) == 2
    assert run(tmp_path, "sweep", SWEEP, "o", "--workers", "0")[0] == 2


def test_empty_raster(tmp_path):
    cfg = {"lattice": {"kind": "square", "nx": 3, "ny": 3}, "omega_mhz": 4.3,
           "rb_over_a": {"start": 1.0, "stop": 2.0, "num": 0},
           "delta_over_omega": {"start": 0.0, "stop": 1.0, "num": 2}}
    assert run(tmp_path, "phase-diagram", cfg)[0] == 2


def test_resource_cap(tmp_path, capsys):
    cfg = {**SWEEP, "basis": "full", "lattice": {"kind": "square", "nx": 12, "ny": 12}}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 3 and "cap of 24 sites" in capsys.readouterr().err
    assert not (out / "shots.csv").exists()


def test_outputs_carry_version_and_hash(tmp_path):
    code, out = run(tmp_path, "sweep", SWEEP)
    assert code == 0
    hashes = set()
    for f in sorted(out.iterdir()):
        if f.suffix == ".csv":
            head = f.read_text().splitlines()[:2]
            assert head[0] == f"# rydsim {__version__}"
            hashes.add(head[1].split()[-1])
        elif f.suffix == ".json":
            prov = json.loads(f.read_text())["provenance"]
            assert prov["version"] == __version__
            hashes.add(prov["config_hash"])
    assert len(hashes) == 1
    _, other = run(tmp_path, "sweep", SWEEP, "o2", "--seed", "4")
    prov = json.loads((other / "state.json").read_text())["provenance"]
    assert prov["config_hash"] not in hashes


def test_zero_drive_sweep_leaves_atoms_in_ground(tmp_path):
    cfg = {**SWEEP, "schedule": {**SWEEP["schedule"], "omega_mhz": 0.0}}
    assert run(tmp_path, "sweep", cfg, "no_ref")[0] == 2  # blockade radius needs a reference drive
    cfg["interaction"] = {"rb_over_a": 1.15, "omega_ref_mhz": 4.3}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 0
    rows = read_csv(out / "shots.csv")
    assert len(rows) == 300 and all(v == "0" for r in rows for v in r.values())


def test_zero_length_quench_is_flat_in_phase(tmp_path):
    code, out = run(tmp_path, "quench", QUENCH)
    assert code == 0
    rows = read_csv(out / "pd_vs_phi_q.csv")
    for d in ("0", "4"):
        vals = {r["P"] for r in rows if r["d"] == d}
        assert len(vals) == 1
    fits = json.loads((out / "bloch_fits.json").read_text())["fits"]
    assert "error" in fits["0"]  # tau = 0 probes sz only


def test_kz_synthetic_recovers_nu(tmp_path):
    cfg = yaml.safe_load((CONFIGS / "kz_synthetic.yaml").read_text())
    code, out = run(tmp_path, "kz", cfg)
    assert code == 0
    fit = json.loads((out / "collapse.json").read_text())
    assert abs(fit["nu"] - 0.629) <= 0.02
    assert (out / "kz_collapsed.csv").exists() and (out / "collapse_distance.csv").exists()


def test_phase_diagram_orders(tmp_path):
    cfg = {"lattice": {"kind": "square", "nx": 4, "ny": 4}, "omega_mhz": 4.3,
           "rb_over_a": {"start": 1.0, "stop": 1.6, "num": 2},
           "delta_over_omega": {"start": 0.0, "stop": 4.0, "num": 3}}
    code, out = run(tmp_path, "phase-diagram", cfg, "o", "--workers", "2")
    assert code == 0
    rows = read_csv(out / "phase_diagram.csv")
    assert len(rows) == 6
    low = [r for r in rows if float(r["rb_over_a"]) == 1.0]
    best = max(low, key=lambda r: float(r["checkerboard"]))
    assert float(best["delta_over_omega"]) > 1.0
    point = next(r for r in rows if float(r["rb_over_a"]) == 1.6 and float(r["delta_over_omega"]) == 4.0)
    assert float(point["star"]) > max(float(point["checkerboard"]), float(point["striated"]))


def test_rearrange_command(tmp_path):
    cfg = {"rows": 12, "cols": 12, "load_probability": 0.6, "target_height": 6, "n_instances": 4,
           "two_rounds": True, "seed": 2, "export_plans": 1, "cost": {"background_lifetime_s": None}}
    code, out = run(tmp_path, "rearrange", cfg)
    assert code == 0
    rows = read_csv(out / "instances.csv")
    assert [int(r["seed"]) for r in rows] == [2, 3, 4, 5]
    assert all(float(r["filling_fraction"]) == 1.0 for r in rows)
    assert (out / "plan_seed2.json").exists() and (out / "events_seed2.csv").exists()
    assert not (out / "plan_seed3.json").exists()


def test_workers_do_not_change_results(tmp_path):
    cfg = {"rows": 10, "cols": 10, "load_probability": 0.6, "target_height": 5, "n_instances": 3, "seed": 1}
    _, a = run(tmp_path, "rearrange", cfg, "a")
    _, b = run(tmp_path, "rearrange", cfg, "b", "--workers", "2")
    assert (a / "instances.csv").read_bytes() == (b / "instances.csv").read_bytes()
    assert np.isfinite(float(read_csv(a / "instances.csv")[0]["est_time_ms"]))
