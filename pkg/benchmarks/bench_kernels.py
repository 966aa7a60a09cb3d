"""Time each hot kernel under the numba and pure-numpy backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Each backend runs in a fresh subprocess with RYDSIM_NO_NUMBA set accordingly,
so the flag is honoured from import time. Numba timings exclude the first
(compiling) call.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

CASES = ["independent_sets_5x5", "matrix_free_apply_4x4_full", "matrix_free_apply_5x5_blockade",
         "sparse_build_4x4_full", "displacement_sums_12x12", "conditional_counts_2000x12x12"]


def _setup(case):
    import numpy as np

    from rydsim import _kernels
    from rydsim.hamiltonian import DriveParams, build_operator
    from rydsim.hilbert import BasisConfig, enumerate_basis
    from rydsim.lattice import build_lattice, interaction_matrix, v0_for_blockade

    rng = np.random.default_rng(0)

    def system(side, kind):
        lat = build_lattice("square", side, side)
        basis = enumerate_basis(BasisConfig.for_lattice(lat, kind))
        return basis, build_operator(basis, interaction_matrix(lat, v0_for_blockade(1.15, 1.0)))

    if case == "independent_sets_5x5":
        lat = build_lattice("square", 5, 5)
        cfg = BasisConfig.for_lattice(lat, "nn_blockade")
        return lambda: enumerate_basis(cfg)
    if case.startswith("matrix_free_apply"):
        basis, op = system(4, "full") if "4x4" in case else system(5, "nn_blockade")
        p = DriveParams(1.0, 0.5, 0.3)
        c_raise, c_lower = op.couplings(p)
        diag = op.diagonal(p)
        x = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
        return lambda: _kernels.apply_matrix_free(basis.configs, basis.n_sites, basis.is_full, diag, x,
                                                  c_raise, c_lower)
    if case == "sparse_build_4x4_full":
        basis, _ = system(4, "full")
        return lambda: _kernels.raising_pairs(basis.configs, basis.n_sites, basis.is_full)
    if case == "displacement_sums_12x12":
        cov = rng.normal(size=(144, 144))
        return lambda: _kernels.displacement_sums(cov, 12, 12)
    if case == "conditional_counts_2000x12x12":
        images = rng.integers(0, 2, (2000, 12, 12)).astype(np.uint8)
        return lambda: _kernels.conditional_counts(images, 2)
    raise KeyError(case)


def _worker(repeat):
    out = {}
    for case in CASES:
        fn = _setup(case)
        fn()  # warm-up: JIT compile or cache load
        out[case] = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        _worker(args.repeat)
        return
    results = {}
    for name, flag in (("numba", "0"), ("numpy", "1")):
        env = {**os.environ, "RYDSIM_NO_NUMBA": flag}
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        results[name] = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"{'kernel':34s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for case in CASES:
        a, b = results["numba"][case] * 1e3, results["numpy"][case] * 1e3
        print(f"{case:34s} {a:11.3f} {b:11.3f} {b / a:9.1f}x")


if __name__ == "__main__":
    main()
