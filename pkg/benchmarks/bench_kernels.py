"""Benchmark: compiled kernel vs pure-Python fallback.

Runs the same replication workload through both backends and reports
wall-clock times and speedups.  The two backends are draw-for-draw
identical, so the outputs are also compared as a sanity check.

Usage:
    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from mmisq import ModelSpec, Scaling, Variant, validate_generator
from mmisq import _pykernel
from mmisq.simulate import _tables, rep_stream

try:
    from mmisq import _core
except ImportError:
    _core = None


def run_event(kernel, tb, grid, reps, seed, d):
    counts = np.zeros(grid.size, dtype=np.int64)
    per_type = np.zeros((grid.size, d), dtype=np.int64) if tb.model == 2 else None
    total = 0
    start = time.perf_counter()
    for rep in range(reps):
        kernel.event_driven_rep(rep_stream(seed, rep), tb.model, tb.n, tb.speed,
                                tb.lam, tb.mu, tb.qexit, tb.jump_cum, tb.pi_cum,
                                grid, -1, counts, per_type)
        total += int(counts[-1])
    return time.perf_counter() - start, total


def run_conditional(kernel, tb, t, reps, seed):
    total = 0
    start = time.perf_counter()
    for rep in range(reps):
        total += kernel.conditional_poisson_rep(
            rep_stream(seed, rep), tb.model, tb.n, tb.speed, tb.lam, tb.mu,
            tb.qexit, tb.jump_cum, tb.pi_cum, t, -1)
    return time.perf_counter() - start, total


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if _core is None:
        print("compiled backend not available; rebuild with `pip install -e .`")
        return

    g = validate_generator([[-1.0, 1.0], [1.0, -1.0]])
    seed = 20260809
    scale = 0.1 if args.quick else 1.0

    workloads = [
        ("event-driven, shared hazard, N=400",
         ModelSpec(lam=[1.0, 3.0], mu=[1.0, 1.0], variant=Variant.MODEL_I),
         Scaling(400, 0.5), "event", max(1, int(400 * scale))),
        ("event-driven, typed jobs, N=400",
         ModelSpec(lam=[1.0, 3.0], mu=[1.0, 2.0], variant=Variant.MODEL_II),
         Scaling(400, 0.5), "event", max(1, int(400 * scale))),
        ("conditional-Poisson, N=1600",
         ModelSpec(lam=[1.0, 3.0], mu=[1.0, 2.0], variant=Variant.MODEL_II),
         Scaling(1600, 0.5), "conditional", max(1, int(4000 * scale))),
    ]

    grid = np.array([0.25, 0.5, 1.0])
    print(f"{'workload':45s} {'reps':>6s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, spec, sc, kind, reps in workloads:
        tb = _tables(g, spec, sc)
        if kind == "event":
            t_c, sum_c = run_event(_core, tb, grid, reps, seed, g.dim)
            t_p, sum_p = run_event(_pykernel, tb, grid, reps, seed, g.dim)
        else:
            t_c, sum_c = run_conditional(_core, tb, 1.0, reps, seed)
            t_p, sum_p = run_conditional(_pykernel, tb, 1.0, reps, seed)
        if sum_c != sum_p:
            raise RuntimeError(f"backend outputs differ on {name!r}: {sum_c} vs {sum_p}")
        print(f"{name:45s} {reps:6d} {t_c:9.3f}s {t_p:9.3f}s {t_p / t_c:7.1f}x")


if __name__ == "__main__":
    main()
