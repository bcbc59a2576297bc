"""Monte Carlo routes for the scaled queue.

Two independent samplers: an exact event-driven simulator (competing
exponential clocks, counts observed on a time grid) and a conditional
Poisson sampler (background path first, then one Poisson draw from the
closed-form segment integral).  Replications use counter-based Philox
streams keyed by (master_seed, replication), so batches are reproducible
independently of execution order and thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from numpy.typing import NDArray

from ._backend import BACKEND, kernel
from .markov import Generator, analyze
from .model import ModelSpec, Scaling, Variant


def active_backend() -> str:
    """Name of the kernel backend in use ("compiled" or "python")."""
    return BACKEND


@dataclass(frozen=True, eq=False)
class BackgroundPath:
    """Piecewise-constant right-continuous path: state per inter-jump segment."""

    jump_times: NDArray[np.float64]  # increasing, starts at 0
    states: NDArray[np.int64]
    horizon: float

    def occupancy(self, d: int) -> NDArray[np.float64]:
        """Fraction of [0, horizon] spent in each state."""
        out = np.zeros(d)
        edges = np.append(self.jump_times, self.horizon)
        for i, s in enumerate(self.states):
            out[s] += edges[i + 1] - edges[i]
        return out / self.horizon

    @property
    def n_jumps(self) -> int:
        return self.jump_times.shape[0] - 1


@dataclass(frozen=True)
class SeedInfo:
    master_seed: int
    scheme: str = "philox(key=[master_seed, replication])"


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Counts per (replication, grid time), plus per-type counts for typed jobs."""

    grid: NDArray[np.float64]
    counts: NDArray[np.int64]                 # R x K
    per_type: NDArray[np.int64] | None        # R x K x d (typed model only)
    seed_info: SeedInfo
    method: str

    @property
    def replications(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True, eq=False)
class _Tables:
    """Kernel-ready parameter pack for one (generator, model, scaling) scenario."""

    model: int
    n: float
    speed: float
    lam: NDArray[np.float64]
    mu: NDArray[np.float64]
    qexit: NDArray[np.float64]
    jump_cum: NDArray[np.float64]
    pi_cum: NDArray[np.float64]


def _forced_cumulative(probs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Cumulative probabilities with everything at/after the last positive
    entry forced to 1.0, so inverse-CDF scans always land on a valid index."""
    cum = np.cumsum(probs)
    pos = np.flatnonzero(probs > 0.0)
    if pos.size:
        cum[pos[-1]:] = 1.0
    else:
        cum[:] = 1.0
    return cum


def _tables(g: Generator, spec: ModelSpec, scaling: Scaling) -> _Tables:
    spec.check_dim(g.dim)
    d = g.dim
    qexit = np.ascontiguousarray(g.exit_rates)
    jump_cum = np.empty((d, d))
    for i in range(d):
        if qexit[i] > 0.0:
            probs = g.rates[i] / qexit[i]
            probs = np.where(np.arange(d) == i, 0.0, probs)
        else:
            probs = np.zeros(d)
        jump_cum[i] = _forced_cumulative(probs)
    pi_cum = _forced_cumulative(analyze(g).pi)
    return _Tables(
        model=1 if spec.variant is Variant.MODEL_I else 2,
        n=float(scaling.n_scale),
        speed=scaling.speed,
        lam=np.ascontiguousarray(spec.lam),
        mu=np.ascontiguousarray(spec.mu),
        qexit=qexit,
        jump_cum=jump_cum,
        pi_cum=pi_cum,
    )


def _chain_tables(g: Generator, scaling: Scaling) -> _Tables:
    # background-only variant used by sample_background
    d = g.dim
    dummy = ModelSpec(lam=np.ones(d), mu=np.ones(d), variant=Variant.MODEL_I)
    return _tables(g, dummy, scaling)


def rep_stream(master_seed: int, replication: int) -> Philox:
    """Counter-based stream for one replication; independent per index."""
    return Philox(key=np.array([master_seed, replication], dtype=np.uint64))


def _init_code(init_state: int | None) -> int:
    return -1 if init_state is None else int(init_state)


def sample_background(g: Generator, scaling: Scaling, horizon: float, rng_stream,
                      init_state: int | None = None) -> BackgroundPath:
    """Sample the sped-up background chain on [0, horizon).

    The initial state is drawn from the stationary distribution unless a
    fixed ``init_state`` is given.
    """
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    tb = _chain_tables(g, scaling)
    times, states = kernel.background_path_rep(
        rng_stream, tb.speed, tb.qexit, tb.jump_cum, tb.pi_cum,
        float(horizon), _init_code(init_state))
    return BackgroundPath(jump_times=times, states=states, horizon=float(horizon))


def _check_grid(grid) -> NDArray[np.float64]:
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a nonempty vector of observation times")
    if (grid < 0.0).any() or (np.diff(grid) < 0.0).any():
        raise ValueError("grid times must be nonnegative and sorted")
    return grid


def simulate_event_driven(g: Generator, spec: ModelSpec, scaling: Scaling, grid,
                          rng_stream, init_state: int | None = None
                          ) -> tuple[NDArray[np.int64], NDArray[np.int64] | None]:
    """One replication of exact dynamics; returns counts (and per-type counts)."""
    grid = _check_grid(grid)
    tb = _tables(g, spec, scaling)
    counts = np.zeros(grid.size, dtype=np.int64)
    per_type = np.zeros((grid.size, g.dim), dtype=np.int64) if tb.model == 2 else None
    kernel.event_driven_rep(rng_stream, tb.model, tb.n, tb.speed, tb.lam, tb.mu,
                            tb.qexit, tb.jump_cum, tb.pi_cum, grid,
                            _init_code(init_state), counts, per_type)
    return counts, per_type


def simulate_conditional_poisson(g: Generator, spec: ModelSpec, scaling: Scaling,
                                 t: float, rng_stream,
                                 init_state: int | None = None) -> int:
    """One replication via the mixed-Poisson representation at a single time."""
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    tb = _tables(g, spec, scaling)
    return int(kernel.conditional_poisson_rep(
        rng_stream, tb.model, tb.n, tb.speed, tb.lam, tb.mu, tb.qexit,
        tb.jump_cum, tb.pi_cum, float(t), _init_code(init_state)))


def run_batch(g: Generator, spec: ModelSpec, scaling: Scaling, grid,
              replications: int, master_seed: int,
              init_state: int | None = None, method: str = "event",
              threads: int = 1) -> SampleBatch:
    """Independent replications on a shared observation grid.

    Replication r always uses the stream keyed by (master_seed, r) and
    writes to its own slot, so the batch is bit-identical for any thread
    count and any execution order.
    """
    grid = _check_grid(grid)
    if replications < 1:
        raise ValueError("need at least one replication")
    if method not in ("event", "conditional"):
        raise ValueError(f"unknown method {method!r}")
    if method == "conditional" and grid.size != 1:
        raise ValueError("the conditional-Poisson sampler observes a single time")

    tb = _tables(g, spec, scaling)
    init = _init_code(init_state)
    r = int(replications)
    k = grid.size
    counts = np.zeros((r, k), dtype=np.int64)
    per_type = None
    if tb.model == 2 and method == "event":
        per_type = np.zeros((r, k, g.dim), dtype=np.int64)

    def run_range(lo: int, hi: int) -> None:
        for rep in range(lo, hi):
            stream = rep_stream(master_seed, rep)
            if method == "event":
                kernel.event_driven_rep(
                    stream, tb.model, tb.n, tb.speed, tb.lam, tb.mu, tb.qexit,
                    tb.jump_cum, tb.pi_cum, grid, init, counts[rep],
                    per_type[rep] if per_type is not None else None)
            else:
                counts[rep, 0] = kernel.conditional_poisson_rep(
                    stream, tb.model, tb.n, tb.speed, tb.lam, tb.mu, tb.qexit,
                    tb.jump_cum, tb.pi_cum, float(grid[0]), init)

    threads = max(1, int(threads))
    if threads == 1:
        run_range(0, r)
    else:
        bounds = np.linspace(0, r, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_range, int(lo), int(hi))
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            for fut in futures:
                fut.result()

    return SampleBatch(grid=grid, counts=counts, per_type=per_type,
                       seed_info=SeedInfo(master_seed=int(master_seed)),
                       method=method)
