"""Exact finite-N moments of the scaled queue via linear moment systems.

Differentiating the generating-function dynamics at z = 1 turns the first
and second factorial moments, jointly with the background state, into linear
constant-coefficient ODE systems.  Those are propagated exactly with a
matrix exponential, which sidesteps the stiffness of the sped-up background
chain entirely (rates of order N**alpha pose no problem to
scaling-and-squaring).  This module is the noise-free bridge between the
Monte Carlo routes and the closed-form limits.

State layout (row vectors, d background states):

* shared-hazard model: [p | m | s] with p the state probabilities,
  m_j = E[count * 1{state=j}] and s_j the second factorial moment.
* typed-jobs model: [p | m_0 .. m_{d-1} | s_(j,k) for j <= k] where
  m_k tracks type-k counts and s_(j,k) the mixed second factorial moments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .errors import SingularSystem
from .markov import Generator, analyze
from .model import ModelSpec, Scaling, Variant


@dataclass(frozen=True, eq=False)
class Model1Moments:
    grid: NDArray[np.float64]
    state_probs: NDArray[np.float64]  # K x d
    mean: NDArray[np.float64]         # K
    var: NDArray[np.float64]          # K


@dataclass(frozen=True, eq=False)
class Model2Moments:
    grid: NDArray[np.float64]
    state_probs: NDArray[np.float64]   # K x d
    mean_by_type: NDArray[np.float64]  # K x d
    cov: NDArray[np.float64]           # K x d x d
    mean: NDArray[np.float64]          # K
    var: NDArray[np.float64]           # K


@dataclass(frozen=True, eq=False)
class StationaryMoments:
    mean: float
    var: float
    mean_by_type: NDArray[np.float64] | None = None
    cov: NDArray[np.float64] | None = None


def _initial_probs(g: Generator, init_state: int | None) -> NDArray[np.float64]:
    if init_state is None:
        return analyze(g).pi.copy()
    if not 0 <= init_state < g.dim:
        raise ValueError(f"initial state {init_state} out of range for d={g.dim}")
    p0 = np.zeros(g.dim)
    p0[init_state] = 1.0
    return p0


def _check_grid(grid) -> NDArray[np.float64]:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a nonempty vector of times")
    if (grid < 0.0).any() or (np.diff(grid) < 0.0).any():
        raise ValueError("grid times must be nonnegative and sorted")
    return grid


def system_matrix(g: Generator, spec: ModelSpec, scaling: Scaling,
                  variant: Variant) -> NDArray[np.float64]:
    """Constant coefficient matrix B of the row-vector system y' = y B."""
    spec.check_dim(g.dim)
    d = g.dim
    aq = scaling.speed * g.rates
    n = float(scaling.n_scale)
    lam, mu = spec.lam, spec.mu

    if variant is Variant.MODEL_I:
        b = np.zeros((3 * d, 3 * d))
        lam_n = n * np.diag(lam)
        m_mat = np.diag(mu)
        b[0:d, 0:d] = aq
        b[0:d, d:2 * d] = lam_n
        b[d:2 * d, d:2 * d] = aq - m_mat
        b[d:2 * d, 2 * d:3 * d] = 2.0 * lam_n
        b[2 * d:3 * d, 2 * d:3 * d] = aq - 2.0 * m_mat
        return b

    pairs = [(j, k) for j in range(d) for k in range(j, d)]
    npairs = len(pairs)
    dim = d + d * d + npairs * d
    b = np.zeros((dim, dim))

    def m_block(k: int) -> slice:
        return slice(d + k * d, d + (k + 1) * d)

    def s_block(idx: int) -> slice:
        base = d + d * d
        return slice(base + idx * d, base + (idx + 1) * d)

    b[0:d, 0:d] = aq
    for k in range(d):
        blk = m_block(k)
        b[0:d, blk] += n * lam[k] * _unit_diag(d, k)
        b[blk, blk] = aq - mu[k] * np.eye(d)
    for idx, (j, k) in enumerate(pairs):
        blk = s_block(idx)
        b[blk, blk] = aq - (mu[j] + mu[k]) * np.eye(d)
        b[m_block(k), blk] += n * lam[j] * _unit_diag(d, j)
        b[m_block(j), blk] += n * lam[k] * _unit_diag(d, k)
    return b


def _unit_diag(d: int, k: int) -> NDArray[np.float64]:
    e = np.zeros((d, d))
    e[k, k] = 1.0
    return e


def _propagate(b: NDArray[np.float64], y0: NDArray[np.float64],
               grid: NDArray[np.float64], parts: int = 1) -> NDArray[np.float64]:
    """y(t) = y0 expm(B t) for each grid time, optionally in `parts` factors.

    The split form is the consistency knob: results must be independent of
    `parts` to within roundoff, which replaces a step-halving check for a
    stepping integrator.
    """
    out = np.empty((grid.size, y0.size))
    for i, t in enumerate(grid):
        if parts == 1:
            out[i] = y0 @ expm(b * t)
        else:
            step = expm(b * (t / parts))
            y = y0.copy()
            for _ in range(parts):
                y = y @ step
            out[i] = y
    return out


def moments_model1(g: Generator, spec: ModelSpec, scaling: Scaling, grid,
                   init_state: int | None = None, parts: int = 1) -> Model1Moments:
    """Mean and variance of the total count at the grid times (shared hazard)."""
    grid = _check_grid(grid)
    d = g.dim
    b = system_matrix(g, spec, scaling, Variant.MODEL_I)
    y0 = np.zeros(3 * d)
    y0[0:d] = _initial_probs(g, init_state)
    ys = _propagate(b, y0, grid, parts)
    p = ys[:, 0:d]
    mean = ys[:, d:2 * d].sum(axis=1)
    s_tot = ys[:, 2 * d:3 * d].sum(axis=1)
    var = s_tot + mean - mean ** 2
    return Model1Moments(grid=grid, state_probs=p, mean=mean, var=var)


def moments_model2(g: Generator, spec: ModelSpec, scaling: Scaling, grid,
                   init_state: int | None = None, parts: int = 1) -> Model2Moments:
    """Per-type means, full covariance, and totals at the grid times (typed jobs)."""
    grid = _check_grid(grid)
    d = g.dim
    pairs = [(j, k) for j in range(d) for k in range(j, d)]
    b = system_matrix(g, spec, scaling, Variant.MODEL_II)
    y0 = np.zeros(b.shape[0])
    y0[0:d] = _initial_probs(g, init_state)
    ys = _propagate(b, y0, grid, parts)

    kk = grid.size
    p = ys[:, 0:d]
    mean_by_type = np.empty((kk, d))
    for k in range(d):
        mean_by_type[:, k] = ys[:, d + k * d:d + (k + 1) * d].sum(axis=1)
    cov = np.empty((kk, d, d))
    base = d + d * d
    for idx, (j, k) in enumerate(pairs):
        s_tot = ys[:, base + idx * d:base + (idx + 1) * d].sum(axis=1)
        c = s_tot - mean_by_type[:, j] * mean_by_type[:, k]
        if j == k:
            c = c + mean_by_type[:, k]
        cov[:, j, k] = c
        cov[:, k, j] = c
    mean = mean_by_type.sum(axis=1)
    var = cov.sum(axis=(1, 2))
    return Model2Moments(grid=grid, state_probs=p, mean_by_type=mean_by_type,
                         cov=cov, mean=mean, var=var)


def stationary_moments(g: Generator, spec: ModelSpec, scaling: Scaling,
                       variant: Variant) -> StationaryMoments:
    """Stationary mean/variance from linear solves (time derivative set to zero)."""
    spec.check_dim(g.dim)
    d = g.dim
    aq = scaling.speed * g.rates
    n = float(scaling.n_scale)
    lam, mu = spec.lam, spec.mu
    pi = analyze(g).pi

    try:
        if variant is Variant.MODEL_I:
            m = np.linalg.solve((np.diag(mu) - aq).T, n * (pi * lam))
            s = np.linalg.solve((2.0 * np.diag(mu) - aq).T, 2.0 * n * (m * lam))
            mean = float(m.sum())
            var = float(s.sum()) + mean - mean ** 2
            return StationaryMoments(mean=mean, var=var)

        m_rows = np.empty((d, d))
        for k in range(d):
            rhs = np.zeros(d)
            rhs[k] = n * lam[k] * pi[k]
            m_rows[k] = np.linalg.solve((mu[k] * np.eye(d) - aq).T, rhs)
        mean_by_type = m_rows.sum(axis=1)
        cov = np.empty((d, d))
        for j in range(d):
            for k in range(j, d):
                rhs = np.zeros(d)
                rhs[j] += n * lam[j] * m_rows[k, j]
                rhs[k] += n * lam[k] * m_rows[j, k]
                s = np.linalg.solve(((mu[j] + mu[k]) * np.eye(d) - aq).T, rhs)
                c = float(s.sum()) - mean_by_type[j] * mean_by_type[k]
                if j == k:
                    c += mean_by_type[k]
                cov[j, k] = c
                cov[k, j] = c
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("stationary moment solve failed") from exc

    mean = float(mean_by_type.sum())
    return StationaryMoments(mean=mean, var=float(cov.sum()),
                             mean_by_type=mean_by_type, cov=cov)
