"""Finite-state CTMC linear algebra.

Generator validation, stationary distributions, the ergodic / fundamental /
deviation matrix triple, transition matrices, and time reversal.  Everything
here is dense: the background chains of interest have a handful of states,
so exactness and simplicity beat sparse machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .errors import NegativeRate, Reducible, RowSumViolation, SingularSystem

# Max |row sum| accepted before the diagonal is recomputed from the
# off-diagonal entries; larger deviations are treated as user mistakes.
ROW_SUM_TOL = 1e-9
# Entrywise tolerance for the identities tying Q, pi, F and D together.
IDENTITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Generator:
    """Validated transition-rate matrix of an irreducible CTMC.

    Off-diagonal entries are nonnegative rates (1/time), rows sum to zero.
    Instances are produced by :func:`validate_generator`.
    """

    rates: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return self.rates.shape[0]

    @property
    def exit_rates(self) -> NDArray[np.float64]:
        """Per-state exit rates q_i = -q_ii."""
        return -np.diag(self.rates)


@dataclass(frozen=True, eq=False)
class ChainAnalysis:
    """Stationary distribution plus the ergodic/fundamental/deviation triple."""

    pi: NDArray[np.float64]
    ergodic: NDArray[np.float64]      # outer(1, pi)
    fundamental: NDArray[np.float64]  # inverse of (ergodic - Q)
    deviation: NDArray[np.float64]    # fundamental - ergodic

    @property
    def dim(self) -> int:
        return self.pi.shape[0]


def _strongly_connected(adj: NDArray[np.bool_]) -> bool:
    """Reachability of every node from node 0 in the digraph and its reverse."""
    d = adj.shape[0]

    def reach(a: NDArray[np.bool_]) -> bool:
        seen = np.zeros(d, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(a[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())

    return reach(adj) and reach(adj.T)


def validate_generator(raw) -> Generator:
    """Validate a raw rate matrix and return a repaired :class:`Generator`.

    The diagonal is recomputed as the negated off-diagonal row sum when the
    stated rows are within ``ROW_SUM_TOL`` of zero, which tolerates
    serialization rounding without masking real input mistakes.

    Raises:
        NegativeRate: some off-diagonal entry is negative.
        RowSumViolation: a row sum exceeds ``ROW_SUM_TOL`` in magnitude.
        Reducible: the chain is not irreducible.
    """
    q = np.array(raw, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        raise ValueError(f"generator must be a square matrix, got shape {q.shape}")
    d = q.shape[0]

    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if (off < 0.0).any():
        i, j = np.argwhere(off < 0.0)[0]
        raise NegativeRate(f"rate q[{i},{j}] = {q[i, j]} is negative")

    row_sums = q.sum(axis=1)
    if (np.abs(row_sums) > ROW_SUM_TOL).any():
        i = int(np.argmax(np.abs(row_sums)))
        raise RowSumViolation(f"row {i} sums to {row_sums[i]:.3e} (tolerance {ROW_SUM_TOL})")

    np.fill_diagonal(off, -off.sum(axis=1))
    if d > 1 and not _strongly_connected(off > 0.0):
        raise Reducible("positive-rate digraph is not strongly connected")

    off.setflags(write=False)
    return Generator(rates=off)


def analyze(g: Generator) -> ChainAnalysis:
    """Compute pi, the ergodic matrix, the fundamental matrix and the deviation matrix.

    pi solves the stationary equations with normalization (dense LU on the
    augmented system); the fundamental matrix comes from a linear solve
    against (ergodic - Q).

    Raises:
        SingularSystem: the solves failed or the defining identities do not
            hold to ``IDENTITY_TOL``; signals a numerically reducible chain.
    """
    q = g.rates
    d = g.dim

    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(d)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("stationary solve failed") from exc
    if (pi <= 0.0).any():
        raise SingularSystem(f"stationary distribution has nonpositive mass: {pi}")

    ergodic = np.outer(np.ones(d), pi)
    try:
        fundamental = np.linalg.solve(ergodic - q, np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("fundamental-matrix solve failed") from exc
    deviation = fundamental - ergodic

    resid = max(
        np.abs(q @ fundamental - (ergodic - np.eye(d))).max(),
        np.abs(fundamental @ q - (ergodic - np.eye(d))).max(),
        np.abs(ergodic @ deviation).max(),
        np.abs(deviation @ ergodic).max(),
        np.abs(fundamental @ np.ones(d) - 1.0).max(),
        np.abs(pi @ deviation).max(),
    )
    if resid > IDENTITY_TOL:
        raise SingularSystem(f"matrix identities violated by {resid:.3e}; chain near-reducible?")

    for m in (pi, ergodic, fundamental, deviation):
        m.setflags(write=False)
    return ChainAnalysis(pi=pi, ergodic=ergodic, fundamental=fundamental, deviation=deviation)


def transition_matrix(g: Generator, t: float) -> NDArray[np.float64]:
    """Transition probabilities over a horizon t >= 0 (matrix exponential).

    Uses scaling-and-squaring, which stays robust when the generator carries
    sped-up rates.  Entries are clamped to [0, 1]; rows sum to one within
    1e-10.
    """
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    p = expm(g.rates * t)
    return np.clip(p, 0.0, 1.0)


def time_reverse(g: Generator, pi: NDArray[np.float64]) -> Generator:
    """Generator of the time-reversed chain: rate i->j becomes q_ji * pi_j / pi_i.

    The reversed chain has the same stationary distribution.  Validation is
    re-run on the result, so the usual generator errors apply.
    """
    pi = np.asarray(pi, dtype=np.float64)
    rev = (g.rates.T * pi[None, :]) / pi[:, None]
    return validate_generator(rev)
