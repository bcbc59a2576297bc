"""Model parameters and the (N, alpha) scaling.

Shared vocabulary for the analytic, ODE and Monte Carlo layers: arrival and
service rates with the model variant, and the scaling that inflates arrival
rates by N while speeding the background chain up by N**alpha.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class Variant(enum.Enum):
    """How service rates react to the background state.

    MODEL_I: every job in the system is served at the rate of the *current*
    background state.  MODEL_II: a job's service rate is frozen at arrival,
    so jobs are typed by the state they arrived in.
    """

    MODEL_I = "I"
    MODEL_II = "II"


class Regime(enum.Enum):
    """Switching regime relative to the arrival time scale."""

    SLOW_SWITCHING = "slow"    # alpha < 1
    CRITICAL = "critical"      # alpha = 1
    FAST_SWITCHING = "fast"    # alpha > 1


def regime_for(alpha: float) -> Regime:
    if alpha < 1.0:
        return Regime.SLOW_SWITCHING
    if alpha == 1.0:
        return Regime.CRITICAL
    return Regime.FAST_SWITCHING


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Arrival rates, service rates and the model variant."""

    lam: NDArray[np.float64]
    mu: NDArray[np.float64]
    variant: Variant

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64)
        mu = np.asarray(self.mu, dtype=np.float64)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        if lam.ndim != 1 or mu.ndim != 1 or lam.shape != mu.shape:
            raise ValueError(f"lam and mu must be vectors of equal length, got {lam.shape} and {mu.shape}")
        if (lam < 0.0).any():
            raise ValueError("arrival rates must be nonnegative")
        if (mu <= 0.0).any():
            raise ValueError("service rates must be positive")

    @property
    def dim(self) -> int:
        return self.lam.shape[0]

    def check_dim(self, d: int) -> None:
        if self.dim != d:
            raise ValueError(f"model has {self.dim} states but the generator has {d}")


@dataclass(frozen=True)
class Scaling:
    """Scale N for arrivals, exponent alpha for the background chain.

    The derived normalization exponent gamma = max(1 - alpha/2, 1/2) divides
    the centered count in the Gaussian limits; gamma is 1/2 exactly when
    alpha >= 1.
    """

    n_scale: int
    alpha: float

    def __post_init__(self):
        if self.n_scale < 1:
            raise ValueError(f"N must be a positive integer, got {self.n_scale}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def gamma(self) -> float:
        return max(1.0 - self.alpha / 2.0, 0.5)

    @property
    def speed(self) -> float:
        """Background speed-up factor N**alpha."""
        return float(self.n_scale) ** self.alpha

    @property
    def normalization(self) -> float:
        """N**gamma, the CLT denominator."""
        return float(self.n_scale) ** self.gamma

    @property
    def regime(self) -> Regime:
        return regime_for(self.alpha)


#: Distinguished time value selecting the stationary branch of closed forms.
STATIONARY = math.inf
