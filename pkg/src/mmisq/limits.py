"""Closed-form limit quantities for the scaled Markov-modulated queue.

Fluid limits, the bilinear variance constants built on the deviation matrix,
Gaussian-limit variances for both model variants, the per-type covariance
matrices of the multivariate limit, and cross-time covariance structure.

Passing ``t = math.inf`` (see :data:`mmisq.model.STATIONARY`) selects the
stationary branch of every time-dependent formula; the implementations use
``expm1`` so that the infinite-horizon value is produced exactly rather than
via a large-t evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad

from .errors import OrderViolation, UnsortedOffsets
from .markov import ChainAnalysis
from .model import ModelSpec, Regime, Scaling, regime_for


@dataclass(frozen=True)
class LimitSummary:
    """Fluid mean and Gaussian-limit variance, transient and stationary."""

    rho_t: Callable[[float], float]
    sigma2_t: Callable[[float], float]
    rho_inf: float
    sigma2_inf: float
    regime: Regime


def averaged_rates(pi: NDArray[np.float64], spec: ModelSpec) -> tuple[float, float]:
    """Stationary-average arrival and service rates (pi-weighted means)."""
    return float(pi @ spec.lam), float(pi @ spec.mu)


def rho_uniform(lambda_inf: float, mu: float, t: float) -> float:
    """Fluid mean (1 - e^{-mu t}) * lambda_inf / mu for uniform service rate."""
    return -math.expm1(-mu * t) * lambda_inf / mu


def u_constant(pi: NDArray[np.float64], lam: NDArray[np.float64],
               deviation: NDArray[np.float64]) -> float:
    """Bilinear form of the arrival rates against the deviation matrix.

    Zero whenever the arrival rate is constant across states (the deviation
    matrix kills constant vectors), and in particular for a single state.
    """
    return float((pi * lam) @ (deviation @ lam))


def uhat_ucheck(pi: NDArray[np.float64], lam: NDArray[np.float64],
                mu: NDArray[np.float64], deviation: NDArray[np.float64]) -> tuple[float, float]:
    """Mixed arrival/service and pure-service companions of :func:`u_constant`.

    Both vanish for uniform service rates.
    """
    uhat = float((pi * mu) @ (deviation @ lam) + (pi * lam) @ (deviation @ mu))
    ucheck = float((pi * mu) @ (deviation @ mu))
    return uhat, ucheck


def sigma2_uniform(u: float, lambda_inf: float, mu: float, alpha: float, t: float) -> float:
    """Limit variance for uniform service rates.

    Slow-switching contribution (1 - e^{-2 mu t}) U / mu is active for
    alpha <= 1, the Poissonian contribution rho(t) for alpha >= 1; at
    alpha = 1 both terms are summed.
    """
    out = 0.0
    if alpha <= 1.0:
        out += -math.expm1(-2.0 * mu * t) * u / mu
    if alpha >= 1.0:
        out += rho_uniform(lambda_inf, mu, t)
    return out


def model1_rho(lambda_inf: float, mu_inf: float, t: float) -> float:
    """Fluid mean of the total count when all jobs share the current hazard."""
    return -math.expm1(-mu_inf * t) * lambda_inf / mu_inf


def _g(m: int, n: int, mu_inf: float, t: float) -> float:
    return math.exp(-m * mu_inf * t) - math.exp(-n * mu_inf * t)


def model1_sigma2(analysis: ChainAnalysis, spec: ModelSpec, t: float) -> float:
    """Slow-switching variance for heterogeneous hazard rates, closed form.

    Combines the three deviation-matrix bilinear constants with exponential
    weights in mu_inf * t; the stationary value is returned for t = inf.
    """
    pi, dev = analysis.pi, analysis.deviation
    lambda_inf, mu_inf = averaged_rates(pi, spec)
    rho = lambda_inf / mu_inf
    u = u_constant(pi, spec.lam, dev)
    uhat, ucheck = uhat_ucheck(pi, spec.lam, spec.mu, dev)
    if math.isinf(t):
        return (u - rho * uhat + rho * rho * ucheck) / mu_inf
    g02 = _g(0, 2, mu_inf, t)
    g12 = _g(1, 2, mu_inf, t)
    return (
        u * g02 / mu_inf
        + uhat * rho / mu_inf * (2.0 * g12 - g02)
        + ucheck * rho * rho / mu_inf * (g02 - 4.0 * g12 + 2.0 * mu_inf * t * math.exp(-2.0 * mu_inf * t))
    )


def model1_sigma2_quadrature(analysis: ChainAnalysis, spec: ModelSpec, t: float,
                             tol: float = 1e-10) -> float:
    """Same variance by adaptive quadrature of the defining time integral.

    Kept deliberately independent of :func:`model1_sigma2`: the integrand is
    evaluated through the matrix bilinear form, not through the precomputed
    scalar constants.  Serves as the cross-check route.
    """
    pi, dev = analysis.pi, analysis.deviation
    lambda_inf, mu_inf = averaged_rates(pi, spec)

    def bilinear(s: float) -> float:
        v = spec.lam - model1_rho(lambda_inf, mu_inf, s) * spec.mu
        return float((pi * v) @ (dev @ v))

    if math.isinf(t):
        return bilinear(math.inf) / mu_inf
    # substituted form: 2 * int_0^t exp(-2 mu_inf u) * bilinear(t - u) du,
    # which keeps the integrand bounded for large t
    val, _err = quad(lambda uu: 2.0 * math.exp(-2.0 * mu_inf * uu) * bilinear(t - uu),
                     0.0, t, epsabs=tol, epsrel=tol, limit=200)
    return val


def model1_limits(analysis: ChainAnalysis, spec: ModelSpec, alpha: float) -> LimitSummary:
    """Fluid and Gaussian-limit summary for the shared-hazard model."""
    lambda_inf, mu_inf = averaged_rates(analysis.pi, spec)

    def rho_t(t: float) -> float:
        return model1_rho(lambda_inf, mu_inf, t)

    def sigma2_t(t: float) -> float:
        out = 0.0
        if alpha <= 1.0:
            out += model1_sigma2(analysis, spec, t)
        if alpha >= 1.0:
            out += rho_t(t)
        return out

    return LimitSummary(
        rho_t=rho_t,
        sigma2_t=sigma2_t,
        rho_inf=lambda_inf / mu_inf,
        sigma2_inf=sigma2_t(math.inf),
        regime=regime_for(alpha),
    )


def rho2_vector(pi: NDArray[np.float64], spec: ModelSpec, t: float) -> NDArray[np.float64]:
    """Per-type fluid means pi_k lambda_k / mu_k (1 - e^{-mu_k t})."""
    return pi * spec.lam / spec.mu * (-np.expm1(-spec.mu * t))


def model2_matrices(analysis: ChainAnalysis, spec: ModelSpec, alpha: float,
                    t: float) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Symmetrized deviation matrix and the per-type covariance matrices.

    Returns (dbar, v, c): dbar is the pi-symmetrized deviation matrix, v the
    slow-switching covariance matrix at horizon t, and c the full limit
    covariance, which adds the per-type fluid means on the diagonal when
    alpha >= 1.
    """
    pi, dev = analysis.pi, analysis.deviation
    lam, mu = spec.lam, spec.mu
    pd = pi[:, None] * dev
    dbar = pd + pd.T
    msum = mu[:, None] + mu[None, :]
    v = lam[:, None] * lam[None, :] * dbar / msum * (-np.expm1(-msum * t))
    c = np.zeros_like(v)
    if alpha <= 1.0:
        c = c + v
    if alpha >= 1.0:
        c = c + np.diag(rho2_vector(pi, spec, t))
    return dbar, v, c


def model2_total_variance(v: NDArray[np.float64], rho2: NDArray[np.float64],
                          alpha: float) -> float:
    """Scalar limit variance of the total count for the typed-job model."""
    out = 0.0
    if alpha <= 1.0:
        out += float(v.sum())
    if alpha >= 1.0:
        out += float(rho2.sum())
    return out


def cov_cross_time(lambda_inf: float, mu: float, u: float, scaling: Scaling,
                   s: float, t: float) -> float:
    """Large-N covariance of the counts at times s <= t (uniform rates).

    At s = t this reduces to the variance expansion
    N rho(t) + N^{2-alpha} (1 - e^{-2 mu t}) U / mu.
    """
    if s > t:
        raise OrderViolation(f"need s <= t, got s={s}, t={t}")
    n = float(scaling.n_scale)
    decay = math.exp(-mu * (t - s))
    poisson_term = n * rho_uniform(lambda_inf, mu, s) * decay
    modulation_term = n ** (2.0 - scaling.alpha) * (u / mu) * decay * (-math.expm1(-2.0 * mu * s))
    return poisson_term + modulation_term


def check_matrix(mu: float, u: float, lambda_inf: float, alpha: float, t: float,
                 offsets) -> NDArray[np.float64]:
    """Limit covariance matrix of the counts observed at times t + s_k.

    Entry (k, l) with s_k >= s_l couples a variance factor at horizon
    t + s_l with the exponential decay e^{-mu (s_k - s_l)}.  As t -> inf the
    correlations approach e^{-mu |s_k - s_l|}, the Ornstein-Uhlenbeck
    structure.
    """
    s = np.asarray(offsets, dtype=np.float64)
    if s.ndim != 1 or s.size < 1:
        raise UnsortedOffsets("offsets must be a nonempty vector")
    if s[0] != 0.0:
        raise UnsortedOffsets(f"first offset must be 0, got {s[0]}")
    if (np.diff(s) < 0.0).any():
        raise UnsortedOffsets(f"offsets must be nondecreasing, got {s}")

    k = s.size
    out = np.zeros((k, k))
    for kk in range(k):
        for ll in range(kk + 1):
            scale = 0.0
            if alpha <= 1.0:
                scale += (u / mu) * (-math.expm1(-2.0 * mu * (t + s[ll])))
            if alpha >= 1.0:
                scale += (lambda_inf / mu) * (-math.expm1(-mu * (t + s[ll])))
            val = scale * math.exp(-mu * (s[kk] - s[ll]))
            out[kk, ll] = val
            out[ll, kk] = val
    return out


def variance_asymptotic(lambda_inf: float, mu: float, u: float, scaling: Scaling,
                        t: float) -> float:
    """Finite-N variance expansion N rho(t) + N^{2-alpha} (1-e^{-2 mu t}) U/mu."""
    return cov_cross_time(lambda_inf, mu, u, scaling, t, t)
