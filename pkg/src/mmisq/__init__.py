"""Markov-modulated infinite-server queues under (N, alpha) scaling.

Three mutually independent computational routes to the same quantities:
closed-form limit laws (:mod:`mmisq.limits`), exact finite-N moment systems
(:mod:`mmisq.moments`), and Monte Carlo simulation (:mod:`mmisq.simulate`),
with a statistical verification harness (:mod:`mmisq.experiments`) and a
CLI (``mmisq``).
"""

from ._backend import BACKEND
from .markov import ChainAnalysis, Generator, analyze, time_reverse, transition_matrix, validate_generator
from .model import STATIONARY, ModelSpec, Regime, Scaling, Variant

__all__ = [
    "BACKEND",
    "ChainAnalysis",
    "Generator",
    "ModelSpec",
    "Regime",
    "STATIONARY",
    "Scaling",
    "Variant",
    "analyze",
    "time_reverse",
    "transition_matrix",
    "validate_generator",
]

__version__ = "0.1.0"
