"""Shared fixtures and chain-generation helpers for the test suite."""

import numpy as np
import pytest

from mmisq import ModelSpec, Scaling, Variant, analyze, validate_generator

MASTER_SEED = 20260809


def random_irreducible_generator(d: int, rng: np.random.Generator):
    """Random dense generator; dense positive off-diagonals are irreducible."""
    if d == 1:
        return validate_generator([[0.0]])
    q = rng.uniform(0.2, 2.0, size=(d, d))
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return validate_generator(q)


@pytest.fixture(scope="session")
def two_state():
    """Symmetric two-state chain with rate 1: pi = (1/2, 1/2), D = [[.25,-.25],[-.25,.25]]."""
    g = validate_generator([[-1.0, 1.0], [1.0, -1.0]])
    return g, analyze(g)


@pytest.fixture(scope="session")
def spec_uniform():
    return ModelSpec(lam=[1.0, 3.0], mu=[1.0, 1.0], variant=Variant.MODEL_I)


@pytest.fixture(scope="session")
def spec_hetero():
    return ModelSpec(lam=[1.0, 3.0], mu=[1.0, 2.0], variant=Variant.MODEL_I)


@pytest.fixture(scope="session")
def spec_typed():
    return ModelSpec(lam=[1.0, 3.0], mu=[1.0, 2.0], variant=Variant.MODEL_II)


def scaling(n: int, alpha: float) -> Scaling:
    return Scaling(n_scale=n, alpha=alpha)
