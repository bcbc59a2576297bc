"""Generator validation, stationary laws, deviation matrices, time reversal."""

import math

import numpy as np
import pytest
from conftest import random_irreducible_generator
from numpy.testing import assert_allclose
from scipy.integrate import quad_vec
from scipy.linalg import expm
from scipy.linalg import null_space

from mmisq import analyze, time_reverse, transition_matrix, validate_generator
from mmisq.errors import NegativeRate, Reducible, RowSumViolation


def deviation_by_quadrature(q, pi, tol=1e-12):
    """Independent oracle: integrate expm(Q t) - outer(1, pi) until the tail
    is negligible.  The horizon comes from the spectral gap of Q."""
    d = q.shape[0]
    if d == 1:
        return np.zeros((1, 1))
    eig = np.linalg.eigvals(q)
    gap = min(-e.real for e in eig if abs(e) > 1e-9)
    horizon = (math.log(1e13) + math.log(10.0 * d)) / gap
    ergodic = np.outer(np.ones(d), pi)
    val, _ = quad_vec(lambda t: expm(q * t) - ergodic, 0.0, horizon, epsabs=tol)
    return val


# --- validation ---------------------------------------------------------

def test_single_state_is_valid():
    g = validate_generator([[0.0]])
    assert g.dim == 1
    assert g.rates[0, 0] == 0.0


def test_two_state_valid_by_inspection():
    g = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
    assert_allclose(g.rates.sum(axis=1), 0.0, atol=1e-15)


def test_row_sum_violation():
    with pytest.raises(RowSumViolation):
        validate_generator([[-1.0, 0.5], [1.0, -1.0]])


def test_negative_rate():
    with pytest.raises(NegativeRate):
        validate_generator([[-1.0, 1.0], [-0.5, 0.5]])


def test_reducible():
    with pytest.raises(Reducible):
        validate_generator([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(Reducible):
        # one-way flow: state 1 unreachable from 0
        validate_generator([[0.0, 0.0], [1.0, -1.0]])


def test_non_square_rejected():
    with pytest.raises(ValueError):
        validate_generator([[0.0, 0.0]])


def test_diagonal_repair_within_tolerance():
    g = validate_generator([[-1.0 - 4e-10, 1.0], [2.0, -2.0 + 4e-10]])
    assert_allclose(g.rates.sum(axis=1), 0.0, atol=1e-15)
    assert_allclose(g.rates[0, 0], -1.0)


# --- analyze ------------------------------------------------------------

def test_analyze_single_state_identity_case():
    an = analyze(validate_generator([[0.0]]))
    assert_allclose(an.pi, [1.0])
    assert_allclose(an.ergodic, [[1.0]])
    assert_allclose(an.fundamental, [[1.0]])
    assert_allclose(an.deviation, [[0.0]])


@pytest.mark.parametrize("q_rate", [1.0, 2.5])
def test_symmetric_two_state_deviation(q_rate):
    g = validate_generator([[-q_rate, q_rate], [q_rate, -q_rate]])
    an = analyze(g)
    assert_allclose(an.pi, [0.5, 0.5], atol=1e-13)
    expected = (1.0 / (4.0 * q_rate)) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert_allclose(an.deviation, expected, atol=1e-12)
    oracle = deviation_by_quadrature(g.rates, an.pi)
    assert_allclose(an.deviation, oracle, atol=1e-8)


def test_asymmetric_two_state_pi():
    g = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
    an = analyze(g)
    assert_allclose(an.pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-13)
    # independent route: null space of Q^T, normalized
    ns = null_space(g.rates.T)[:, 0]
    assert_allclose(an.pi, ns / ns.sum(), atol=1e-10)


def test_identities_on_random_generators():
    rng = np.random.default_rng(7)
    for d in [1, 2, 3, 4, 6]:
        g = random_irreducible_generator(d, rng)
        an = analyze(g)
        eye = np.eye(d)
        ones = np.ones(d)
        assert np.abs(g.rates @ an.fundamental - (an.ergodic - eye)).max() < 1e-10
        assert np.abs(an.fundamental @ g.rates - (an.ergodic - eye)).max() < 1e-10
        assert np.abs(an.ergodic @ an.deviation).max() < 1e-10
        assert np.abs(an.deviation @ an.ergodic).max() < 1e-10
        assert np.abs(an.fundamental @ ones - ones).max() < 1e-10
        assert np.abs(an.deviation @ ones).max() < 1e-10
        assert np.abs(an.pi @ an.deviation).max() < 1e-10


def test_deviation_matches_integral_on_random_generators():
    rng = np.random.default_rng(11)
    for d in [2, 3, 5]:
        g = random_irreducible_generator(d, rng)
        an = analyze(g)
        assert np.abs(an.deviation - deviation_by_quadrature(g.rates, an.pi)).max() < 1e-8


# --- transition matrices --------------------------------------------------

def test_transition_matrix_t0_identity(two_state):
    g, _ = two_state
    assert_allclose(transition_matrix(g, 0.0), np.eye(2), atol=1e-14)


def test_transition_matrix_two_state_closed_form():
    q_rate = 1.7
    g = validate_generator([[-q_rate, q_rate], [q_rate, -q_rate]])
    # eigendecomposition oracle, independent of the matrix exponential
    w, v = np.linalg.eig(g.rates)
    for t in [0.1, 0.6, 2.3]:
        p = transition_matrix(g, t)
        assert_allclose(p[0, 0], 0.5 + 0.5 * math.exp(-2.0 * q_rate * t), atol=1e-12)
        oracle = (v * np.exp(w * t)) @ np.linalg.inv(v)
        assert_allclose(p, oracle.real, atol=1e-10)
        assert p.min() >= 0.0 and p.max() <= 1.0
        assert_allclose(p.sum(axis=1), 1.0, atol=1e-10)


def test_transition_matrix_ergodic_limit():
    rng = np.random.default_rng(3)
    g = random_irreducible_generator(4, rng)
    an = analyze(g)
    t = 1e6 / g.exit_rates.min()
    p = transition_matrix(g, t)
    assert np.abs(p - an.ergodic).max() < 1e-8


def test_semigroup_property():
    rng = np.random.default_rng(5)
    g = random_irreducible_generator(3, rng)
    for s, t in [(0.3, 0.9), (1.5, 2.5)]:
        assert np.abs(transition_matrix(g, s + t)
                      - transition_matrix(g, s) @ transition_matrix(g, t)).max() < 1e-9


def test_transition_matrix_rejects_negative_time(two_state):
    g, _ = two_state
    with pytest.raises(ValueError):
        transition_matrix(g, -0.1)


# --- time reversal --------------------------------------------------------

def test_time_reverse_symmetric_chain_is_identity(two_state):
    g, an = two_state
    rev = time_reverse(g, an.pi)
    assert_allclose(rev.rates, g.rates, atol=1e-14)


def test_time_reverse_three_state_cycle():
    r = 0.8
    g = validate_generator([[-r, r, 0.0], [0.0, -r, r], [r, 0.0, -r]])
    an = analyze(g)
    assert_allclose(an.pi, np.full(3, 1.0 / 3.0), atol=1e-13)
    rev = time_reverse(g, an.pi)
    # uniform-rate clockwise cycle reverses into the counterclockwise cycle
    expected = np.array([[-r, 0.0, r], [r, -r, 0.0], [0.0, r, -r]])
    assert_allclose(rev.rates, expected, atol=1e-13)


def test_time_reverse_preserves_stationary_and_is_involution():
    rng = np.random.default_rng(13)
    for d in [2, 3, 5]:
        g = random_irreducible_generator(d, rng)
        pi = analyze(g).pi
        rev = time_reverse(g, pi)
        assert_allclose(analyze(rev).pi, pi, atol=1e-11)
        back = time_reverse(rev, analyze(rev).pi)
        assert np.abs(back.rates - g.rates).max() < 1e-12
