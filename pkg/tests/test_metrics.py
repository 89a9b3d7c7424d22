import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcovica import metrics
from dcovica.errors import InputError, SingularMatrixError
from dcovica.metrics import mixing_error, mixing_error_brute


def _random_signed_perm_diag(rng, d):
    p = np.eye(d)[rng.permutation(d)] * rng.choice([-1.0, 1.0], d)[:, None]
    return p @ np.diag(rng.uniform(0.2, 5.0, d))


def _well_conditioned(rng, d):
    while True:
        a = rng.normal(size=(d, d))
        if np.linalg.cond(a) < 50:
            return a


def test_identity_zero(rng):
    m0 = _well_conditioned(rng, 3)
    res = mixing_error(m0, m0)
    assert res.distance < 1e-12
    np.testing.assert_array_equal(res.best_permutation, [0, 1, 2])
    np.testing.assert_allclose(res.best_scales, 1.0, atol=1e-12)
    assert mixing_error_brute(m0, m0) < 1e-6


def test_upper_triangular_example():
    assert mixing_error(np.eye(2), [[1.0, 1.0], [0.0, 1.0]]).distance == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_ambiguity_gives_zero(rng):
    for d in (2, 3, 5):
        m0 = _well_conditioned(rng, d)
        m_hat = m0 @ np.linalg.inv(_random_signed_perm_diag(rng, d))
        assert mixing_error(m0, m_hat).distance < 1e-10


def test_matches_brute_force_2x2():
    rng = np.random.default_rng(2)
    step = 10 ** (6 / 60000) - 1
    for _ in range(50):
        m0, m_hat = _well_conditioned(rng, 2), _well_conditioned(rng, 2)
        exact = mixing_error(m0, m_hat).distance
        brute = mixing_error_brute(m0, m_hat)
        assert exact <= brute + 1e-12
        assert brute - exact <= 2 * step


def test_brute_force_3x3_inequality():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m0, m_hat = _well_conditioned(rng, 3), _well_conditioned(rng, 3)
        exact = mixing_error(m0, m_hat).distance
        brute = mixing_error_brute(m0, m_hat)
        assert exact <= brute + 1e-12 and brute - exact < 1e-3


def test_breakdown_reproduces_distance(rng):
    m0, m_hat = _well_conditioned(rng, 4), _well_conditioned(rng, 4)
    res = mixing_error(m0, m_hat)
    g = np.linalg.solve(m_hat, m0)
    c_g = res.best_scales[:, None] * g[res.best_permutation]
    assert np.linalg.norm(c_g - np.eye(4)) / math.sqrt(3) == pytest.approx(res.distance, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_invariances(d, seed):
    rng = np.random.default_rng(seed)
    m0, m_hat = _well_conditioned(rng, d), _well_conditioned(rng, d)
    base = mixing_error(m0, m_hat).distance
    # Column ambiguity of the estimate.
    c = _random_signed_perm_diag(rng, d)
    assert mixing_error(m0, m_hat @ c).distance == pytest.approx(base, abs=1e-9)
    # Common left factor.
    a = _well_conditioned(rng, d)
    assert mixing_error(a @ m0, a @ m_hat).distance == pytest.approx(base, abs=1e-9)
    assert 0.0 <= base <= math.sqrt(d / (d - 1)) + 1e-12


def test_common_scale_invariance(rng):
    m0, m_hat = _well_conditioned(rng, 3), _well_conditioned(rng, 3)
    base = mixing_error(m0, m_hat).distance
    assert mixing_error(7.0 * m0, 7.0 * m_hat).distance == pytest.approx(base, abs=1e-12)
    assert mixing_error(m0, 0.01 * m_hat).distance == pytest.approx(base, abs=1e-12)


def test_singular_and_bad_shapes():
    with pytest.raises(SingularMatrixError):
        mixing_error(np.eye(2), [[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(InputError):
        mixing_error(np.eye(2), np.eye(3))
    with pytest.raises(InputError):
        mixing_error(np.eye(1), np.eye(1))
    with pytest.raises(InputError):
        mixing_error_brute(np.eye(4), np.eye(4))


def test_assignment_solver_matches_enumeration(rng, monkeypatch):
    cases = [(_well_conditioned(rng, d), _well_conditioned(rng, d)) for d in (3, 5, 7) for _ in range(5)]
    exhaustive = [mixing_error(a, b).distance for a, b in cases]
    monkeypatch.setattr(metrics, "EXHAUSTIVE_MAX_D", 1)
    assigned = [mixing_error(a, b).distance for a, b in cases]
    np.testing.assert_allclose(assigned, exhaustive, atol=1e-12)


def test_row_cost_enumeration_oracle(rng):
    # Direct enumeration of permutations with optimal per-row scale.
    d = 4
    m0, m_hat = _well_conditioned(rng, d), _well_conditioned(rng, d)
    g = np.linalg.solve(m_hat, m0)
    best = math.inf
    for perm in itertools.permutations(range(d)):
        total = 0.0
        for i, r in enumerate(perm):
            b = g[r, i] / (g[r] @ g[r])
            total += np.sum((b * g[r] - np.eye(d)[i]) ** 2)
        best = min(best, total)
    assert mixing_error(m0, m_hat).distance == pytest.approx(math.sqrt(best / (d - 1)), rel=1e-10)
