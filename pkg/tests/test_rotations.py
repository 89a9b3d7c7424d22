import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from dcovica.errors import InputError, NotOrthogonalError, ReflectionError
from dcovica.rotations import (
    angle_pairs,
    canonical_theta,
    check_rotation,
    dim_from_n_angles,
    givens,
    n_angles,
    partial_product,
    sign_canonical,
    stage_slice,
    theta_from_w,
    upper_bounds,
    w_from_theta,
)


def _random_theta(rng, d):
    return rng.uniform(0, 1, n_angles(d)) * upper_bounds(d)


def _explicit_product(theta, d):
    # Straight matrix product of Givens factors in storage order.
    w = np.eye(d)
    for psi, (i, j) in zip(theta, angle_pairs(d)):
        w = givens(d, i, j, psi) @ w
    return w


# ----------------------------------------------------------------- layout


def test_angle_counts():
    assert [n_angles(d) for d in (1, 2, 3, 4, 5)] == [0, 1, 3, 6, 10]
    assert dim_from_n_angles(6) == 4
    with pytest.raises(InputError):
        dim_from_n_angles(4)


def test_pair_order_and_stages():
    assert angle_pairs(4) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert stage_slice(4, 0) == slice(0, 3)
    assert stage_slice(4, 2) == slice(5, 6)
    with pytest.raises(InputError):
        stage_slice(4, 3)
    np.testing.assert_allclose(upper_bounds(3), [2 * math.pi, 2 * math.pi, math.pi])


# ---------------------------------------------------------------- givens


def test_givens_quarter_turn():
    np.testing.assert_allclose(givens(2, 0, 1, math.pi / 2), [[0, -1], [1, 0]], atol=1e-15)


def test_givens_embedded():
    g = givens(3, 0, 2, math.pi / 3)
    c, s = 0.5, math.sqrt(3) / 2
    np.testing.assert_allclose(g, [[c, 0, -s], [0, 1, 0], [s, 0, c]], atol=1e-15)


def test_givens_zero_is_identity():
    np.testing.assert_array_equal(givens(4, 1, 3, 0.0), np.eye(4))


@pytest.mark.parametrize("i,j", [(1, 1), (2, 1), (0, 3), (-1, 1)])
def test_givens_bad_indices(i, j):
    with pytest.raises(InputError):
        givens(3, i, j, 0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(-10, 10), st.data())
def test_givens_is_rotation(d, psi, data):
    i = data.draw(st.integers(0, d - 2))
    j = data.draw(st.integers(i + 1, d - 1))
    g = givens(d, i, j, psi)
    np.testing.assert_allclose(g @ g.T, np.eye(d), atol=1e-14)
    assert np.linalg.det(g) == pytest.approx(1.0)


# ---------------------------------------------------------- w_from_theta


def test_w_zero_is_identity():
    np.testing.assert_array_equal(w_from_theta(np.zeros(6)), np.eye(4))


def test_w_d2():
    np.testing.assert_allclose(w_from_theta([math.pi / 2]), [[0, -1], [1, 0]], atol=1e-15)


def test_w_d3_single_angle():
    np.testing.assert_allclose(w_from_theta([0, 0, math.pi / 2]), givens(3, 1, 2, math.pi / 2), atol=1e-15)


def test_w_matches_explicit_product(rng):
    for d in (2, 3, 4, 6):
        theta = rng.uniform(-7, 7, n_angles(d))
        np.testing.assert_allclose(w_from_theta(theta), _explicit_product(theta, d), atol=1e-13)


def test_w_rejects_bad_input():
    with pytest.raises(InputError):
        w_from_theta(np.zeros(2))
    with pytest.raises(InputError):
        w_from_theta([np.nan])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_w_is_special_orthogonal(d, seed):
    w = w_from_theta(np.random.default_rng(seed).uniform(-20, 20, n_angles(d)))
    np.testing.assert_allclose(w @ w.T, np.eye(d), atol=1e-12)
    assert np.linalg.det(w) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_periodic_angles_give_same_w(d, seed):
    rng = np.random.default_rng(seed)
    theta = _random_theta(rng, d)
    shift = 2 * math.pi * rng.integers(-3, 4, theta.size)
    np.testing.assert_allclose(w_from_theta(theta + shift), w_from_theta(theta), atol=1e-11)


# -------------------------------------------------------------- inverse


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_round_trip_from_theta(d, seed):
    theta = _random_theta(np.random.default_rng(seed), d)
    back = theta_from_w(w_from_theta(theta))
    np.testing.assert_allclose(back, theta, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_round_trip_from_haar(d, seed):
    w = special_ortho_group.rvs(d, random_state=seed) if d > 1 else np.eye(1)
    theta = theta_from_w(w)
    np.testing.assert_allclose(w_from_theta(theta), w, atol=1e-10)
    assert np.all(theta >= 0) and np.all(theta < upper_bounds(d) + 1e-12)


def test_canonical_theta_same_rotation(rng):
    for d in (2, 3, 5):
        theta = rng.uniform(-10, 10, n_angles(d))
        canon = canonical_theta(theta)
        np.testing.assert_allclose(w_from_theta(canon), w_from_theta(theta), atol=1e-10)
        assert np.all(canon >= 0) and np.all(canon < upper_bounds(d) + 1e-12)


def test_inverse_rejects_reflection():
    with pytest.raises(ReflectionError):
        theta_from_w(np.diag([1.0, 1.0, -1.0]))


def test_inverse_rejects_non_orthogonal():
    with pytest.raises(NotOrthogonalError):
        theta_from_w([[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(InputError):
        check_rotation(np.eye(3)[:2])


def test_identity_inverse():
    np.testing.assert_allclose(theta_from_w(np.eye(4)), np.zeros(6), atol=1e-15)


# ------------------------------------------------------- stage structure


def test_partial_product_rows(rng):
    d = 5
    theta = _random_theta(rng, d)
    w = w_from_theta(theta)
    for k in range(1, d):
        p = partial_product(theta, k)
        np.testing.assert_allclose(p[:k], w[:k], atol=1e-13)
    np.testing.assert_allclose(partial_product(theta, d - 1), w, atol=1e-15)
    with pytest.raises(InputError):
        partial_product(theta, 0)


def test_row_depends_on_earlier_stages_only(rng):
    d = 5
    theta = _random_theta(rng, d)
    w = w_from_theta(theta)
    for k in range(d - 1):
        changed = theta.copy()
        later = np.arange(theta.size) >= stage_slice(d, k).stop
        changed[later] = rng.uniform(0, 3, later.sum())
        np.testing.assert_allclose(w_from_theta(changed)[: k + 1], w[: k + 1], atol=1e-13)


# ------------------------------------------------------------ properties


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_group_closure(d, seed):
    rng = np.random.default_rng(seed)
    prod = w_from_theta(_random_theta(rng, d)) @ w_from_theta(_random_theta(rng, d))
    np.testing.assert_allclose(w_from_theta(theta_from_w(prod)), prod, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_lipschitz_bound(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-4, 4, n_angles(d))
    b = a + rng.normal(scale=rng.choice([1e-3, 0.1, 1.0]), size=a.size)
    lhs = np.linalg.norm(w_from_theta(a) - w_from_theta(b))
    assert lhs <= math.sqrt(2 * a.size) * np.linalg.norm(a - b) + 1e-12


def test_sign_canonical(rng):
    w = special_ortho_group.rvs(4, random_state=3)
    s = sign_canonical(-w)
    np.testing.assert_allclose(np.abs(s), np.abs(w))
    assert np.all(s[np.arange(4), np.argmax(np.abs(s), axis=1)] > 0)
