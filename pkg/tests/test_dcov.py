import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from dcovica.dcov import (
    chain_dcov,
    dcov_brute,
    dcov_fast,
    dcov_ustat,
    pairwise_distances,
)
from dcovica.errors import InputError, InsufficientDataError


def _loop_distances(x):
    n = x.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = math.sqrt(sum((x[i, k] - x[j, k]) ** 2 for k in range(x.shape[1])))
    return out


# ------------------------------------------------------------- distances


def test_distances_1d():
    np.testing.assert_array_equal(pairwise_distances([[0.0], [3.0]]), [[0, 3], [3, 0]])


def test_distances_345():
    assert pairwise_distances([[0.0, 0.0], [3.0, 4.0]])[0, 1] == 5.0


def test_distances_identical_rows():
    np.testing.assert_array_equal(pairwise_distances(np.ones((4, 2))), np.zeros((4, 4)))


def test_distances_match_loops(rng):
    x = rng.normal(size=(9, 3))
    d = pairwise_distances(x)
    np.testing.assert_allclose(d, _loop_distances(x), atol=1e-14)
    np.testing.assert_array_equal(d, d.T)
    np.testing.assert_array_equal(np.diag(d), 0.0)


# ---------------------------------------------------------- U-statistic


def test_constant_samples_give_zero():
    x = np.ones((6, 1))
    y = np.full((6, 2), 3.0)
    s = dcov_ustat(x, y)
    assert s.i_n == 0.0 and s.t1 == s.t2 == s.t3 == 0.0


def test_three_points_hand_expanded():
    x = np.array([[0.0], [1.0], [2.0]])
    s = dcov_ustat(x, x)
    # Pairs (0,1),(0,2),(1,2) have distances 1,2,1.
    t1 = (1 + 4 + 1) / 3
    t2 = ((1 + 2 + 1) / 3) ** 2
    # One triple; its six cross products are 1*2, 2*1, 1*1, 1*1, 2*1, 1*2.
    t3 = (2 + 2 + 1 + 1 + 2 + 2) / 3
    assert s.t1 == pytest.approx(t1) and s.t2 == pytest.approx(t2) and s.t3 == pytest.approx(t3)
    b = dcov_brute(x, x)
    assert abs(s.i_n - b.i_n) < 1e-12


def test_matches_brute_n25(rng):
    x = rng.normal(size=(25, 2))
    y = rng.normal(size=(25, 3)) + x[:, :1]
    assert abs(dcov_ustat(x, y).i_n - dcov_brute(x, y).i_n) < 1e-10


def test_matches_brute_50_instances(rng):
    for _ in range(50):
        n = int(rng.integers(3, 31))
        x = rng.standard_t(3, size=(n, int(rng.integers(1, 4))))
        y = rng.exponential(size=(n, int(rng.integers(1, 4))))
        u, b, f = dcov_ustat(x, y), dcov_brute(x, y), dcov_fast(x, y)
        for name in ("t1", "t2", "t3"):
            assert abs(getattr(u, name) - getattr(b, name)) < 1e-10
            assert abs(getattr(f, name) - getattr(b, name)) < 1e-10


def test_repeated_row_is_finite(rng):
    x = rng.normal(size=(8, 2))
    x[3] = x[5]
    s = dcov_brute(x, x)
    assert np.isfinite([s.t1, s.t2, s.t3]).all()
    assert abs(dcov_ustat(x, x).i_n - s.i_n) < 1e-10


def test_terms_nonnegative(rng):
    for _ in range(20):
        s = dcov_fast(rng.normal(size=(15, 2)), rng.normal(size=(15, 1)))
        assert s.t1 >= 0 and s.t2 >= 0 and s.t3 >= 0
        assert s.i_n == s.t1 + s.t2 - s.t3


def test_can_be_negative(rng):
    # Unbiasedness means finite-sample values scatter around 0 under independence.
    vals = [dcov_fast(rng.normal(size=(20, 1)), rng.normal(size=(20, 1))).i_n for _ in range(50)]
    assert min(vals) < 0 < max(vals)


def test_too_few_rows():
    with pytest.raises(InsufficientDataError):
        dcov_ustat(np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(InsufficientDataError):
        dcov_brute(np.zeros((2, 1)), np.zeros((2, 1)))


def test_mismatched_rows():
    with pytest.raises(InputError):
        dcov_ustat(np.zeros((4, 1)), np.zeros((5, 1)))


def test_symmetry(rng):
    x, y = rng.normal(size=(30, 2)), rng.normal(size=(30, 3))
    assert dcov_ustat(x, y).i_n == dcov_ustat(y, x).i_n
    assert dcov_fast(x, y).i_n == dcov_fast(y, x).i_n


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(0.1, 10.0) | st.floats(-10.0, -0.1),
    st.floats(0.1, 10.0) | st.floats(-10.0, -0.1),
)
def test_invariance_law(seed, b1, b2):
    rng = np.random.default_rng(seed)
    n, p, q = 20, int(rng.integers(1, 4)), int(rng.integers(1, 4))
    x, y = rng.normal(size=(n, p)), rng.normal(size=(n, q)) + rng.normal(size=(n, 1))
    c1 = ortho_group.rvs(p, random_state=rng) if p > 1 else np.array([[rng.choice([-1.0, 1.0])]])
    c2 = ortho_group.rvs(q, random_state=rng) if q > 1 else np.array([[rng.choice([-1.0, 1.0])]])
    a1, a2 = rng.normal(size=p), rng.normal(size=q)
    lhs = dcov_fast(a1 + b1 * x @ c1.T, a2 + b2 * y @ c2.T).i_n
    # Every term is a product of one x-distance and one y-distance.
    rhs = abs(b1 * b2) * dcov_fast(x, y).i_n
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)


def test_square_root_scale_factor_needs_unit_product(rng):
    # sqrt(|b1||b2|) is the factor for the square root of the statistic;
    # on the statistic itself it only agrees when |b1 b2| = 1.
    x = rng.normal(size=(30, 2))
    y = x[:, :1] + 0.5 * rng.normal(size=(30, 1))
    base = dcov_fast(x, y).i_n
    assert dcov_fast(2.0 * x, 0.5 * y).i_n == pytest.approx(base, rel=1e-12)
    scaled = dcov_fast(2.0 * x, 3.0 * y).i_n
    assert scaled == pytest.approx(6.0 * base, rel=1e-12)
    assert abs(scaled - math.sqrt(6.0) * base) > 0.1 * abs(base)


def test_unbiased_under_independence():
    rng = np.random.default_rng(7)
    vals = np.array([dcov_fast(rng.normal(size=(15, 1)), rng.exponential(size=(15, 2))).i_n for _ in range(2000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean()) < 3 * se


@pytest.mark.slow
def test_consistent_against_dependence():
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(200):
        x = rng.normal(size=(200, 1))
        obs = 200 * dcov_fast(x, x).i_n
        null = [200 * dcov_fast(x, x[rng.permutation(200)]).i_n for _ in range(99)]
        hits += obs > np.quantile(null, 0.99)
    assert hits >= 0.95 * 200


# ----------------------------------------------------------------- chain


def test_chain_matches_stagewise(rng):
    s = rng.normal(size=(40, 5))
    s[:, 3] += s[:, 0]
    expect = [dcov_ustat(s[:, [k]], s[:, k + 1:]).i_n for k in range(4)]
    np.testing.assert_allclose(chain_dcov(s), expect, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(chain_dcov(s, 2), expect[:2], rtol=1e-12, atol=1e-14)


def test_chain_bad_stage_count(rng):
    with pytest.raises(InputError):
        chain_dcov(rng.normal(size=(10, 3)), 3)
