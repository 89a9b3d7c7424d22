"""
Distance covariance as a sum of U-statistics.

For samples ``x`` (``n x p``) and ``y`` (``n x q``) with distance matrices
``A`` and ``B``::

    T1 = C(n,2)^-1 sum_{i<j} A_ij B_ij
    T2 = [C(n,2)^-1 sum_{i<j} A_ij] [C(n,2)^-1 sum_{i<j} B_ij]
    T3 = C(n,3)^-1 sum_{i<j<k} (1/3) (six cross products sharing a vertex)
    I_n = T1 + T2 - T3

``T3`` estimates ``2 E|X-X'||Y-Y''|`` so that ``I_n`` is unbiased for the
population distance covariance, which is zero under independence.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import _kernels
from .errors import InputError, InsufficientDataError
from .samples import as_samples


@dataclass(frozen=True)
class DcovStat:
    t1: float
    t2: float
    t3: float

    @property
    def i_n(self) -> float:
        return self.t1 + self.t2 - self.t3


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = as_samples(x, name="x")
    y = as_samples(y, name="y")
    if x.shape[0] != y.shape[0]:
        raise InputError(f"sample sizes differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 3:
        raise InsufficientDataError("distance covariance needs n >= 3 (T3 averages triples)")
    return x, y


def pairwise_distances(x) -> np.ndarray:
    """Symmetric ``(n, n)`` matrix of Euclidean distances between rows."""
    x = as_samples(x)
    if x.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(x))


def terms_from_sums(n: int, sum_ab: float, a_tot: float, b_tot: float, sum_rowprod: float) -> DcovStat:
    """Assemble ``T1, T2, T3`` from distance-matrix sums.

    ``sum_ab`` is ``sum_{i != j} A_ij B_ij``, ``a_tot`` and ``b_tot`` the
    totals of ``A`` and ``B``, ``sum_rowprod`` is ``sum_i a_i. b_i.``.
    """
    pairs = n * (n - 1.0)
    t1 = sum_ab / pairs
    t2 = a_tot * b_tot / (pairs * pairs)
    t3 = 2.0 * (sum_rowprod - sum_ab) / (pairs * (n - 2.0))
    return DcovStat(t1, t2, t3)


def dcov_ustat(x, y) -> DcovStat:
    """Distance covariance U-statistic in ``O(n^2)`` time and memory.

    Uses the row-sum identity
    ``sum over ordered distinct triples of A_ij B_ik = sum_i (a_i. b_i. - sum_j A_ij B_ij)``;
    each unordered triple appears there once per product in the defining
    six-term sum, hence the factor two in ``T3``.
    """
    x, y = _check_pair(x, y)
    n = x.shape[0]
    a = pairwise_distances(x)
    b = pairwise_distances(y)
    ab = a * b
    ra = a.sum(axis=1)
    rb = b.sum(axis=1)
    return terms_from_sums(n, ab.sum(), ra.sum(), rb.sum(), float(ra @ rb))


def dcov_fast(x, y) -> DcovStat:
    """Like :func:`dcov_ustat` but streams distances through a compiled loop."""
    x, y = _check_pair(x, y)
    return terms_from_sums(x.shape[0], *_kernels.dcov_terms(x, y))


def dcov_brute(x, y) -> DcovStat:
    """Literal pair and triple sums; an oracle for small ``n``."""
    x, y = _check_pair(x, y)
    n = x.shape[0]

    # Pairwise distances, each computed once from its definition.
    ax = [[float(np.linalg.norm(x[i] - x[j])) for j in range(n)] for i in range(n)]
    by = [[float(np.linalg.norm(y[i] - y[j])) for j in range(n)] for i in range(n)]

    def dx(i, j):
        return ax[i][j]

    def dy(i, j):
        return by[i][j]

    n2 = n * (n - 1) / 2
    n3 = n * (n - 1) * (n - 2) / 6
    s1 = sa = sb = 0.0
    for i, j in combinations(range(n), 2):
        s1 += dx(i, j) * dy(i, j)
        sa += dx(i, j)
        sb += dy(i, j)
    s3 = 0.0
    for i, j, k in combinations(range(n), 3):
        s3 += (
            dx(i, j) * dy(i, k)
            + dx(i, k) * dy(i, j)
            + dx(i, j) * dy(j, k)
            + dx(j, k) * dy(i, j)
            + dx(i, k) * dy(j, k)
            + dx(j, k) * dy(i, k)
        ) / 3.0
    return DcovStat(s1 / n2, (sa / n2) * (sb / n2), s3 / n3)


def chain_dcov(s, n_stages: int | None = None) -> np.ndarray:
    """``I_n(s_k, s_{k+1:})`` for ``k = 0 .. n_stages - 1``.

    ``n_stages`` defaults to ``d - 1``, the full chain.
    """
    s = as_samples(s, min_rows=3, min_cols=2, name="s")
    n, d = s.shape
    if n_stages is None:
        n_stages = d - 1
    if not 1 <= n_stages <= d - 1:
        raise InputError(f"n_stages must be in [1, {d - 1}], got {n_stages}")
    sums = _kernels.chain_terms(s, n_stages)
    return np.array([terms_from_sums(n, *row).i_n for row in sums])
