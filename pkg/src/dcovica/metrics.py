"""
Mixing-matrix error invariant to the scale, sign and order ambiguities:

    D(M0, M) = inf_C || C M^-1 M0 - I ||_F / sqrt(d - 1)

with ``C`` ranging over products of a signed permutation and a positive
diagonal matrix.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputError, SingularMatrixError

MAX_COND = 1e12
EXHAUSTIVE_MAX_D = 8


@dataclass(frozen=True)
class ErrorBreakdown:
    """Value of ``D`` with the minimizing assignment.

    Output row ``i`` of ``C M^-1 M0`` is ``best_scales[i]`` times row
    ``best_permutation[i]`` of ``M^-1 M0``.
    """

    distance: float
    best_permutation: np.ndarray
    best_scales: np.ndarray


def _check_pair(m0, m_hat) -> tuple[np.ndarray, np.ndarray]:
    m0 = np.asarray(m0, dtype=np.float64)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    if m0.ndim != 2 or m0.shape[0] != m0.shape[1] or m0.shape != m_hat.shape:
        raise InputError(f"need two square matrices of equal size, got {m0.shape} and {m_hat.shape}")
    if m0.shape[0] < 2:
        raise InputError("the error metric needs d >= 2")
    for name, m in (("m0", m0), ("m_hat", m_hat)):
        if not np.all(np.isfinite(m)):
            raise InputError(f"{name} has non-finite entries")
        if np.linalg.cond(m) > MAX_COND:
            raise SingularMatrixError(f"{name} is singular or nearly so")
    return m0, m_hat


def _row_costs(g: np.ndarray) -> np.ndarray:
    # cost[i, r]: residual of the best scaled copy of row r of g placed at row i.
    norms = np.einsum("ij,ij->i", g, g)
    return 1.0 - (g.T ** 2) / norms[None, :]


def mixing_error(m0, m_hat) -> ErrorBreakdown:
    """Ambiguity-invariant distance between a true and an estimated mixing matrix."""
    m0, m_hat = _check_pair(m0, m_hat)
    d = m0.shape[0]
    g = np.linalg.solve(m_hat, m0)
    cost = _row_costs(g)
    if d <= EXHAUSTIVE_MAX_D:
        perms = np.array(list(itertools.permutations(range(d))))
        totals = cost[np.arange(d), perms].sum(axis=1)
        best = int(np.argmin(totals))
        perm = perms[best]
        total = totals[best]
    else:
        rows, perm = linear_sum_assignment(cost)
        total = cost[rows, perm].sum()
    norms = np.einsum("ij,ij->i", g, g)
    scales = g[perm, np.arange(d)] / norms[perm]
    dist = math.sqrt(max(float(total), 0.0)) / math.sqrt(d - 1)
    return ErrorBreakdown(dist, perm.copy(), scales)


def default_grid() -> np.ndarray:
    return np.geomspace(1e-3, 1e3, 60001)


def mixing_error_brute(m0, m_hat, grid=None) -> float:
    """Grid-search version of :func:`mixing_error` for ``d <= 3``.

    Enumerates all signed permutations and, since the Frobenius norm adds
    up over rows, scans the positive scale of each row over ``grid``.
    """
    m0, m_hat = _check_pair(m0, m_hat)
    d = m0.shape[0]
    if d > 3:
        raise InputError("brute-force metric is limited to d <= 3")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    g = np.linalg.solve(m_hat, m0)
    eye = np.eye(d)
    # best[i, r, s]: min over grid of ||s * b * g[r] - e_i||^2
    best = np.empty((d, d, 2))
    for i in range(d):
        for r in range(d):
            for si, sign in enumerate((1.0, -1.0)):
                rows = sign * grid[:, None] * g[r][None, :] - eye[i][None, :]
                best[i, r, si] = np.min(np.einsum("ij,ij->i", rows, rows))
    out = math.inf
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((0, 1), repeat=d):
            total = sum(best[i, perm[i], signs[i]] for i in range(d))
            out = min(out, total)
    return math.sqrt(out) / math.sqrt(d - 1)
