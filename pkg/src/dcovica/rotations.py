"""
Givens-angle parameterization of the rotation group SO(d).

Angles are stored in a flat vector of length ``p = d(d-1)/2`` ordered by
pairs ``(0,1), (0,2), ..., (0,d-1), (1,2), ..., (d-2,d-1)`` (zero-based).
The rotation is::

    W = Q^(d-2) ... Q^(0),   Q^(k) = G(k, d-1) ... G(k, k+1)

so the ``k``-th row of ``W`` depends only on the angles of pairs whose
first index is at most ``k``. The canonical domain gives angles of pairs
``(0, j)`` the range ``[0, 2*pi)`` and all other angles ``[0, pi)``.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import InputError, NotOrthogonalError, ReflectionError

TWO_PI = 2.0 * math.pi


def n_angles(d: int) -> int:
    return d * (d - 1) // 2


def dim_from_n_angles(p: int) -> int:
    d = int(round((1 + math.sqrt(1 + 8 * p)) / 2))
    if n_angles(d) != p:
        raise InputError(f"{p} is not a valid number of rotation angles")
    return d


@lru_cache(maxsize=None)
def angle_pairs(d: int) -> tuple[tuple[int, int], ...]:
    """Index pairs ``(i, j)``, ``i < j``, in storage order."""
    return tuple((i, j) for i in range(d) for j in range(i + 1, d))


@lru_cache(maxsize=None)
def _stage_slices(d: int) -> tuple[slice, ...]:
    out = []
    start = 0
    for k in range(d - 1):
        out.append(slice(start, start + d - 1 - k))
        start += d - 1 - k
    return tuple(out)


def stage_slice(d: int, k: int) -> slice:
    """Positions in the angle vector of the pairs ``(k, j)``, ``j > k``."""
    if not 0 <= k < d - 1:
        raise InputError(f"stage index must be in [0, {d - 2}], got {k}")
    return _stage_slices(d)[k]


def upper_bounds(d: int) -> np.ndarray:
    """Length of each angle's canonical range (2*pi on the first row, pi after)."""
    return np.array([TWO_PI if i == 0 else math.pi for i, _ in angle_pairs(d)])


def givens(d: int, i: int, j: int, psi: float) -> np.ndarray:
    """Rotation by ``psi`` in the ``(i, j)`` coordinate plane.

    Identity except ``[i,i] = [j,j] = cos(psi)``, ``[i,j] = -sin(psi)``,
    ``[j,i] = sin(psi)``.
    """
    if not (0 <= i < j < d):
        raise InputError(f"need 0 <= i < j < d, got i={i}, j={j}, d={d}")
    q = np.eye(d)
    c, s = math.cos(psi), math.sin(psi)
    q[i, i] = q[j, j] = c
    q[i, j] = -s
    q[j, i] = s
    return q


def _rotate_rows(w: np.ndarray, i: int, j: int, psi: float) -> None:
    # In place: w <- G(i, j, psi) @ w.
    c, s = math.cos(psi), math.sin(psi)
    ri = w[i].copy()
    rj = w[j]
    w[i] = c * ri - s * rj
    w[j] = s * ri + c * rj


def _rotate_cols_t(w: np.ndarray, i: int, j: int, psi: float) -> None:
    # In place: w <- w @ G(i, j, psi).T.
    c, s = math.cos(psi), math.sin(psi)
    ci = w[:, i].copy()
    cj = w[:, j]
    w[:, i] = c * ci - s * cj
    w[:, j] = s * ci + c * cj


def _check_theta(theta) -> tuple[np.ndarray, int]:
    theta = np.asarray(theta, dtype=np.float64).ravel()
    d = dim_from_n_angles(theta.size)
    if not np.all(np.isfinite(theta)):
        raise InputError("rotation angles must be finite")
    return theta, d


def partial_product(theta, k: int) -> np.ndarray:
    """``Q^(k-1) ... Q^(0)``: the first ``k`` stages of the product.

    Rows ``0 .. k-1`` coincide with those of :func:`w_from_theta`;
    ``k = d - 1`` gives the full rotation.
    """
    theta, d = _check_theta(theta)
    if not 1 <= k <= d - 1:
        raise InputError(f"k must be in [1, {d - 1}], got {k}")
    w = np.eye(d)
    pairs = angle_pairs(d)
    for pos in range(stage_slice(d, k - 1).stop):
        i, j = pairs[pos]
        _rotate_rows(w, i, j, theta[pos])
    return w


def w_from_theta(theta) -> np.ndarray:
    """Rotation matrix for an angle vector.

    Any real angles are accepted; the product is periodic in each angle.
    Use :func:`canonical_theta` for the representative in the canonical
    domain.
    """
    theta, d = _check_theta(theta)
    if d == 1:
        return np.eye(1)
    return partial_product(theta, d - 1)


def check_rotation(w, atol: float = 1e-8) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InputError(f"rotation must be square, got shape {w.shape}")
    d = w.shape[0]
    err = np.abs(w @ w.T - np.eye(d)).max()
    if err > atol:
        raise NotOrthogonalError(f"matrix is not orthogonal (max |WW' - I| = {err:.2e})")
    if np.linalg.det(w) < 0:
        raise ReflectionError("matrix has determinant -1; flip the sign of one row first")
    return w


def _peel_stage(v: np.ndarray, k: int, branches, free_range: bool) -> tuple[list[float], float]:
    """Find stage-``k`` angles that turn row ``k`` of ``v`` into ``e_k``.

    Applies the inverse factors to the columns of ``v`` in place. For the
    first stage ``branches`` picks, per non-final angle, which of the two
    solutions (differing by pi) to take. Later stages must land in
    ``[0, pi)``; the returned violation measures how far they miss.
    """
    d = v.shape[0]
    angles = []
    violation = 0.0
    for pos, j in enumerate(range(k + 1, d)):
        base = math.atan2(-v[k, j], v[k, k])
        if j == d - 1:
            psi = base
            if not free_range:
                if psi < 0.0:
                    violation += -psi
                elif psi > math.pi:
                    violation += psi - math.pi
            psi %= TWO_PI
        elif free_range:
            psi = (base + math.pi * branches[pos]) % TWO_PI
        else:
            psi = base % math.pi
        _rotate_cols_t(v, k, j, psi)
        angles.append(psi)
    return angles, violation


def theta_from_w(w, atol: float = 1e-8) -> np.ndarray:
    """Canonical angles of a rotation: inverse of :func:`w_from_theta`.

    Peels the stages off from the right, zeroing each row outside the
    diagonal with two-argument arctangents. The first row's angles are
    determined only up to a choice of branch per angle; the branch whose
    remaining angles all fall in ``[0, pi)`` is returned (the least
    violating one at boundaries).

    Raises
    ------
    NotOrthogonalError, ReflectionError
    """
    w = check_rotation(w, atol)
    d = w.shape[0]
    if d == 1:
        return np.zeros(0)
    best = None
    for branches in itertools.product((0, 1), repeat=max(d - 2, 0)):
        v = w.copy()
        theta, _ = _peel_stage(v, 0, branches, free_range=True)
        total = 0.0
        for k in range(1, d - 1):
            angles, violation = _peel_stage(v, k, (), free_range=False)
            theta.extend(angles)
            total += violation
        if best is None or total < best[0]:
            best = (total, theta)
        if total <= 1e-12:
            break
    return np.array(best[1])


def canonical_theta(theta) -> np.ndarray:
    """Representative in the canonical domain of the same rotation."""
    return theta_from_w(w_from_theta(theta))


def sign_canonical(w) -> np.ndarray:
    """Flip rows so that each row's largest-modulus entry is positive.

    For display and cross-run comparison only; the result may be a
    reflection.
    """
    w = np.array(w, dtype=np.float64)
    idx = np.argmax(np.abs(w), axis=1)
    signs = np.sign(w[np.arange(w.shape[0]), idx])
    signs[signs == 0] = 1.0
    return w * signs[:, None]
