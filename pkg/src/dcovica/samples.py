"""
Observation matrices: ingestion, centering, scaling and PCA whitening.

A sample matrix is a plain ``numpy.ndarray`` of shape ``(n, d)``: one row
per observation, one column per variable. Functions here validate their
input with :func:`as_samples` and never modify it in place.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateDataError,
    InputError,
    InsufficientDataError,
    SingularCovarianceError,
)

#: Relative eigenvalue threshold below which a covariance is called singular.
EIGEN_RTOL = 1e-12


def as_samples(x, *, min_rows: int = 1, min_cols: int = 1, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite float64 ``(n, d)`` array.

    One-dimensional input is read as a single column.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-D array, got shape {arr.shape}")
    n, d = arr.shape
    if n < min_rows:
        raise InsufficientDataError(f"{name} needs at least {min_rows} rows, got {n}")
    if d < min_cols:
        raise InputError(f"{name} needs at least {min_cols} columns, got {d}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def sample_cov(x: np.ndarray) -> np.ndarray:
    """Sample covariance with divisor ``n - 1`` (rows are observations)."""
    x = as_samples(x, min_rows=2)
    xc = x - x.mean(axis=0)
    return xc.T @ xc / (x.shape[0] - 1)


def center(x) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the column means.

    Returns
    -------
    centered : ndarray, shape (n, d)
    mean : ndarray, shape (d,)
    """
    x = as_samples(x)
    mean = x.mean(axis=0)
    return x - mean, mean


def standardize_columns(x) -> tuple[np.ndarray, np.ndarray]:
    """Divide every column by its sample standard deviation (``ddof=1``).

    Columns are not centered; combine with :func:`center` when needed.

    Raises
    ------
    DegenerateDataError
        If a column has zero spread.
    """
    x = as_samples(x, min_rows=2)
    sds = x.std(axis=0, ddof=1)
    scale = np.maximum(np.abs(x).max(axis=0), 1.0)
    bad = np.flatnonzero(sds <= 1e-14 * scale)
    if bad.size:
        raise DegenerateDataError(f"column {int(bad[0])} has zero standard deviation")
    return x / sds, sds


@dataclass(frozen=True)
class Whitening:
    """PCA whitening ``z = (y - mean) @ uncorrelating.T``.

    ``uncorrelating`` equals ``diag(eigenvalues) ** -1/2 @ eigenvectors.T``
    where the eigen-pairs belong to the sample covariance (divisor n-1),
    sorted by decreasing eigenvalue.
    """

    mean: np.ndarray
    uncorrelating: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    def transform(self, y) -> np.ndarray:
        y = as_samples(y, min_cols=self.d)
        return (y - self.mean) @ self.uncorrelating.T

    def inverse_transform(self, z) -> np.ndarray:
        z = as_samples(z, min_cols=self.d)
        return z @ np.linalg.inv(self.uncorrelating).T + self.mean

    @classmethod
    def identity(cls, d: int) -> "Whitening":
        eye = np.eye(d)
        return cls(np.zeros(d), eye.copy(), np.ones(d), eye.copy())


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of every column made positive.
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def whiten(x) -> tuple[np.ndarray, Whitening]:
    """Center and whiten ``x`` with the PCA transform.

    Returns the whitened data, whose sample covariance is the identity,
    and the fitted :class:`Whitening`.

    Raises
    ------
    SingularCovarianceError
        If any eigenvalue of the sample covariance is below
        ``EIGEN_RTOL`` times the largest one.
    """
    x = as_samples(x, min_rows=2)
    xc, mean = center(x)
    cov = xc.T @ xc / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = _fix_signs(evecs[:, order])
    threshold = EIGEN_RTOL * max(evals[0], 0.0)
    small = np.flatnonzero(evals <= threshold)
    if small.size:
        i = int(small[0])
        raise SingularCovarianceError(i, float(evals[i]), float(threshold))
    uncorrelating = evecs.T / np.sqrt(evals)[:, None]
    return xc @ uncorrelating.T, Whitening(mean, uncorrelating, evals, evecs)


@dataclass(frozen=True)
class VarFit:
    """Least-squares VAR(p) fit.

    ``coefficients[l]`` is the ``(d, d)`` matrix multiplying lag ``l + 1``:
    ``y_t = intercept + sum_l coefficients[l] @ y_{t-l-1} + e_t``.
    """

    intercept: np.ndarray
    coefficients: np.ndarray
    residuals: np.ndarray


def lag_matrix(y: np.ndarray, p: int) -> np.ndarray:
    """Stack lags ``1..p`` of ``y`` side by side for rows ``p..n-1``."""
    n = y.shape[0]
    return np.hstack([y[p - lag:n - lag] for lag in range(1, p + 1)])


def fit_var_ols(y, p: int) -> VarFit:
    """Fit a vector autoregression of order ``p`` by ordinary least squares."""
    y = as_samples(y)
    n, d = y.shape
    if p < 1:
        raise InputError(f"lag order must be positive, got {p}")
    k = d * p + 1
    if n - p <= k:
        raise InsufficientDataError(
            f"VAR({p}) on {d} series needs more than {k + p} rows, got {n}"
        )
    design = np.hstack([np.ones((n - p, 1)), lag_matrix(y, p)])
    target = y[p:]
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < k:
        raise DegenerateDataError(f"collinear VAR regressors (rank {rank} < {k})")
    resid = target - design @ coef
    lags = coef[1:].T.reshape(d, p, d).transpose(1, 0, 2)
    return VarFit(coef[0], lags, resid)


def var_ols_residuals(y, p: int) -> np.ndarray:
    """Residuals (``n - p`` rows) of a VAR(p) fitted by OLS with intercept."""
    return fit_var_ols(y, p).residuals


class CsvData(NamedTuple):
    data: np.ndarray
    header: list[str] | None
    n_dropped: int


def _parse_float(cell: str) -> float:
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(cell)
    return value


def read_csv(path: str | Path) -> CsvData:
    """Read a numeric comma-separated file.

    The first row is taken as a header when any of its cells is not a
    number. Rows with an empty cell are dropped and counted; any other
    non-numeric cell raises :class:`InputError` naming its 1-based row and
    column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data")
    header = None
    first = rows[0]
    try:
        [_parse_float(c) for c in first if c.strip()]
    except ValueError:
        header = [c.strip() for c in first]
        rows = rows[1:]
    width = len(header) if header is not None else len(rows[0]) if rows else 0
    out = []
    dropped = 0
    offset = 2 if header is not None else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: row {i + offset} has {len(row)} cells, expected {width}")
        if any(not c.strip() for c in row):
            dropped += 1
            continue
        values = []
        for j, cell in enumerate(row):
            try:
                values.append(_parse_float(cell.strip()))
            except ValueError:
                raise InputError(
                    f"{path}: non-numeric cell {cell!r} at row {i + offset}, column {j + 1}"
                ) from None
        out.append(values)
    if not out:
        raise InputError(f"{path}: no complete rows")
    return CsvData(np.array(out, dtype=np.float64), header, dropped)


def write_csv(path: str | Path, data: np.ndarray, header: list[str] | None = None) -> None:
    """Write a matrix with full round-trip precision."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in data:
            w.writerow([repr(float(v)) for v in row])
