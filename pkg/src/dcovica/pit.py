"""
Probability integral transforms: normalized ranks and a kernel-smoothed
empirical CDF with a Silverman rule-of-thumb bandwidth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from . import _kernels
from .errors import DegenerateDataError, InputError
from .samples import as_samples


def rank_transform(s) -> np.ndarray:
    """Column-wise ranks divided by ``n``; ties get their average rank."""
    s = as_samples(s)
    return rankdata(s, method="average", axis=0) / s.shape[0]


def silverman_bandwidth(col) -> float:
    """``0.9 * min(sd, IQR / 1.34) * n ** (-1/5)``.

    The IQR uses linear interpolation between order statistics. When the
    IQR is zero but the standard deviation is not, the standard deviation
    is used alone.
    """
    col = np.asarray(col, dtype=np.float64).ravel()
    n = col.size
    if n < 2:
        raise InputError("bandwidth needs at least two observations")
    sd = float(np.std(col, ddof=1))
    q75, q25 = np.percentile(col, [75.0, 25.0])
    iqr = float(q75 - q25)
    scale = max(float(np.abs(col).max()), 1.0)
    if not sd > 1e-14 * scale:
        raise DegenerateDataError("cannot choose a bandwidth for a constant column")
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


@dataclass(frozen=True)
class SmoothedCdf:
    """``F(s) = mean_i Phi((s - knot_i) / bandwidth)`` with Gaussian ``Phi``."""

    knots: np.ndarray
    bandwidth: float

    @classmethod
    def fit(cls, col, bandwidth_scale: float = 1.0) -> "SmoothedCdf":
        col = np.asarray(col, dtype=np.float64).ravel()
        h = bandwidth_scale * silverman_bandwidth(col)
        return cls(np.sort(col), h)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        z = (s[..., None] - self.knots) / self.bandwidth
        return ndtr(z).mean(axis=-1)

    def at_knots(self) -> np.ndarray:
        """Values at the (sorted) knots, via the fast series evaluation."""
        return _kernels.smoothed_cdf_series(self.knots, self.bandwidth)


def smoothed_pit(s, bandwidth_scale: float = 1.0) -> np.ndarray:
    """Replace every entry by the smoothed CDF of its own column.

    Column ``k`` uses bandwidth ``bandwidth_scale * silverman_bandwidth(s[:, k])``.
    Outputs lie strictly inside (0, 1) and increase strictly with the input.
    """
    s = as_samples(s, min_rows=2)
    if not bandwidth_scale > 0:
        raise InputError(f"bandwidth_scale must be positive, got {bandwidth_scale}")
    out, bad = _kernels.smoothed_pit_matrix(s, float(bandwidth_scale))
    if bad >= 0:
        raise DegenerateDataError(f"column {bad} is constant; cannot choose a bandwidth")
    return out
