"""
Tests built on the distance covariance: mutual independence of the
columns of a sample, existence of independent components under a fitted
linear model, and serial independence of a multivariate series.

Every test uses an add-one resampling p-value,

    p = (1 + #{replicates >= observed}) / (1 + number of replicates),

and derives the generator of replicate ``r`` from ``(seed, r)`` alone,
so results do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import child_rng, pmap
from .dcov import chain_dcov, dcov_fast
from .errors import ConvergenceWarning, DegenerateDataError, InputError
from .estimator import IcaFit, fit_ica
from .metrics import mixing_error
from .pit import rank_transform
from .samples import as_samples

DEFAULT_INNER_STARTS = 100


@dataclass
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    n_replicates: int
    replicate_stats: np.ndarray
    seed: int
    details: dict = field(default_factory=dict)

    def critical_value(self, alpha: float) -> float:
        """The ``floor(N * alpha)``-th largest replicate (at least the largest)."""
        return order_statistic_from_top(self.replicate_stats, alpha)

    def reject(self, alpha: float) -> bool:
        return bool(self.statistic > self.critical_value(alpha))


def add_one_p_value(statistic: float, replicates) -> float:
    replicates = np.asarray(replicates, dtype=np.float64)
    return float((1 + np.count_nonzero(replicates >= statistic)) / (1 + replicates.size))


def order_statistic_from_top(values, alpha: float) -> float:
    """The ``j``-th largest of ``values`` with ``j = max(1, floor(N * alpha))``."""
    values = np.sort(np.asarray(values, dtype=np.float64))[::-1]
    if values.size == 0:
        raise InputError("no replicates available")
    if not 0 < alpha <= 1:
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    j = min(max(1, math.floor(values.size * alpha + 1e-9)), values.size)
    return float(values[j - 1])


def _check_count(name: str, value: int) -> int:
    if int(value) < 1:
        raise InputError(f"{name} must be at least 1, got {value}")
    return int(value)


# --------------------------------------------------------------- mutual


def _u_stat_from_ranks(u: np.ndarray) -> float:
    return float(u.shape[0] * chain_dcov(u).sum())


def mutual_independence_stat(s) -> float:
    """``n`` times the sum over ``k`` of the distance covariance between
    ranked column ``k`` and the ranked block of columns after it."""
    s = as_samples(s, min_rows=3, min_cols=2, name="s")
    return _u_stat_from_ranks(rank_transform(s))


def _permute_columns(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty_like(x)
    for k in range(x.shape[1]):
        out[:, k] = x[rng.permutation(x.shape[0]), k]
    return out


def permutation_test_mutual(s, n_perm: int = 1999, seed: int = 0, threads: int | None = None) -> TestResult:
    """Permutation test of mutual independence of the columns of ``s``.

    Each replicate permutes every column with its own permutation.
    """
    s = as_samples(s, min_rows=3, min_cols=2, name="s")
    n_perm = _check_count("n_perm", n_perm)
    u = rank_transform(s)
    observed = _u_stat_from_ranks(u)

    def replicate(r: int) -> float:
        return _u_stat_from_ranks(_permute_columns(u, child_rng(seed, r)))

    reps = np.array(pmap(replicate, range(n_perm), threads))
    return TestResult(observed, add_one_p_value(observed, reps), n_perm, reps, seed)


# ------------------------------------------------------------ existence


def random_signed_permutation(d: int, seed=0) -> np.ndarray:
    """Uniform random permutation matrix with independent random row signs."""
    if d < 1:
        raise InputError(f"d must be at least 1, got {d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(d)
    signs = rng.choice(np.array([-1.0, 1.0]), size=d)
    out = np.zeros((d, d))
    out[np.arange(d), perm] = signs
    return out


@dataclass
class Resample:
    """Outcome of one replicate of the resampling scheme."""

    u_stat: float
    distance: float
    ok: bool
    reason: str = ""


def _resample_once(fit: IcaFit, r: int, seed: int, inner_starts: int, signed: bool) -> Resample:
    rng = child_rng(seed, r)
    s_star = _permute_columns(fit.sources, rng)
    y_star = s_star @ fit.mixing.T
    # The refit seed is drawn first so that turning the signed permutation
    # off leaves the refits unchanged.
    opts = replace(
        fit.options,
        n_starts=min(fit.options.n_starts, inner_starts),
        seed=int(rng.integers(2**32)),
        threads=1,
    )
    p = random_signed_permutation(fit.w.shape[0], rng) if signed else None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            refit = fit_ica(y_star, opts)
    except DegenerateDataError as exc:
        return Resample(math.nan, math.nan, False, f"degenerate: {exc}")
    if not refit.converged:
        return Resample(math.nan, math.nan, False, "not converged")
    s_hat = refit.sources if p is None else refit.sources @ p.T
    dist = mixing_error(refit.mixing, fit.mixing).distance
    return Resample(mutual_independence_stat(s_hat), dist, True)


def resample_fits(
    y,
    fit: IcaFit,
    n_resamples: int,
    seed: int = 0,
    *,
    inner_starts: int = DEFAULT_INNER_STARTS,
    signed: bool = True,
    threads: int | None = None,
) -> list[Resample]:
    """Run the resampling scheme under the null of independent components.

    Replicate ``r``: permute each column of the fitted sources, remix with
    the fitted mixing matrix, refit with the fit's own options (start
    count capped at ``inner_starts``), optionally apply a random signed
    permutation to the refitted sources, and record their mutual
    independence statistic together with ``D(M*, M_hat)``.
    """
    y = as_samples(y, min_rows=3, min_cols=2, name="y")
    if y.shape != fit.sources.shape:
        raise InputError(f"data shape {y.shape} does not match the fit {fit.sources.shape}")
    n_resamples = _check_count("n_resamples", n_resamples)
    inner_starts = _check_count("inner_starts", inner_starts)
    return pmap(lambda r: _resample_once(fit, r, seed, inner_starts, signed), range(n_resamples), threads)


def _existence_result(fit: IcaFit, reps: list[Resample], seed: int, inner_starts: int, signed: bool) -> TestResult:
    good = np.array([x.u_stat for x in reps if x.ok])
    dropped = len(reps) - good.size
    if good.size == 0:
        raise DegenerateDataError("every resampling replicate failed")
    observed = mutual_independence_stat(fit.sources)
    details = {
        "n_dropped": dropped,
        "drop_reasons": sorted({x.reason for x in reps if not x.ok}),
        "inner_starts": min(fit.options.n_starts, inner_starts),
        "signed_permutation": signed,
        "distances": np.array([x.distance for x in reps if x.ok]),
    }
    return TestResult(observed, add_one_p_value(observed, good), int(good.size), good, seed, details)


def existence_test(
    y,
    fit: IcaFit,
    n_resamples: int = 1999,
    seed: int = 0,
    *,
    inner_starts: int = DEFAULT_INNER_STARTS,
    signed: bool = True,
    threads: int | None = None,
) -> TestResult:
    """Test whether ``y`` has independent components under the fitted model.

    The observed statistic is the mutual independence statistic of the
    fitted sources; replicates come from :func:`resample_fits`. Failed
    refits are dropped and counted in ``details["n_dropped"]``.
    """
    reps = resample_fits(y, fit, n_resamples, seed, inner_starts=inner_starts, signed=signed, threads=threads)
    return _existence_result(fit, reps, seed, inner_starts, signed)


def confidence_radius(
    y,
    fit: IcaFit,
    n_resamples: int = 1999,
    alpha: float = 0.05,
    seed: int = 0,
    *,
    inner_starts: int = DEFAULT_INNER_STARTS,
    threads: int | None = None,
) -> float:
    """Radius ``c`` of the set ``{M : D(M, M_hat) <= c}``.

    ``c`` is the ``floor(N * alpha)``-th largest ``D(M*, M_hat)`` over the
    successful replicates.
    """
    reps = resample_fits(y, fit, n_resamples, seed, inner_starts=inner_starts, signed=False, threads=threads)
    dists = [x.distance for x in reps if x.ok]
    if not dists:
        raise DegenerateDataError("every resampling replicate failed")
    return order_statistic_from_top(dists, alpha)


# --------------------------------------------------------------- serial


def _serial_stat_from_ranks(u: np.ndarray, m: int) -> float:
    n = u.shape[0]
    current = u[m:]
    lags = np.hstack([u[m - lag : n - lag] for lag in range(1, m + 1)])
    return float((n - m) * dcov_fast(current, lags).i_n)


def serial_stat(y, m: int) -> float:
    """``(n - m)`` times the distance covariance between the ranked
    observations at time ``t`` and the stacked lags ``t-1 .. t-m``."""
    y = as_samples(y, min_rows=3, name="y")
    if not 1 <= m < y.shape[0] - 2:
        raise InputError(f"lag count must be in [1, n - 3], got m={m} with n={y.shape[0]}")
    return _serial_stat_from_ranks(rank_transform(y), m)


def serial_test(y, m: int, n_perm: int = 1999, seed: int = 0, threads: int | None = None) -> TestResult:
    """Permutation test of serial independence up to lag ``m``.

    Replicates shuffle whole rows in time (the ranks move with them),
    keeping the cross-sectional dependence intact.
    """
    y = as_samples(y, min_rows=3, name="y")
    n_perm = _check_count("n_perm", n_perm)
    observed = serial_stat(y, m)
    u = rank_transform(y)

    def replicate(r: int) -> float:
        return _serial_stat_from_ranks(u[child_rng(seed, r).permutation(u.shape[0])], m)

    reps = np.array(pmap(replicate, range(n_perm), threads))
    return TestResult(observed, add_one_p_value(observed, reps), n_perm, reps, seed, {"lags": m})
