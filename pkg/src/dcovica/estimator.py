"""
Estimation of the separating rotation.

Both estimators minimize a sum over ``k`` of the distance covariance
between source ``k`` and the block of later sources, either on the raw
sources (``"dcov"``) or after a smoothed probability integral transform of
every source (``"pitdcov"``). Minimization is a Latin hypercube scan of
the angle domain followed by Nelder-Mead from the best scan points.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Literal

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from ._parallel import child_rng, pmap
from .dcov import chain_dcov
from .errors import ConvergenceWarning, InputError
from .pit import smoothed_pit
from .rotations import (
    TWO_PI,
    n_angles,
    stage_slice,
    theta_from_w,
    upper_bounds,
    w_from_theta,
)
from .samples import Whitening, as_samples, whiten

Estimator = Literal["dcov", "pitdcov"]
Mode = Literal["joint", "sequential"]

# Edge of the initial Nelder-Mead simplex, in radians.
SIMPLEX_STEP = 0.2


@dataclass(frozen=True)
class FitOptions:
    estimator: Estimator = "pitdcov"
    mode: Mode = "joint"
    n_starts: int = 1000
    bandwidth_scale: float = 1.0
    max_iters: int | None = None  # None: 200 * number of free angles
    f_tol: float = 1e-8
    x_tol: float = 1e-4
    top_m: int = 1
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.estimator not in ("dcov", "pitdcov"):
            raise InputError(f"unknown estimator {self.estimator!r}")
        if self.mode not in ("joint", "sequential"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.n_starts < 1 or self.top_m < 1:
            raise InputError("n_starts and top_m must be at least 1")
        if not (self.f_tol > 0 and self.x_tol > 0 and self.bandwidth_scale > 0):
            raise InputError("tolerances and bandwidth_scale must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise InputError("max_iters must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IcaFit:
    """Result of an ICA fit.

    ``sources = z @ w.T`` for the whitened data ``z``;
    ``mixing = inv(uncorrelating) @ w.T`` so that ``y - mean = sources @ mixing.T``.
    """

    theta: np.ndarray
    w: np.ndarray
    uncorrelating: np.ndarray
    mean: np.ndarray
    mixing: np.ndarray
    sources: np.ndarray
    objective: float
    starts_evaluated: int
    n_evaluations: int
    converged: bool
    options: FitOptions | None = field(default_factory=FitOptions)

    @property
    def separating(self) -> np.ndarray:
        """``w @ uncorrelating``: maps centered observations to sources."""
        return self.w @ self.uncorrelating


def _check_whitened(z) -> np.ndarray:
    z = as_samples(z, min_rows=3, min_cols=2, name="z")
    return z


def sources_at(theta, z) -> np.ndarray:
    return z @ w_from_theta(theta).T


def objective_dcov(theta, z) -> float:
    """Sum over k of ``I_n(S_k, S_{k+1:})`` with ``S = z @ W(theta).T``."""
    z = _check_whitened(z)
    return float(chain_dcov(sources_at(theta, z)).sum())


def objective_pitdcov(theta, z, bandwidth_scale: float = 1.0) -> float:
    """As :func:`objective_dcov` after a smoothed PIT of every source."""
    z = _check_whitened(z)
    u = smoothed_pit(sources_at(theta, z), bandwidth_scale)
    return float(chain_dcov(u).sum())


def stage_objective(theta, z, k: int, estimator: Estimator = "dcov", bandwidth_scale: float = 1.0) -> float:
    """The ``k``-th summand alone, ``I_n(S_k, S_{k+1:})`` (zero-based ``k``)."""
    z = _check_whitened(z)
    block = sources_at(theta, z)[:, k:]
    if estimator == "pitdcov":
        block = smoothed_pit(block, bandwidth_scale)
    return float(chain_dcov(block, 1)[0])


def latin_hypercube_init(p: int, n_points: int, seed=0, bounds=None) -> np.ndarray:
    """``n_points`` angle vectors, one per row, stratified in every coordinate.

    Coordinate ``c`` lies in ``[0, bounds[c])``; by default the canonical
    angle ranges for ``p`` angles. Each of ``n_points`` equal-width bins
    of every coordinate holds exactly one point.
    """
    if n_points < 1:
        raise InputError("n_points must be at least 1")
    if bounds is None:
        from .rotations import dim_from_n_angles

        bounds = upper_bounds(dim_from_n_angles(p))
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (p,):
        raise InputError(f"bounds must have length {p}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    unit = qmc.LatinHypercube(d=p, seed=rng).random(n_points)
    return unit * bounds


def _minimize(
    fun: Callable[[np.ndarray], float],
    bounds: np.ndarray,
    opts: FitOptions,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, int, int, bool]:
    """Scan + Nelder-Mead. Returns (x, f, n_scanned, n_evals, converged)."""
    p = bounds.size
    starts = latin_hypercube_init(p, opts.n_starts, rng, bounds)
    values = np.array(pmap(fun, list(starts), opts.threads))
    order = np.argsort(values, kind="stable")[: opts.top_m]
    max_iters = opts.max_iters if opts.max_iters is not None else 200 * p
    n_evals = len(starts)
    best = None
    for idx in order:
        x0 = starts[idx]
        simplex = np.vstack([x0, x0 + SIMPLEX_STEP * np.eye(p)])
        res = minimize(
            fun,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": max_iters,
                "maxfev": 10 * max_iters,
                "fatol": opts.f_tol,
                "xatol": opts.x_tol,
                "initial_simplex": simplex,
            },
        )
        n_evals += int(res.nfev)
        cand = (np.asarray(res.x), float(res.fun), bool(res.status == 0))
        if values[idx] < cand[1]:
            cand = (x0.copy(), float(values[idx]), cand[2])
        if best is None or cand[1] < best[1]:
            best = cand
    return best[0], best[1], len(starts), n_evals, best[2]


def _objective_fn(z: np.ndarray, opts: FitOptions) -> Callable[[np.ndarray], float]:
    if opts.estimator == "dcov":
        return lambda th: float(chain_dcov(z @ w_from_theta(th).T).sum())
    scale = opts.bandwidth_scale
    return lambda th: float(chain_dcov(smoothed_pit(z @ w_from_theta(th).T, scale)).sum())


def _finish(theta, z, whitening: Whitening, objective, scanned, evals, converged, opts) -> IcaFit:
    theta = theta_from_w(w_from_theta(theta))
    w = w_from_theta(theta)
    if not converged:
        warnings.warn("optimizer stopped at its iteration limit", ConvergenceWarning, stacklevel=3)
    return IcaFit(
        theta=theta,
        w=w,
        uncorrelating=whitening.uncorrelating,
        mean=whitening.mean,
        mixing=np.linalg.inv(whitening.uncorrelating) @ w.T,
        sources=z @ w.T,
        objective=float(objective),
        starts_evaluated=scanned,
        n_evaluations=evals,
        converged=converged,
        options=opts,
    )


def fit_joint(z, opts: FitOptions = FitOptions(), whitening: Whitening | None = None) -> IcaFit:
    """Minimize the full objective over all ``d(d-1)/2`` angles at once."""
    z = _check_whitened(z)
    d = z.shape[1]
    whitening = whitening or Whitening.identity(d)
    fun = _objective_fn(z, opts)
    x, f, scanned, evals, ok = _minimize(fun, upper_bounds(d), opts, child_rng(opts.seed, 0))
    return _finish(x, z, whitening, f, scanned, evals, ok, opts)


def fit_stage(z, theta, k: int, opts: FitOptions = FitOptions()) -> tuple[np.ndarray, float, int, int, bool]:
    """Minimize the ``k``-th summand over the angles of pairs ``(k, j)``.

    All other entries of ``theta`` stay as given. Returns the stage angles,
    the stage objective, the number of scanned starts, the number of
    evaluations and the convergence flag.
    """
    z = _check_whitened(z)
    d = z.shape[1]
    theta = np.array(theta, dtype=np.float64)
    if theta.shape != (n_angles(d),):
        raise InputError(f"theta must have {n_angles(d)} entries")
    sl = stage_slice(d, k)
    bounds = np.full(sl.stop - sl.start, TWO_PI if k == 0 else math.pi)

    def fun(phi):
        th = theta.copy()
        th[sl] = phi
        block = (z @ w_from_theta(th).T)[:, k:]
        if opts.estimator == "pitdcov":
            block = smoothed_pit(block, opts.bandwidth_scale)
        return float(chain_dcov(block, 1)[0])

    return _minimize(fun, bounds, opts, child_rng(opts.seed, k))


def fit_sequential(z, opts: FitOptions = FitOptions(), whitening: Whitening | None = None) -> IcaFit:
    """Estimate the angles stage by stage.

    Stage ``k`` minimizes ``I_n(S_k, S_{k+1:})`` over the angles of pairs
    ``(k, j)`` with earlier angles fixed at their estimates and later ones
    at zero.
    """
    z = _check_whitened(z)
    d = z.shape[1]
    whitening = whitening or Whitening.identity(d)
    theta = np.zeros(n_angles(d))
    scanned = evals = 0
    converged = True
    for k in range(d - 1):
        x, _, sc, ev, ok = fit_stage(z, theta, k, opts)
        theta[stage_slice(d, k)] = x
        scanned += sc
        evals += ev
        converged &= ok
    total = _objective_fn(z, opts)(theta)
    return _finish(theta, z, whitening, total, scanned, evals + 1, converged, opts)


def fit_ica(y, opts: FitOptions = FitOptions()) -> IcaFit:
    """Center, whiten and fit ``y`` (rows are observations)."""
    y = as_samples(y, min_rows=3, min_cols=2, name="y")
    z, wh = whiten(y)
    if opts.mode == "joint":
        return fit_joint(z, opts, wh)
    return fit_sequential(z, opts, wh)


def with_starts(opts: FitOptions, n_starts: int) -> FitOptions:
    return replace(opts, n_starts=n_starts)
