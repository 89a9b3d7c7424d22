"""
Simulation harness: a catalog of standardized source distributions,
well-conditioned random mixing matrices, a FastICA baseline and a
benchmark runner producing per-run records and a per-method summary.
"""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.stats import ortho_group

from ._parallel import child_rng, pmap
from .errors import ConvergenceWarning, DcovIcaError, InputError
from .estimator import FitOptions, IcaFit, fit_ica
from .metrics import mixing_error
from .rotations import theta_from_w
from .samples import Whitening, as_samples, whiten

FAMILIES = ("student_t", "uniform", "exponential", "exp_mixture", "gauss_mixture_sym", "gauss_mixture_asym")
METHODS = ("dcov_joint", "dcov_sequential", "pitdcov_joint", "pitdcov_sequential", "fastica")
CONFIG_VERSION = 1


# -------------------------------------------------------------- catalog


def _moments(family: str, params: dict) -> tuple[float, float]:
    """Population mean and variance of the raw (unstandardized) draw."""
    if family == "student_t":
        df = params["df"]
        if df <= 2:
            raise InputError("student_t needs df > 2 for a finite variance")
        return 0.0, df / (df - 2.0)
    if family == "uniform":
        return 0.5, 1.0 / 12.0
    if family == "exponential":
        return 1.0, 1.0
    w = np.asarray(params["weights"], dtype=np.float64)
    if family == "exp_mixture":
        loc = np.asarray(params["locs"], dtype=np.float64)
        sc = np.asarray(params["scales"], dtype=np.float64)
        sg = np.asarray(params["signs"], dtype=np.float64)
        comp_mean = loc + sg * sc
        second = loc**2 + 2 * loc * sg * sc + 2 * sc**2
    else:
        mu = np.asarray(params["means"], dtype=np.float64)
        sd = np.asarray(params["sds"], dtype=np.float64)
        comp_mean = mu
        second = mu**2 + sd**2
    mean = float(w @ comp_mean)
    return mean, float(w @ second) - mean**2


@dataclass(frozen=True)
class SourceDistribution:
    """A source law, standardized to mean 0 and variance 1."""

    label: str
    name: str
    family: str
    params: dict = field(default_factory=dict)
    approximate: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}")
        if self.family.startswith(("exp_", "gauss_")):
            w = np.asarray(self.params["weights"], dtype=np.float64)
            if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
                raise InputError(f"{self.label}: mixture weights must be nonnegative and sum to 1")

    @property
    def moments(self) -> tuple[float, float]:
        return _moments(self.family, self.params)

    def _raw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.family == "student_t":
            return rng.standard_t(p["df"], n)
        if self.family == "uniform":
            return rng.random(n)
        if self.family == "exponential":
            return rng.standard_exponential(n)
        comp = rng.choice(len(p["weights"]), size=n, p=p["weights"])
        if self.family == "exp_mixture":
            loc = np.asarray(p["locs"])[comp]
            scale = np.asarray(p["scales"])[comp]
            sign = np.asarray(p["signs"], dtype=np.float64)[comp]
            return loc + sign * scale * rng.standard_exponential(n)
        return np.asarray(p["means"])[comp] + np.asarray(p["sds"])[comp] * rng.standard_normal(n)

    def sample(self, n: int, seed=0) -> np.ndarray:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        mean, var = self.moments
        return (self._raw(n, rng) - mean) / math.sqrt(var)


def load_catalog(path: str | Path | None = None) -> dict[str, SourceDistribution]:
    """Read a catalog file (the bundled one by default), keyed by label."""
    if path is None:
        text = resources.files("dcovica").joinpath("data/catalog.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    if raw.get("version") != 1:
        raise InputError(f"unsupported catalog version {raw.get('version')!r}")
    out = {}
    for entry in raw["distributions"]:
        dist = SourceDistribution(
            entry["label"], entry["name"], entry["family"], entry.get("params", {}), bool(entry.get("approximate"))
        )
        if dist.label in out:
            raise InputError(f"duplicate catalog label {dist.label!r}")
        out[dist.label] = dist
    return out


# --------------------------------------------------------------- mixing


def random_mixing(d: int, cond_lo: float = 1.0, cond_hi: float = 2.0, seed=0) -> np.ndarray:
    """``U diag(sigma) V'`` with Haar ``U``, ``V`` and condition number
    uniform on ``[cond_lo, cond_hi]``.

    The extreme singular values are 1 and the drawn condition number; the
    others are uniform between them.
    """
    if d < 1:
        raise InputError("d must be at least 1")
    if not 1.0 <= cond_lo <= cond_hi or not math.isfinite(cond_hi):
        raise InputError(f"need 1 <= cond_lo <= cond_hi, got {cond_lo}, {cond_hi}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if d == 1:
        return np.array([[rng.choice([-1.0, 1.0])]])
    kappa = rng.uniform(cond_lo, cond_hi)
    sigma = np.concatenate([[kappa, 1.0], rng.uniform(1.0, kappa, d - 2)])
    u = ortho_group.rvs(d, random_state=rng)
    v = ortho_group.rvs(d, random_state=rng)
    m = (u * sigma) @ v.T
    cond = np.linalg.cond(m)
    assert cond_lo - 1e-9 <= cond <= cond_hi + 1e-9, cond
    return m


# -------------------------------------------------------------- fastica


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    # (W W')^{-1/2} W
    vals, vecs = np.linalg.eigh(w @ w.T)
    return (vecs / np.sqrt(vals)) @ vecs.T @ w


def fastica_baseline(
    z,
    seed=0,
    *,
    whitening: Whitening | None = None,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> IcaFit:
    """Symmetric fixed-point FastICA with the log-cosh contrast.

    ``z`` must be whitened. Starts from a Haar-random rotation; stops when
    every row of the unmixing matrix moves by less than ``tol`` (up to
    sign). ``objective`` is NaN: the method has no comparable criterion.
    """
    z = as_samples(z, min_rows=3, min_cols=2, name="z")
    n, d = z.shape
    whitening = whitening or Whitening.identity(d)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    w = ortho_group.rvs(d, random_state=rng)
    converged = False
    for it in range(1, max_iter + 1):
        g = np.tanh(z @ w.T)
        w_new = (g.T @ z) / n - (1.0 - g**2).mean(axis=0)[:, None] * w
        w_new = _sym_decorrelate(w_new)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if change < tol:
            converged = True
            break
    if np.linalg.det(w) < 0:
        w[0] *= -1.0
    if not converged:
        warnings.warn("FastICA stopped at its iteration limit", ConvergenceWarning, stacklevel=2)
    theta = theta_from_w(w)
    return IcaFit(
        theta=theta,
        w=w,
        uncorrelating=whitening.uncorrelating,
        mean=whitening.mean,
        mixing=np.linalg.inv(whitening.uncorrelating) @ w.T,
        sources=z @ w.T,
        objective=math.nan,
        starts_evaluated=1,
        n_evaluations=it,
        converged=converged,
        options=None,
    )


def fastica(y, seed=0, **kwargs) -> IcaFit:
    """Whiten ``y`` and run :func:`fastica_baseline`."""
    z, wh = whiten(y)
    return fastica_baseline(z, seed, whitening=wh, **kwargs)


# ------------------------------------------------------------ benchmark


@dataclass(frozen=True)
class BenchmarkConfig:
    methods: tuple[str, ...]
    d: int
    n: int
    n_sims: int
    seed: int
    n_starts: int = 1000
    top_m: int = 1
    bandwidth_scale: float = 1.0
    cond_lo: float = 1.0
    cond_hi: float = 2.0
    timing: bool = True
    catalog: str | None = None
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if not self.methods:
            raise InputError("the methods list is empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InputError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if self.d < 2 or self.n < 3 or self.n_sims < 1 or self.n_starts < 1 or self.top_m < 1:
            raise InputError("need d >= 2, n >= 3, n_sims >= 1, n_starts >= 1, top_m >= 1")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")
        if self.version != CONFIG_VERSION:
            raise InputError(f"unsupported config version {self.version}")

    def fit_options(self, method: str, seed: int) -> FitOptions:
        estimator, mode = method.split("_")
        return FitOptions(
            estimator=estimator,
            mode=mode,
            n_starts=self.n_starts,
            top_m=self.top_m,
            bandwidth_scale=self.bandwidth_scale,
            seed=seed,
            threads=1,
        )

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


_INT_KEYS = {"version", "d", "n", "n_sims", "seed", "n_starts", "top_m"}
_FLOAT_KEYS = {"bandwidth_scale", "cond_lo", "cond_hi"}
_REQUIRED = {"version", "methods", "d", "n", "n_sims", "seed"}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def parse_config(text: str) -> BenchmarkConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise InputError(f"config line {lineno}: duplicate key {key!r}")
        try:
            if key == "methods":
                values[key] = tuple(m.strip() for m in value.split(",") if m.strip())
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key == "timing":
                values[key] = _parse_bool(value)
            elif key == "catalog":
                values[key] = value
            else:
                raise InputError(f"config line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise InputError(f"config line {lineno}: bad value for {key!r}: {value!r}") from exc
    missing = _REQUIRED - values.keys()
    if missing:
        raise InputError(f"config is missing {sorted(missing)}")
    return BenchmarkConfig(**values)


def load_config(path: str | Path) -> BenchmarkConfig:
    return parse_config(Path(path).read_text())


def bundled_config_path() -> Path:
    return Path(str(resources.files("dcovica").joinpath("data/desk_benchmark.cfg")))


@dataclass
class BenchmarkRecord:
    sim: int
    method: str
    d: int
    n: int
    distributions: tuple[str, ...]
    error: float
    wall_time: float
    seed: int
    converged: bool
    status: str = "ok"


def _run_method(method: str, y: np.ndarray, cfg: BenchmarkConfig, seed: int) -> tuple[IcaFit, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        start = time.perf_counter()
        if method == "fastica":
            fit = fastica(y, seed)
        else:
            fit = fit_ica(y, cfg.fit_options(method, seed))
        return fit, time.perf_counter() - start


def simulate_once(cfg: BenchmarkConfig, sim: int, catalog: dict[str, SourceDistribution]) -> list[BenchmarkRecord]:
    """One simulation: draw sources and mixing, run every method."""
    rng = child_rng(cfg.seed, sim)
    labels = tuple(rng.choice(sorted(catalog), size=cfg.d, replace=False))
    s0 = np.column_stack([catalog[lab].sample(cfg.n, rng) for lab in labels])
    m0 = random_mixing(cfg.d, cfg.cond_lo, cfg.cond_hi, rng)
    y0 = s0 @ m0.T
    fit_seed = int(rng.integers(2**32))
    out = []
    for method in cfg.methods:
        try:
            fit, elapsed = _run_method(method, y0, cfg, fit_seed)
            err = mixing_error(m0, fit.mixing).distance
            rec = BenchmarkRecord(sim, method, cfg.d, cfg.n, labels, err, elapsed, fit_seed, fit.converged)
        except DcovIcaError as exc:
            rec = BenchmarkRecord(sim, method, cfg.d, cfg.n, labels, math.nan, math.nan, fit_seed, False, f"failed: {exc}")
        if not cfg.timing:
            rec.wall_time = math.nan
        out.append(rec)
    return out


@dataclass
class MethodSummary:
    method: str
    d: int
    n: int
    n_sims: int
    n_failed: int
    mean_error: float
    std_error: float
    mean_time_s: float


def summarize(records: list[BenchmarkRecord], cfg: BenchmarkConfig) -> list[MethodSummary]:
    """Mean error, its standard error (sd / sqrt(count)) and mean time per method."""
    out = []
    for method in cfg.methods:
        recs = [r for r in records if r.method == method]
        ok = [r for r in recs if r.status == "ok"]
        errs = np.array([r.error for r in ok])
        times = np.array([r.wall_time for r in ok])
        mean = float(errs.mean()) if errs.size else math.nan
        se = float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else math.nan
        mean_t = float(times.mean()) if times.size and cfg.timing else math.nan
        out.append(MethodSummary(method, cfg.d, cfg.n, len(recs), len(recs) - len(ok), mean, se, mean_t))
    return out


def run_benchmark(
    cfg: BenchmarkConfig, threads: int | None = None
) -> tuple[list[BenchmarkRecord], list[MethodSummary]]:
    """Run ``cfg.n_sims`` simulations (in parallel over simulations)."""
    catalog = load_catalog(cfg.catalog)
    if cfg.d > len(catalog):
        raise InputError(f"d={cfg.d} exceeds the catalog size {len(catalog)}")
    per_sim = pmap(lambda i: simulate_once(cfg, i, catalog), range(cfg.n_sims), threads)
    records = [r for sim in per_sim for r in sim]
    return records, summarize(records, cfg)


RECORD_COLUMNS = ["sim", "method", "d", "n", "distributions", "error", "wall_time_s", "seed", "converged", "status"]
SUMMARY_COLUMNS = ["method", "d", "n", "n_sims", "n_failed", "mean_error", "std_error", "mean_time_s"]


def _fmt(x: float) -> str:
    return "NA" if math.isnan(x) else repr(float(x))


def write_records(path: str | Path, records: list[BenchmarkRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([
                r.sim, r.method, r.d, r.n, "+".join(r.distributions), _fmt(r.error),
                _fmt(r.wall_time), r.seed, int(r.converged), r.status,
            ])


def write_summary(path: str | Path, summary: list[MethodSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summary:
            w.writerow([
                s.method, s.d, s.n, s.n_sims, s.n_failed, _fmt(s.mean_error),
                _fmt(s.std_error), _fmt(s.mean_time_s),
            ])
