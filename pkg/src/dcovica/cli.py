"""
Command-line interface: ``dcovica fit``, ``dcovica test`` and
``dcovica benchmark``.

Exit codes: 0 success, 2 bad input or configuration, 3 degenerate data,
4 optimizer non-convergence (outputs are still written).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceWarning, DegenerateDataError, InputError
from .estimator import FitOptions, IcaFit, fit_ica
from .harness import bundled_config_path, load_config, run_benchmark, write_records, write_summary
from .inference import existence_test, order_statistic_from_top, permutation_test_mutual, serial_test
from .samples import center, read_csv, standardize_columns, var_ols_residuals, write_csv

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NONCONVERGED = 0, 2, 3, 4
FIT_FORMAT = "dcovica-fit/1"
TEST_FORMAT = "dcovica-test/1"


# ------------------------------------------------------------- manifest


def _digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def make_manifest(argv: list[str], config: dict, seed: int, input_path=None, started: str | None = None) -> dict:
    return {
        "command": ["dcovica", *argv],
        "config": config,
        "seed": seed,
        "version": __version__,
        "input": None if input_path is None else {"path": str(input_path), "digest": _digest(input_path)},
        "started": started or _now(),
        "finished": _now(),
    }


def _write_json(path: Path, obj: dict) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly.
    path.write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n")


def _write_manifest(out_dir: Path, manifest: dict, outputs: list[str]) -> None:
    _write_json(out_dir / "manifest.json", {**manifest, "outputs": outputs})


# -------------------------------------------------------- preprocessing


def _add_prep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file, one observation per row")
    p.add_argument("--log-columns", type=int, nargs="*", default=[], metavar="J",
                   help="zero-based columns to replace by their natural logarithm")
    p.add_argument("--difference", action="store_true", help="use first differences of the series")
    p.add_argument("--standardize", action="store_true", help="divide centered columns by their sample sd")
    p.add_argument("--var-order", type=int, default=0, metavar="P",
                   help="replace the data by residuals of an OLS VAR(P) fit")


def _prep_config(args) -> dict:
    return {
        "log_columns": list(args.log_columns),
        "difference": bool(args.difference),
        "standardize": bool(args.standardize),
        "var_order": int(args.var_order),
    }


def prepare(data: np.ndarray, prep: dict) -> tuple[np.ndarray, dict]:
    """Apply, in order: logarithms, differencing, centering and scaling,
    VAR residuals. Returns the data and a record of what was applied."""
    y = np.array(data, dtype=np.float64)
    info: dict = {}
    for j in prep.get("log_columns", []):
        if not 0 <= j < y.shape[1]:
            raise InputError(f"log column {j} out of range for {y.shape[1]} columns")
        if np.any(y[:, j] <= 0):
            raise InputError(f"column {j} has non-positive values; cannot take logarithms")
        y[:, j] = np.log(y[:, j])
    if prep.get("difference"):
        y = np.diff(y, axis=0)
    if prep.get("standardize"):
        y, info["center"] = center(y)
        y, info["scale"] = standardize_columns(y)
    if prep.get("var_order", 0) > 0:
        y = var_ols_residuals(y, prep["var_order"])
    return y, info


def _load_input(args) -> tuple[np.ndarray, list[str] | None, int, dict]:
    csv = read_csv(args.input)
    y, info = prepare(csv.data, _prep_config(args))
    return y, csv.header, csv.n_dropped, info


# ------------------------------------------------------------------ fit


def fit_to_dict(fit: IcaFit) -> dict:
    return {
        "theta": fit.theta.tolist(),
        "w": fit.w.tolist(),
        "uncorrelating": fit.uncorrelating.tolist(),
        "mixing": fit.mixing.tolist(),
        "mean": fit.mean.tolist(),
        "objective": fit.objective,
        "converged": fit.converged,
        "starts_evaluated": fit.starts_evaluated,
        "n_evaluations": fit.n_evaluations,
        "options": None if fit.options is None else fit.options.to_dict(),
    }


def read_fit(path: str | Path) -> dict:
    """Load ``fit.json``; matrices come back as float arrays."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict) or obj.get("format") != FIT_FORMAT:
        raise InputError(f"{path}: not a fit file")
    for key in ("theta", "w", "uncorrelating", "mixing", "mean"):
        obj["fit"][key] = np.asarray(obj["fit"][key], dtype=np.float64)
    return obj


def fit_from_file(obj: dict, y: np.ndarray) -> IcaFit:
    """Rebuild an :class:`IcaFit` for data ``y`` prepared as in the fit."""
    f = obj["fit"]
    z = (y - f["mean"]) @ f["uncorrelating"].T
    opts = FitOptions(**{k: v for k, v in f["options"].items()})
    return IcaFit(
        theta=f["theta"], w=f["w"], uncorrelating=f["uncorrelating"], mean=f["mean"],
        mixing=f["mixing"], sources=z @ f["w"].T, objective=f["objective"],
        starts_evaluated=f["starts_evaluated"], n_evaluations=f["n_evaluations"],
        converged=f["converged"], options=opts,
    )


def cmd_fit(args, argv) -> int:
    started = _now()
    y, header, n_dropped, info = _load_input(args)
    opts = FitOptions(
        estimator=args.estimator, mode=args.mode, n_starts=args.starts, top_m=args.top_m,
        bandwidth_scale=args.bandwidth_scale, max_iters=args.max_iters, seed=args.seed,
        threads=args.threads,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        fit = fit_ica(y, opts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {"fit_options": opts.to_dict(), "preprocessing": _prep_config(args)}
    manifest = make_manifest(argv, config, args.seed, args.input, started)
    d = y.shape[1]
    _write_json(out / "fit.json", {
        "format": FIT_FORMAT,
        "manifest": manifest,
        "columns": header or [f"y{j + 1}" for j in range(d)],
        "n": int(y.shape[0]),
        "n_dropped_rows": n_dropped,
        "preprocessing": {**_prep_config(args), **{k: v.tolist() for k, v in info.items()}},
        "fit": fit_to_dict(fit),
    })
    write_csv(out / "sources.csv", fit.sources, [f"s{j + 1}" for j in range(d)])
    _write_manifest(out, manifest, ["fit.json", "sources.csv"])
    status = "converged" if fit.converged else "NOT converged"
    print(f"fit: n={y.shape[0]} d={d} objective={fit.objective:.6g} ({status}); wrote {out}/fit.json")
    return EXIT_OK if fit.converged else EXIT_NONCONVERGED


# ----------------------------------------------------------------- test


def _summary(values: np.ndarray) -> dict:
    q = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {
        "count": int(values.size), "mean": float(values.mean()), "min": float(values.min()),
        "q05": q[0], "q25": q[1], "median": q[2], "q75": q[3], "q95": q[4], "max": float(values.max()),
    }


def cmd_test(args, argv) -> int:
    started = _now()
    if args.kind == "existence":
        if not args.fit:
            raise InputError("--kind existence needs --fit FIT_JSON")
        obj = read_fit(args.fit)
        recorded = {k: obj["preprocessing"][k] for k in _prep_config(args)}
        if recorded != _prep_config(args):
            raise InputError(f"preprocessing flags differ from those recorded in the fit file: {recorded}")
    y, _, _, _ = _load_input(args)
    extra: dict = {}
    if args.kind == "mutual":
        res = permutation_test_mutual(y, args.n_perm, args.seed, threads=args.threads)
    elif args.kind == "serial":
        res = serial_test(y, args.lags, args.n_perm, args.seed, threads=args.threads)
    else:
        fit = fit_from_file(obj, y)
        res = existence_test(
            y, fit, args.n_perm, args.seed, inner_starts=args.inner_starts,
            signed=not args.no_signed_permutation, threads=args.threads,
        )
        dist = res.details.pop("distances")
        extra["confidence_radius"] = order_statistic_from_top(dist, args.alpha)
        extra["distance_summary"] = _summary(dist)
    crit = res.critical_value(args.alpha)
    config = {"kind": args.kind, "n_perm": args.n_perm, "lags": args.lags, "alpha": args.alpha,
              "preprocessing": _prep_config(args)}
    manifest = make_manifest(argv, config, args.seed, args.input, started)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, {
        "format": TEST_FORMAT,
        "manifest": manifest,
        "kind": args.kind,
        "statistic": res.statistic,
        "p_value": res.p_value,
        "n_replicates": res.n_replicates,
        "alpha": args.alpha,
        "critical_value": crit,
        "reject": bool(res.statistic > crit),
        "replicate_summary": _summary(res.replicate_stats),
        "details": res.details,
        **extra,
    })
    print(f"{args.kind} test: statistic={res.statistic:.6g} p={res.p_value:.4g} "
          f"(replicates={res.n_replicates}); wrote {out}")
    return EXIT_OK


# ------------------------------------------------------------ benchmark


def cmd_benchmark(args, argv) -> int:
    started = _now()
    path = args.config or bundled_config_path()
    cfg = load_config(path)
    records, summary = run_benchmark(cfg, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / "records.csv", records)
    write_summary(out / "summary.csv", summary)
    manifest = make_manifest(argv, cfg.as_dict(), cfg.seed, path, started)
    _write_manifest(out, manifest, ["records.csv", "summary.csv"])
    for s in summary:
        print(f"{s.method:>20s}  mean D={s.mean_error:.4f}  se={s.std_error:.4f}  "
              f"time={s.mean_time_s:.3g}s  failed={s.n_failed}")
    return EXIT_OK


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcovica", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dcovica {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $DCOVICA_THREADS or 1)")

    p = sub.add_parser("fit", parents=[common], help="estimate independent components")
    _add_prep_args(p)
    p.add_argument("--estimator", choices=["dcov", "pitdcov"], default="pitdcov")
    p.add_argument("--mode", choices=["joint", "sequential"], default="joint")
    p.add_argument("--starts", type=int, default=1000, help="Latin hypercube starting points")
    p.add_argument("--top-m", type=int, default=1, help="local searches from the best M starting points")
    p.add_argument("--bandwidth-scale", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=None, help="Nelder-Mead iteration cap (default 200 per angle)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", parents=[common], help="independence tests")
    _add_prep_args(p)
    p.add_argument("--kind", choices=["mutual", "serial", "existence"], required=True)
    p.add_argument("--n-perm", type=int, default=1999, help="replicates (permutations or resamples)")
    p.add_argument("--lags", type=int, default=1, help="lag count for --kind serial")
    p.add_argument("--fit", help="fit.json from 'dcovica fit' (for --kind existence)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--inner-starts", type=int, default=100, help="start cap for existence-test refits")
    p.add_argument("--no-signed-permutation", action="store_true",
                   help="skip the random signed permutation of refitted sources")
    p.add_argument("--out", default="test.json")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("benchmark", help="simulation benchmark")
    p.add_argument("config", nargs="?", help="config file (default: the bundled desk-scale config)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, argv)
    except DegenerateDataError as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
