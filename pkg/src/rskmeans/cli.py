"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import outputs
from .data import load_csv, standardize_rows
from .engine import FitOptions, kmeans, rsk_means, sparse_kmeans, trimmed_kmeans
from .errors import DataError, FitError
from .metrics import flag_outliers, silhouette
from .selection import DEFAULT_L1_CANDIDATES, ClestParams, calibrate_l1_bound, clest
from .simulation import ALGORITHMS, MODELS, ExperimentConfig, generate_dataset, run_experiment

log = logging.getLogger("rskmeans")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _add_input_args(p):
    p.add_argument("data", help="input CSV, one case per row")
    p.add_argument("--header", action="store_true", help="first row holds feature names")
    p.add_argument("--id-column", action="store_true", help="first column holds case labels")
    p.add_argument("--na", default="NA", help="missing-value token (default: NA)")
    p.add_argument("--standardize", choices=("none", "rows", "rows-robust"), default="none",
                   help="center and scale each case before clustering")


def _add_trim_args(p, default_alpha):
    p.add_argument("--alpha", type=float, default=None,
                   help=f"trimming proportion (default: {default_alpha})")
    p.add_argument("--trim-count", type=int, default=None,
                   help="number of cases to trim, instead of --alpha")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rskmeans", description="Robust sparse K-means clustering.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="cluster a CSV file")
    _add_input_args(c)
    c.add_argument("--algo", choices=("kmeans", "tkmeans", "skmeans", "rskc"), required=True)
    c.add_argument("--k", type=int, required=True, help="number of clusters")
    c.add_argument("--l1", type=float, help="L1 bound on the weights (sparse algorithms)")
    _add_trim_args(c, 0.1)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--n-starts", type=int, default=10)
    c.add_argument("--max-iter", type=int, default=100)
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--outlier-c", type=float, default=3.5,
                   help="outliers exceed median + c * MAD of weighted distances")
    c.add_argument("--out-dir", default=".", help="directory for the output files")

    s = sub.add_parser("simulate", help="run the replicated simulation study")
    s.add_argument("--models", default="clean,model1,model2",
                   help=f"comma-separated, from: {','.join(MODELS)}")
    s.add_argument("--algos", default=",".join(ALGORITHMS),
                   help=f"comma-separated, from: {','.join(ALGORITHMS)}")
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--master-seed", type=int, default=1)
    s.add_argument("--l1", type=float, default=6.2)
    s.add_argument("--alpha", type=float, default=1 / 60)
    s.add_argument("--n-starts", type=int, default=200)
    s.add_argument("--all-cases-cer", action="store_true",
                   help="score trimmed cases at their closest cluster instead of excluding them")
    s.add_argument("--threads", type=int, default=1, help="parallel replicate workers")
    s.add_argument("--out-dir", required=True)

    k = sub.add_parser("select-k", help="choose the number of clusters")
    _add_input_args(k)
    k.add_argument("--k-range", default="2:5", help="inclusive range lo:hi")
    k.add_argument("--l1", type=float, default=None,
                   help="L1 bound; without it trimmed K-means is used")
    _add_trim_args(k, 0.0)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--n-splits", type=int, default=10)
    k.add_argument("--n-ref", type=int, default=20)
    k.add_argument("--d-min", type=float, default=0.05)

    cal = sub.add_parser("calibrate", help="calibrate the L1 bound on simulated clean data")
    cal.add_argument("--model", default="clean", choices=list(MODELS))
    cal.add_argument("--datasets", type=int, default=50)
    cal.add_argument("--alpha", type=float, default=0.0)
    cal.add_argument("--target", type=int, default=50, help="desired number of non-zero weights")
    cal.add_argument("--candidates", default=",".join(str(c) for c in DEFAULT_L1_CANDIDATES))
    cal.add_argument("--master-seed", type=int, default=1)
    cal.add_argument("--n-starts", type=int, default=50)

    g = sub.add_parser("generate", help="write a simulated dataset as CSV")
    g.add_argument("--model", required=True, help=f"one of: {','.join(MODELS)}")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--labels", help="also write the true cluster (1-based) of each case")
    return parser


def _alpha(args, n, default):
    if args.alpha is not None and args.trim_count is not None:
        raise UsageError("--alpha and --trim-count are mutually exclusive")
    if args.trim_count is not None:
        if args.trim_count < 0 or args.trim_count >= n:
            raise UsageError(f"--trim-count must lie in [0, {n - 1}]")
        return args.trim_count / n
    return default if args.alpha is None else args.alpha


def _load(args):
    X = load_csv(args.data, has_header=args.header, na_token=args.na, id_column=args.id_column)
    if args.standardize != "none":
        X = standardize_rows(X, robust=args.standardize == "rows-robust")
    return X


def cmd_cluster(args) -> int:
    if args.k < 2:
        raise UsageError("--k must be at least 2")
    sparse = args.algo in ("skmeans", "rskc")
    if sparse and args.l1 is None:
        raise UsageError(f"--l1 is required for --algo {args.algo}")
    X = _load(args)
    alpha = _alpha(args, X.n, 0.1)
    opts = FitOptions(n_starts=args.n_starts, max_iter=args.max_iter, tol=args.tol, seed=args.seed)
    if args.algo == "kmeans":
        fit = kmeans(X, args.k, opts)
    elif args.algo == "tkmeans":
        fit = trimmed_kmeans(X, args.k, alpha, opts)
    elif args.algo == "skmeans":
        fit = sparse_kmeans(X, args.k, args.l1, opts)
    else:
        fit = rsk_means(X, args.k, args.l1, alpha, opts)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    flagged = flag_outliers(X, fit, args.outlier_c)
    s, avg = silhouette(X, fit, outliers=flagged)
    outputs.write_assignments(out / "assignments.csv", X.case_ids, fit.closest,
                              fit.trimmed, flagged, s)
    if fit.weights is not None:
        outputs.write_weights(out / "weights.csv", X.feature_ids, fit.weights.w)
    extra = {
        "input": str(args.data),
        "standardize": args.standardize,
        "n_flagged_outliers": len(flagged),
        "cluster_avg_silhouette": [None if np.isnan(v) else float(v) for v in avg],
    }
    outputs.write_summary(out / "summary.json", outputs.fit_summary(fit, opts, extra))
    log.info("wrote results to %s", out)
    return 0


def _names(value, valid, what):
    names = [v.strip() for v in value.split(",") if v.strip()]
    bad = [v for v in names if v not in valid]
    if bad or not names:
        raise UsageError(f"unknown {what} {bad[0] if bad else value!r}; valid names: {', '.join(valid)}")
    return tuple(names)


def cmd_simulate(args) -> int:
    config = ExperimentConfig(
        models=_names(args.models, list(MODELS), "model"),
        algorithms=_names(args.algos, ALGORITHMS, "algorithm"),
        n_replicates=args.reps,
        options=FitOptions(n_starts=args.n_starts),
        l1_bound=args.l1,
        alpha=args.alpha,
        master_seed=args.master_seed,
        exclude_trimmed=not args.all_cases_cer,
        n_jobs=args.threads,
    )
    report = run_experiment(config)
    report.write(args.out_dir)
    for a in report.aggregates:
        if a["n"]:
            print(f"{a['model']:>8} {a['algorithm']:>5}  CER {a['cer_mean']:.3f}  "
                  f"non-zero {a['nonzero_weights_mean']:.1f}")
    for r in report.failures:
        print(f"failed: {r['model']} {r['algorithm']} replicate {r['replicate']}: {r['error']}",
              file=sys.stderr)
    return 0


def _k_range(text):
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--k-range must look like 2:5, got {text!r}") from None
    if lo > hi or lo < 2:
        raise UsageError(f"invalid --k-range {text!r}")
    return range(lo, hi + 1)


def cmd_select_k(args) -> int:
    ks = _k_range(args.k_range)
    X = _load(args)
    alpha = _alpha(args, X.n, 0.0)
    params = ClestParams(n_splits=args.n_splits, n_ref=args.n_ref, d_min=args.d_min, seed=args.seed)
    result = clest(X, ks, alpha, args.l1, params)
    for K in sorted(result.observed):
        log.info("K=%d observed %.4f reference %.4f", K, result.observed[K], result.reference[K])
    print(result.k)
    return 0


def cmd_calibrate(args) -> int:
    try:
        candidates = [float(c) for c in args.candidates.split(",")]
    except ValueError:
        raise UsageError("--candidates must be comma-separated numbers") from None
    seeds = np.random.SeedSequence(args.master_seed).generate_state(args.datasets)
    datasets = [generate_dataset(args.model, int(s))[0] for s in seeds]
    K = MODELS[args.model].K
    bound = calibrate_l1_bound(datasets, K, args.alpha, args.target, candidates,
                               FitOptions(n_starts=args.n_starts))
    print(f"{bound:.4f}")
    return 0


def cmd_generate(args) -> int:
    if args.model not in MODELS:
        raise UsageError(f"unknown model {args.model!r}; valid names: {', '.join(MODELS)}")
    X, truth = generate_dataset(args.model, args.seed)
    outputs.write_matrix(args.out, X)
    if args.labels:
        Path(args.labels).write_text(
            "".join(f"{v + 1}\n" for v in truth.labels), encoding="utf-8")
    return 0


COMMANDS = {
    "cluster": cmd_cluster,
    "simulate": cmd_simulate,
    "select-k": cmd_select_k,
    "calibrate": cmd_calibrate,
    "generate": cmd_generate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rskmeans: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"rskmeans: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"rskmeans: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"rskmeans: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"rskmeans: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
