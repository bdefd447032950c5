#!/usr/bin/env python3
"""Cluster a gene-expression matrix with sparse and robust sparse K-means.

The input is a CSV with one case (sample) per row and one gene per column;
use --transpose for genes-by-samples files. Each case is standardized by
its median and MAD, so squared Euclidean distances track one minus the
correlation between cases. For every trimming count the script fits the
clustering (trimming count 0 is plain sparse K-means), then reports the
number of non-zero weights, the per-cluster average silhouettes and, when
--labels is given, the CER against those labels with trimmed cases left
out. Without --k the number of clusters is chosen by Clest for each
trimming count.

Nothing is asserted about the numbers; this is an analysis driver.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from rskmeans import (ClestParams, DataMatrix, FitOptions, cer, clest_select_k, load_csv,
                      rsk_means, silhouette, sparse_kmeans, standardize_rows)
from rskmeans import outputs
from rskmeans.metrics import flag_outliers


def parse_args(argv):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("data")
    p.add_argument("--header", action="store_true")
    p.add_argument("--id-column", action="store_true")
    p.add_argument("--transpose", action="store_true", help="input rows are genes")
    p.add_argument("--labels", help="file with one reference class per case")
    p.add_argument("--k", type=int, help="number of clusters; chosen by Clest when omitted")
    p.add_argument("--k-range", default="2:5")
    p.add_argument("--l1", type=float, default=6.0)
    p.add_argument("--trim-counts", default="0,1,5,10",
                   help="comma-separated numbers of cases to trim")
    p.add_argument("--alpha", type=float, help="single trimming proportion instead of --trim-counts")
    p.add_argument("--n-starts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="expression_out")
    return p.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    X = load_csv(args.data, has_header=args.header, id_column=args.id_column)
    if args.transpose:
        X = DataMatrix(X.values.T, X.observed.T, X.feature_ids, X.case_ids)
    X = standardize_rows(X, robust=True)
    truth = None
    if args.labels:
        truth = np.array(Path(args.labels).read_text().split())

    if args.alpha is not None:
        alphas = [args.alpha]
    else:
        alphas = [int(c) / X.n for c in args.trim_counts.split(",")]
    lo, hi = (int(v) for v in args.k_range.split(":"))
    opts = FitOptions(n_starts=args.n_starts, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    print(f"{X.n} cases, {X.p} genes")
    for alpha in alphas:
        K = args.k
        if K is None:
            K = clest_select_k(X, range(lo, hi + 1), alpha, args.l1, ClestParams(seed=args.seed))
        if alpha > 0:
            fit = rsk_means(X, K, args.l1, alpha, opts)
        else:
            fit = sparse_kmeans(X, K, args.l1, opts)
        flagged = flag_outliers(X, fit)
        s, avg = silhouette(X, fit, outliers=flagged)
        line = (f"alpha={alpha:.4f} K={K} non-zero={fit.weights.nonzero} "
                f"trimmed={len(fit.trimmed)} flagged={len(flagged)} "
                f"silhouette=" + "/".join(f"{v:.2f}" for v in avg))
        if truth is not None:
            line += f" CER={cer(truth, fit.partition, fit.trimmed):.3f}"
        print(line)
        tag = f"alpha_{alpha:.4f}"
        outputs.write_assignments(out / f"{tag}_assignments.csv", X.case_ids, fit.closest,
                                  fit.trimmed, flagged, s)
        outputs.write_weights(out / f"{tag}_weights.csv", X.feature_ids, fit.weights.w)
    return 0


if __name__ == "__main__":
    sys.exit(main())
