"""Writers and readers for the files produced by ``rskmeans cluster``.

assignments.csv
    ``case_id,cluster,trimmed,outlier,silhouette`` -- ``cluster`` is 1-based
    and, for trimmed cases, names the closest cluster; flags are 0/1.
weights.csv
    ``feature_id,weight`` (sparse algorithms only).
summary.json
    Fit summary; see :func:`fit_summary`.

Floats are written with ``repr`` so that files round-trip exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
ASSIGNMENT_FIELDS = ("case_id", "cluster", "trimmed", "outlier", "silhouette")


def write_assignments(path, case_ids, closest, trimmed, outliers, silhouettes):
    trimmed, outliers = set(trimmed), set(outliers)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ASSIGNMENT_FIELDS)
        for i, cid in enumerate(case_ids):
            writer.writerow([cid, int(closest[i]) + 1, int(i in trimmed), int(i in outliers),
                             repr(float(silhouettes[i]))])


def read_assignments(path) -> dict:
    """Columns of an assignments file; ``cluster`` is returned 1-based."""
    cols = {f: [] for f in ASSIGNMENT_FIELDS}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            cols["case_id"].append(rec["case_id"])
            cols["cluster"].append(int(rec["cluster"]))
            cols["trimmed"].append(rec["trimmed"] == "1")
            cols["outlier"].append(rec["outlier"] == "1")
            cols["silhouette"].append(float(rec["silhouette"]))
    return {
        "case_id": cols["case_id"],
        "cluster": np.array(cols["cluster"], dtype=int),
        "trimmed": np.array(cols["trimmed"], dtype=bool),
        "outlier": np.array(cols["outlier"], dtype=bool),
        "silhouette": np.array(cols["silhouette"], dtype=float),
    }


def write_weights(path, feature_ids, w):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("feature_id", "weight"))
        for fid, v in zip(feature_ids, w):
            writer.writerow([fid, repr(float(v))])


def read_weights(path):
    """Return ``(feature_ids, weights)``."""
    ids, w = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            ids.append(rec["feature_id"])
            w.append(float(rec["weight"]))
    return ids, np.array(w)


def fit_summary(fit, opts, extra=None) -> dict:
    summary = {
        "schema_version": SCHEMA_VERSION,
        "algorithm": fit.algorithm,
        "objective": float(fit.objective),
        "n_iter": int(fit.n_iter),
        "seed": int(fit.seed),
        "degenerate": bool(fit.degenerate),
        "n_weighted_trim": len(fit.weighted_trim),
        "n_euclidean_trim": len(fit.euclidean_trim),
        "n_trimmed": len(fit.trimmed),
        "weighted_trim": sorted(fit.weighted_trim),
        "euclidean_trim": sorted(fit.euclidean_trim),
        "cluster_sizes": [int(c) for c in fit.partition.sizes()],
        "nonzero_weights": None if fit.weights is None else fit.weights.nonzero,
        "parameters": {
            **{k: (float(v) if isinstance(v, float) else v) for k, v in fit.params.items()},
            "n_starts": opts.n_starts,
            "max_iter": opts.max_iter,
            "tol": opts.tol,
        },
    }
    if extra:
        summary.update(extra)
    return summary


def write_summary(path, summary: dict):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_matrix(path, X, header: bool = True):
    """Write a DataMatrix as CSV with ``NA`` for missing entries."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(X.feature_ids)
        for i in range(X.n):
            writer.writerow([repr(float(v)) if o else "NA"
                             for v, o in zip(X.values[i], X.observed[i])])
