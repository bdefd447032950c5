"""Synthetic contamination models and the replicated comparison experiment.

Every dataset is drawn from numpy's PCG64 generator (``default_rng(seed)``)
with standard normals from its ziggurat sampler, so a ``(model, seed)`` pair
always reproduces the same matrix. Clusters are equal-sized blocks in case
order; cluster ``k`` has mean ``(-mu, 0, mu)[k]`` (generally ``mu * (k -
(K - 1) / 2)``) on each clustering feature and 0 elsewhere.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .data import DataMatrix
from .engine import FitOptions, Partition, kmeans, rsk_means, sparse_kmeans, trimmed_kmeans
from .metrics import average_precision, cer

OUTLIER_VALUE = 25.0


@dataclass(frozen=True)
class SimModel:
    name: str
    n: int
    p: int
    K: int
    mu: float
    clustering_features: int
    outlier_spec: tuple = ()

    def __post_init__(self):
        if self.n % self.K:
            raise ValueError("n must be a multiple of K")
        if not 0 < self.clustering_features <= self.p:
            raise ValueError("clustering_features must lie in [1, p]")
        for i, j, _ in self.outlier_spec:
            if not (0 <= i < self.n and 0 <= j < self.p):
                raise ValueError(f"outlier position ({i}, {j}) outside the data")

    @property
    def true_features(self) -> range:
        return range(self.clustering_features)


_CLEAN = SimModel("clean", 60, 500, 3, 1.0, 50)

MODELS = {
    "intro": SimModel("intro", 300, 1000, 3, 3.0, 2),
    "naive_demo": SimModel(
        "naive_demo", 300, 5, 3, 2.0, 2,
        tuple((i, j, OUTLIER_VALUE) for i in range(3) for j in (3, 4))),
    "clean": _CLEAN,
    # one outlier in the last (noise) feature of the first case
    "model1": replace(_CLEAN, name="model1", outlier_spec=((0, 499, OUTLIER_VALUE),)),
    # one outlier in the first (clustering) feature of the first case
    "model2": replace(_CLEAN, name="model2", outlier_spec=((0, 0, OUTLIER_VALUE),)),
}

ALGORITHMS = ("km", "tkm", "skm", "rskc")


def get_model(model) -> SimModel:
    if isinstance(model, SimModel):
        return model
    try:
        return MODELS[model]
    except KeyError:
        raise ValueError(
            f"unknown model {model!r}; valid names: {', '.join(MODELS)}") from None


def generate_dataset(model, seed: int):
    """Draw one dataset.

    Returns
    -------
    X : DataMatrix
    truth : Partition
        The generating cluster of every case.
    """
    model = get_model(model)
    rng = np.random.default_rng(seed)
    size = model.n // model.K
    labels = np.repeat(np.arange(model.K), size)
    levels = model.mu * (np.arange(model.K) - (model.K - 1) / 2)
    values = rng.standard_normal((model.n, model.p))
    values[:, :model.clustering_features] += levels[labels][:, None]
    for i, j, v in model.outlier_spec:
        values[i, j] = v
    return DataMatrix.from_array(values), Partition(labels, model.K)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for :func:`run_experiment`.

    ``l1_bound`` applies to the sparse algorithms and ``alpha`` to the
    trimmed ones. With ``exclude_trimmed`` the CER of a trimming algorithm
    leaves out the cases it trimmed.
    """

    models: tuple = ("clean", "model1", "model2")
    algorithms: tuple = ALGORITHMS
    n_replicates: int = 100
    options: FitOptions = FitOptions(n_starts=200)
    l1_bound: float = 6.2
    alpha: float = 1 / 60
    master_seed: int = 1
    exclude_trimmed: bool = True
    top_m: int = 50
    n_jobs: int = 1

    def __post_init__(self):
        for m in self.models:
            get_model(m)
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithm {bad[0]!r}; valid names: {', '.join(ALGORITHMS)}")
        if self.n_replicates < 0:
            raise ValueError("n_replicates must be non-negative")

    def replicate_seeds(self) -> list:
        return [int(s) for s in np.random.SeedSequence(self.master_seed).generate_state(self.n_replicates)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        d["algorithms"] = list(self.algorithms)
        return d


ROW_FIELDS = ("model", "algorithm", "replicate", "seed", "cer", "nonzero_weights",
              "avg_precision", "median_clustering_weight", "n_trimmed", "error")
METRICS = ("cer", "nonzero_weights", "avg_precision", "median_clustering_weight")


@dataclass
class ExperimentReport:
    config: dict
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["error"]]

    def aggregate_for(self, model: str, algorithm: str) -> dict:
        for a in self.aggregates:
            if a["model"] == model and a["algorithm"] == algorithm:
                return a
        raise KeyError((model, algorithm))

    def values(self, model: str, algorithm: str, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.rows
                         if r["model"] == model and r["algorithm"] == algorithm and not r["error"]],
                        dtype=float)

    def write(self, out_dir) -> None:
        """Write ``replicates.csv`` and ``aggregates.json`` into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "replicates.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ROW_FIELDS)
            for r in self.rows:
                writer.writerow([_fmt(r[f]) for f in ROW_FIELDS])
        payload = {"schema_version": 1, "config": self.config, "aggregates": self.aggregates}
        (out / "aggregates.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def read_report(out_dir) -> ExperimentReport:
    """Inverse of :meth:`ExperimentReport.write`."""
    out = Path(out_dir)
    rows = []
    with (out / "replicates.csv").open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "model": rec["model"],
                "algorithm": rec["algorithm"],
                "replicate": int(rec["replicate"]),
                "seed": int(rec["seed"]),
                "cer": _float(rec["cer"]),
                "nonzero_weights": None if rec["nonzero_weights"] == "" else int(rec["nonzero_weights"]),
                "avg_precision": None if rec["avg_precision"] == "" else int(rec["avg_precision"]),
                "median_clustering_weight": _float(rec["median_clustering_weight"]),
                "n_trimmed": None if rec["n_trimmed"] == "" else int(rec["n_trimmed"]),
                "error": rec["error"],
            })
    payload = json.loads((out / "aggregates.json").read_text(encoding="utf-8"))
    return ExperimentReport(payload["config"], rows, payload["aggregates"])


def _float(s):
    return float("nan") if s == "" else float(s)


def _fit(algo, X, K, config, seed):
    opts = replace(config.options, seed=seed)
    if algo == "km":
        return kmeans(X, K, opts)
    if algo == "tkm":
        return trimmed_kmeans(X, K, config.alpha, opts)
    if algo == "skm":
        return sparse_kmeans(X, K, config.l1_bound, opts)
    return rsk_means(X, K, config.l1_bound, config.alpha, opts)


def _replicate(model_name, replicate, seed, config):
    model = get_model(model_name)
    X, truth = generate_dataset(model, seed)
    rows = []
    for algo in config.algorithms:
        row = dict(model=model.name, algorithm=algo, replicate=replicate, seed=seed,
                   cer=float("nan"), nonzero_weights=None, avg_precision=None,
                   median_clustering_weight=float("nan"), n_trimmed=None, error="")
        try:
            fit = _fit(algo, X, model.K, config, seed)
        except Exception as exc:  # recorded in the report, the run continues
            row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        if config.exclude_trimmed:
            row["cer"] = cer(truth, fit.partition, fit.trimmed)
        else:
            row["cer"] = cer(truth, fit.closest)
        row["n_trimmed"] = len(fit.trimmed)
        if fit.weights is not None:
            w = fit.weights.w
            row["nonzero_weights"] = fit.weights.nonzero
            row["avg_precision"] = average_precision(w, model.true_features, config.top_m)
        else:
            w = np.full(model.p, 1.0 / np.sqrt(model.p))
            row["nonzero_weights"] = model.p
        share = w / w.sum()
        row["median_clustering_weight"] = float(np.median(share[:model.clustering_features]))
        rows.append(row)
    return rows


def aggregate(rows, models, algorithms) -> list:
    """Mean, SD (divisor n - 1) and median of each metric per model and
    algorithm, over the replicates that did not fail."""
    out = []
    for model in models:
        for algo in algorithms:
            sel = [r for r in rows if r["model"] == model and r["algorithm"] == algo]
            ok = [r for r in sel if not r["error"]]
            entry = {"model": model, "algorithm": algo, "n": len(ok), "failures": len(sel) - len(ok)}
            for metric in METRICS:
                vals = np.array([r[metric] for r in ok if r[metric] is not None], dtype=float)
                entry[f"{metric}_mean"] = float(vals.mean()) if vals.size else None
                entry[f"{metric}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else None
                entry[f"{metric}_median"] = float(np.median(vals)) if vals.size else None
            out.append(entry)
    return out


def run_experiment(config: ExperimentConfig = ExperimentConfig()) -> ExperimentReport:
    """Generate ``n_replicates`` datasets per model, fit each algorithm and
    collect CER, number of non-zero weights, average precision and median
    weight share of the clustering features.

    Replicate ``r`` uses the same seed for every model, for data generation
    and for the fits. Fit errors are recorded in the ``error`` column.
    """
    seeds = config.replicate_seeds()
    names = [get_model(m).name for m in config.models]
    tasks = [(m, r, s) for m in names for r, s in enumerate(seeds)]
    results = Parallel(n_jobs=config.n_jobs)(
        delayed(_replicate)(m, r, s, config) for m, r, s in tasks)
    rows = [row for chunk in results for row in chunk]
    return ExperimentReport(config.to_dict(), rows, aggregate(rows, names, config.algorithms))
