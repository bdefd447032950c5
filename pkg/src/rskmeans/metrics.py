"""Evaluation metrics: classification error rate, center-based silhouettes,
outlier flagging and feature-recovery precision."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MAD_SCALE, as_data_matrix
from .engine import TRIMMED, ClusterFit, distances
from .errors import DataError


@dataclass(frozen=True, eq=False)
class MetricsReport:
    cer: float | None
    silhouettes: np.ndarray
    cluster_avg_silhouette: np.ndarray
    flagged_outliers: frozenset
    nonzero_weights: int
    avg_precision: int | None


def _labels(P):
    return np.asarray(getattr(P, "labels", P))


def cer(P1, P2, excluded=()) -> float:
    """Classification error rate between two partitions.

    The fraction of unordered pairs of cases that are together in one
    partition and apart in the other. Cases in ``excluded`` are dropped from
    both partitions first; any remaining case must carry a cluster label.

    Parameters
    ----------
    P1, P2 : Partition or array_like of int
    excluded : iterable of int

    Returns
    -------
    float in [0, 1]
    """
    a, b = _labels(P1), _labels(P2)
    if a.shape != b.shape:
        raise DataError("partitions cover different numbers of cases")
    keep = np.ones(a.size, dtype=bool)
    keep[np.fromiter(excluded, dtype=int)] = False
    a, b = a[keep], b[keep]
    n = a.size
    if n < 2:
        raise DataError("CER needs at least two non-excluded cases")
    if (a == TRIMMED).any() or (b == TRIMMED).any():
        raise DataError("trimmed cases must be excluded from the CER")

    def pairs(counts):
        counts = counts.astype(np.int64)
        return int((counts * (counts - 1) // 2).sum())

    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    together_a = pairs(table.sum(axis=1))
    together_b = pairs(table.sum(axis=0))
    together_both = pairs(table.ravel())
    return (together_a + together_b - 2 * together_both) / (n * (n - 1) // 2)


def silhouette(X, fit: ClusterFit, weighted: bool = False, outliers=()):
    """Center-based silhouettes ``s_i = (b_i - a_i) / b_i``.

    ``a_i`` and ``b_i`` are the squared distances from case ``i`` to its
    closest and second-closest fitted centers (unweighted unless
    ``weighted``). ``s_i`` is 0 when ``b_i`` is 0.

    Every case gets a silhouette, trimmed ones included. Cluster averages
    are taken over the cases assigned to each cluster (trimmed cases count
    toward the cluster they were closest to) minus those in ``outliers``.

    Returns
    -------
    s : ndarray, shape (n,)
    cluster_avg : ndarray, shape (K,)
        NaN for a cluster with no counted member.
    """
    X = as_data_matrix(X)
    K = fit.centers.shape[0]
    if K < 2:
        raise ValueError("silhouettes need at least two clusters")
    w = fit.weights.w if (weighted and fit.weights is not None) else None
    d = np.sort(distances(X, fit.centers, w), axis=1)
    a, b = d[:, 0], d[:, 1]
    s = np.divide(b - a, b, out=np.zeros(X.n), where=b > 0)

    counted = np.ones(X.n, dtype=bool)
    counted[np.fromiter(outliers, dtype=int)] = False
    avg = np.full(K, np.nan)
    for k in range(K):
        members = counted & (fit.closest == k)
        if members.any():
            avg[k] = s[members].mean()
    return s, avg


def mad(x) -> float:
    """Median absolute deviation scaled by 1.4826."""
    x = np.asarray(x, dtype=float)
    return float(MAD_SCALE * np.median(np.abs(x - np.median(x))))


def flag_outliers(X, fit: ClusterFit, c: float = 3.5) -> frozenset:
    """Cases whose weighted distance to their cluster center exceeds
    ``median + c * MAD`` of all such distances.

    Trimmed cases are measured against the center they are closest to.
    Fits without weights use equal weights. When the MAD is zero the
    threshold is the median itself.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    X = as_data_matrix(X)
    w = fit.weights.w if fit.weights is not None else None
    d = distances(X, fit.centers, w)[np.arange(X.n), fit.closest]
    return flag_large(d, c)


def flag_large(values, c: float = 3.5) -> frozenset:
    """Indices of ``values`` above ``median + c * MAD``."""
    values = np.asarray(values, dtype=float)
    threshold = np.median(values) + c * mad(values)
    return frozenset(int(i) for i in np.flatnonzero(values > threshold))


def average_precision(w, true_features, m: int = 50) -> int:
    """Number of ``true_features`` among the ``m`` largest weights.

    Equal weights are ranked by feature index, lower first.
    """
    w = np.asarray(getattr(w, "w", w), dtype=float)
    if m > w.size:
        raise ValueError(f"m={m} exceeds the number of features {w.size}")
    order = np.lexsort((np.arange(w.size), -w))
    top = set(order[:m].tolist())
    return sum(1 for j in set(true_features) if j in top)


def evaluate(X, fit: ClusterFit, truth=None, true_features=None, m: int = 50,
             c: float = 3.5, exclude_trimmed: bool = True) -> MetricsReport:
    """Compute every metric that applies to ``fit``.

    The CER against ``truth`` leaves out trimmed cases unless
    ``exclude_trimmed`` is False, in which case trimmed cases are scored at
    the cluster they are closest to.
    """
    X = as_data_matrix(X)
    outliers = flag_outliers(X, fit, c)
    s, avg = silhouette(X, fit, outliers=outliers) if fit.n_clusters >= 2 else (
        np.zeros(X.n), np.full(fit.n_clusters, np.nan))
    score = None
    if truth is not None:
        if exclude_trimmed:
            score = cer(truth, fit.partition, fit.trimmed)
        else:
            score = cer(truth, fit.closest)
    nonzero = fit.weights.nonzero if fit.weights is not None else X.p
    ap = None
    if true_features is not None and fit.weights is not None:
        ap = average_precision(fit.weights, true_features, m)
    return MetricsReport(score, s, avg, outliers, nonzero, ap)
