"""K-means, trimmed K-means, sparse K-means and robust sparse K-means.

All four algorithms share one Lloyd-type inner loop (:func:`lloyd`) that
assigns cases to the nearest center under feature weights, optionally trims
the cases farthest from their centers, and recomputes centers as per-feature
means of the remaining members.

Cluster labels are 0-based internally; trimmed cases carry ``TRIMMED``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import DataMatrix, as_data_matrix, per_feature_bcss
from .errors import DegenerateObjectiveError, EmptyClusterError
from .weights import WeightVector, solve_weights

TRIMMED = -1


@dataclass(frozen=True)
class FitOptions:
    """Restart and convergence settings shared by all algorithms.

    ``max_iter`` bounds the inner Lloyd iterations and ``max_outer`` the
    weight-update cycles of the sparse algorithms, which stop once the
    relative L1 change of the weights drops below ``tol``.
    """

    n_starts: int = 10
    max_iter: int = 100
    tol: float = 1e-4
    seed: int = 0
    max_outer: int = 20

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if self.max_iter < 1 or self.max_outer < 1:
            raise ValueError("iteration limits must be positive")


@dataclass(frozen=True, eq=False)
class Partition:
    """Cluster index per case (``0..K-1``) or ``TRIMMED``."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int, copy=True)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and (labels.max() >= self.n_clusters or labels.min() < TRIMMED):
            raise ValueError("labels out of range")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def trimmed(self) -> np.ndarray:
        return self.labels == TRIMMED

    def sizes(self) -> np.ndarray:
        """Number of non-trimmed members of each cluster."""
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_clusters)

    def __len__(self):
        return self.labels.size


@dataclass(frozen=True, eq=False)
class ClusterFit:
    """Result of one clustering run.

    Attributes
    ----------
    algorithm : str
        One of ``kmeans``, ``tkmeans``, ``skmeans``, ``rskc``.
    partition : Partition
        Final assignment; cases in ``trimmed`` are marked ``TRIMMED``.
    centers : ndarray, shape (K, p)
        Per-feature means of each cluster's non-trimmed members.
    weights : WeightVector or None
        Feature weights; present only for the sparse algorithms.
    weighted_trim, euclidean_trim : frozenset of int
        Cases trimmed by weighted distance and by unweighted distance.
    objective : float
        Within-cluster SS (plain/trimmed) or weighted between-cluster SS
        (sparse/robust sparse).
    n_iter : int
        Lloyd iterations for plain/trimmed fits, weight-update cycles for
        sparse fits.
    closest : ndarray of int
        Cluster each case is assigned to before trimming.
    trace : tuple of float
        Objective after each iteration of the winning start.
    degenerate : bool
        True if weight updating stopped because no feature had positive
        between-cluster SS.
    """

    algorithm: str
    partition: Partition
    centers: np.ndarray
    weights: WeightVector | None
    weighted_trim: frozenset
    euclidean_trim: frozenset
    objective: float
    n_iter: int
    seed: int
    closest: np.ndarray
    trace: tuple = ()
    degenerate: bool = False
    params: dict = field(default_factory=dict)

    @property
    def trimmed(self) -> frozenset:
        return self.weighted_trim | self.euclidean_trim

    @property
    def n_clusters(self) -> int:
        return self.partition.n_clusters


class LloydResult(NamedTuple):
    centers: np.ndarray
    labels: np.ndarray
    trimmed: np.ndarray
    objective: float
    n_iter: int
    trace: tuple


def trim_count(alpha: float, n: int) -> int:
    """Number of trimmed cases, ``floor(alpha * n)``."""
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    # guard against 10/78 * 78 = 9.999...
    return int(np.floor(alpha * n + 1e-9))


class _Metric:
    """Precomputed pieces of the expanded weighted distance for one ``X, w``."""

    def __init__(self, X: DataMatrix, weights=None):
        self.X = X
        if weights is None:
            w = np.ones(X.p)
        else:
            w = np.asarray(getattr(weights, "w", weights), dtype=float)
        self.w = w
        self.xw = X.filled * w
        self.xx = X.filled_sq @ w
        self.scale = None
        if not X.complete:
            seen = X.observed @ w
            self.scale = np.divide(w.sum(), seen, out=np.zeros(X.n), where=seen > 0)

    def __call__(self, centers) -> np.ndarray:
        """Distances to a stack of center sets, shape ``(S, K, p) -> (S, n, K)``."""
        S, K, p = centers.shape
        flat = centers.reshape(S * K, p)
        # ||x - c||^2_w = x'Wx - 2 x'Wc + c'Wc
        out = self.xx[:, None] - 2.0 * (self.xw @ flat.T)
        if self.scale is None:
            out += ((flat * flat) @ self.w)[None, :]
        else:
            out += self.X.observed @ (flat * flat * self.w).T
            out *= self.scale[:, None]
        np.maximum(out, 0.0, out=out)
        return out.reshape(self.X.n, S, K).transpose(1, 0, 2)


def distances(X, centers, weights=None) -> np.ndarray:
    """Squared (weighted) Euclidean distances from every case to every center.

    For incomplete cases the sum over observed features is rescaled by the
    total weight over the observed weight (``p / p_observed`` when
    unweighted).

    Returns
    -------
    ndarray, shape (n, K)
    """
    X = as_data_matrix(X)
    centers = np.asarray(centers, dtype=float)
    return _Metric(X, weights)(centers[None])[0]


def assign_cases(X, centers, weights=None) -> Partition:
    """Assign every case to its closest center; ties go to the lower index."""
    d = distances(X, centers, weights)
    return Partition(d.argmin(axis=1), d.shape[1])


def _batch_means(X: DataMatrix, labels, keep, n_clusters, fallback=None):
    """Per-feature means of the kept members of each cluster, for a stack of
    ``S`` labellings (``labels`` and ``keep`` have shape ``(S, n)``).

    Empty clusters raise unless ``fallback`` centers are given. A feature
    that no member observes takes the mean over all kept cases.
    """
    onehot = ((labels[..., None] == np.arange(n_clusters)) & keep[..., None]).astype(float)
    members = onehot.transpose(0, 2, 1)
    sizes = onehot.sum(axis=1)
    if X.complete:
        centers = (members @ X.filled) / np.maximum(sizes, 1)[..., None]
    else:
        m = X.observed.astype(float)
        counts = members @ m
        kept = keep.astype(float)
        kept_counts = kept @ m
        overall = np.divide(kept @ X.filled, kept_counts,
                            out=np.zeros(kept_counts.shape), where=kept_counts > 0)
        centers = np.where(counts > 0, (members @ X.filled) / np.maximum(counts, 1),
                           overall[:, None, :])
    for s, k in zip(*np.nonzero(sizes == 0)):
        if fallback is None:
            raise EmptyClusterError(k + 1)
        centers[s, k] = fallback[s, k]
    return centers


def _means(X, labels, keep, n_clusters, fallback=None):
    fb = None if fallback is None else np.asarray(fallback)[None]
    return _batch_means(X, labels[None], keep[None], n_clusters, fb)[0]


def update_centers(X, partition, trimmed=()) -> np.ndarray:
    """Centers as per-feature means of each cluster's non-trimmed members.

    Cases labelled ``TRIMMED`` in ``partition`` and cases listed in
    ``trimmed`` are left out. Raises :class:`EmptyClusterError` if a cluster
    has no remaining member.
    """
    X = as_data_matrix(X)
    labels = np.asarray(partition.labels)
    keep = labels >= 0
    keep[np.fromiter(trimmed, dtype=int)] = False
    return _means(X, labels, keep, partition.n_clusters)


def _trim_mask(dist, n_trim):
    """Mark the ``n_trim`` largest entries along the last axis; equal
    distances trim the lower index first."""
    trimmed = np.zeros(dist.shape, dtype=bool)
    if n_trim:
        index = np.broadcast_to(np.arange(dist.shape[-1]), dist.shape)
        order = np.lexsort((index, -dist), axis=-1)
        np.put_along_axis(trimmed, order[..., :n_trim], True, axis=-1)
    return trimmed


def _repair_empty(labels, dist, trimmed, n_clusters):
    """Give every empty cluster the kept case farthest from its own center."""
    for k in range(n_clusters):
        kept = ~trimmed
        sizes = np.bincount(labels[kept], minlength=n_clusters)
        if sizes[k]:
            continue
        donors = kept & (sizes[labels] > 1)
        cand = np.flatnonzero(donors)
        i = cand[np.argmax(dist[cand])]
        labels[i] = k
        dist[i] = 0.0


def _lloyd_batch(X: DataMatrix, centers, weights, n_trim, max_iter) -> list:
    """Independent Lloyd runs from each of ``S`` center sets ``(S, K, p)``.

    Runs are evaluated together but each stops on its own once its
    assignment and trimmed set repeat.
    """
    metric = _Metric(X, weights)
    centers = np.array(centers, dtype=float)
    S, K, _ = centers.shape
    labels = np.zeros((S, X.n), dtype=int)
    trimmed = np.zeros((S, X.n), dtype=bool)
    n_iter = np.zeros(S, dtype=int)
    traces = [[] for _ in range(S)]
    active = np.arange(S)
    for it in range(1, max_iter + 1):
        D = metric(centers[active])
        lab = D.argmin(axis=-1)
        dist = np.take_along_axis(D, lab[..., None], axis=-1)[..., 0]
        trim = _trim_mask(dist, n_trim)
        kept_sizes = ((lab[..., None] == np.arange(K)) & ~trim[..., None]).sum(axis=1)
        for j in np.flatnonzero((kept_sizes == 0).any(axis=1)):
            _repair_empty(lab[j], dist[j], trim[j], K)
        for j, s in enumerate(active):
            traces[s].append(float(dist[j][~trim[j]].sum()))
        if it > 1:
            same = (lab == labels[active]).all(axis=1) & (trim == trimmed[active]).all(axis=1)
        else:
            same = np.zeros(active.size, dtype=bool)
        labels[active] = lab
        trimmed[active] = trim
        n_iter[active] = it
        active = active[~same]
        if not active.size:
            break
        centers[active] = _batch_means(X, labels[active], ~trimmed[active], K)

    D = metric(centers)
    own = np.take_along_axis(D, labels[..., None], axis=-1)[..., 0]
    objective = np.where(trimmed, 0.0, own).sum(axis=1)
    return [LloydResult(centers[s], labels[s], trimmed[s], float(objective[s]),
                        int(n_iter[s]), tuple(traces[s])) for s in range(S)]


def lloyd(X, centers, weights=None, n_trim: int = 0, max_iter: int = 100) -> LloydResult:
    """Weighted, optionally trimmed, Lloyd iterations from given centers.

    Each iteration assigns all cases to their closest center, trims the
    ``n_trim`` cases with the largest distance to their own center and moves
    each center to the mean of its remaining members. Stops when neither
    assignment nor trimmed set changes. ``trace`` holds the trimmed
    within-cluster SS after each assignment step.
    """
    X = as_data_matrix(X)
    return _lloyd_batch(X, np.asarray(centers, dtype=float)[None], weights, n_trim, max_iter)[0]


def _initial_centers(X: DataMatrix, K: int, rng) -> np.ndarray:
    idx = rng.choice(X.n, size=K, replace=False)
    centers = X.values[idx].copy()
    if not X.complete:
        col_means = X.filled.sum(axis=0) / X.observed.sum(axis=0)
        missing = ~X.observed[idx]
        centers[missing] = np.broadcast_to(col_means, centers.shape)[missing]
    return centers


def _random_starts(X, K, n_starts, rng):
    return [_initial_centers(X, K, rng) for _ in range(n_starts)]


def _best_lloyd(X, candidates, weights, n_trim, max_iter) -> LloydResult:
    """Run Lloyd from each candidate; smallest objective wins, ties to the first."""
    results = _lloyd_batch(X, np.stack(candidates), weights, n_trim, max_iter)
    return results[int(np.argmin([r.objective for r in results]))]


def _check_k(X, K):
    if not 1 <= K <= X.n:
        raise ValueError(f"K must lie in [1, n={X.n}], got {K}")


def _check_l1(X, l1_bound):
    if not 1.0 <= l1_bound <= np.sqrt(X.p) * (1 + 1e-12):
        raise ValueError(f"l1_bound must lie in [1, sqrt(p)={np.sqrt(X.p):.4g}], got {l1_bound}")


def _plain_fit(X, K, n_trim, opts, init, algorithm, params):
    X = as_data_matrix(X)
    _check_k(X, K)
    if init is not None:
        starts = [np.asarray(init, dtype=float)]
    else:
        starts = _random_starts(X, K, opts.n_starts, np.random.default_rng(opts.seed))
    best = _best_lloyd(X, starts, None, n_trim, opts.max_iter)
    trimmed_idx = frozenset(int(i) for i in np.flatnonzero(best.trimmed))
    labels = np.where(best.trimmed, TRIMMED, best.labels)
    return ClusterFit(
        algorithm=algorithm,
        partition=Partition(labels, K),
        centers=best.centers,
        weights=None,
        weighted_trim=trimmed_idx,
        euclidean_trim=frozenset(),
        objective=best.objective,
        n_iter=best.n_iter,
        seed=opts.seed,
        closest=best.labels,
        trace=best.trace,
        params=params,
    )


def kmeans(X, K: int, opts: FitOptions = FitOptions(), init=None) -> ClusterFit:
    """Lloyd K-means, best of ``opts.n_starts`` random starts.

    Initial centers are ``K`` distinct cases drawn uniformly. The winning
    start has the smallest within-cluster sum of squares. Passing ``init``
    (a ``K x p`` array) runs a single start from those centers.
    """
    return _plain_fit(X, K, 0, opts, init, "kmeans", {"K": K})


def trimmed_kmeans(X, K: int, alpha: float, opts: FitOptions = FitOptions(),
                   init=None) -> ClusterFit:
    """Trimmed K-means.

    Every iteration trims the ``floor(alpha * n)`` cases farthest from their
    assigned center before the centers are recomputed. The final trimmed
    set is reported as ``weighted_trim`` (all weights equal).
    """
    X = as_data_matrix(X)
    n_trim = trim_count(alpha, X.n)
    if n_trim > X.n - K:
        raise ValueError(f"trimming {n_trim} of {X.n} cases leaves fewer than K={K}")
    return _plain_fit(X, K, n_trim, opts, init, "tkmeans", {"K": K, "alpha": alpha})


def _sparse_fit(X, K, l1_bound, alpha, opts, init, algorithm):
    X = as_data_matrix(X)
    _check_k(X, K)
    _check_l1(X, l1_bound)
    n_trim = trim_count(alpha, X.n)
    if 2 * n_trim > X.n - K:
        raise ValueError(f"trimming 2 x {n_trim} of {X.n} cases leaves fewer than K={K}")
    rng = np.random.default_rng(opts.seed)
    rows = np.arange(X.n)

    w = WeightVector.uniform(X.p)
    centers = None if init is None else np.asarray(init, dtype=float)
    trace = []
    degenerate = False
    for cycle in range(1, opts.max_outer + 1):
        # weighted (trimmed) K-means: fresh random starts each cycle plus the
        # previous centers, smallest trimmed within-cluster SS wins
        if init is None:
            candidates = _random_starts(X, K, opts.n_starts, rng)
            if centers is not None:
                candidates.insert(0, centers)
        else:
            candidates = [centers]
        res = _best_lloyd(X, candidates, w.w, n_trim, opts.max_iter)
        centers, labels, o_w = res.centers, res.labels, res.trimmed
        if n_trim:
            plain_centers = _means(X, labels, ~o_w, K)
            o_e = _trim_mask(distances(X, plain_centers)[rows, labels], n_trim)
        else:
            o_e = np.zeros(X.n, dtype=bool)
        B = per_feature_bcss(X, labels, np.flatnonzero(o_w | o_e), n_clusters=K, strict=False)
        try:
            new_w = solve_weights(B, l1_bound)
        except DegenerateObjectiveError:
            degenerate = True
            trace.append(float(w.w @ B))
            break
        change = np.abs(new_w.w - w.w).sum() / np.abs(w.w).sum()
        w = new_w
        trace.append(float(w.w @ B))
        if change < opts.tol:
            break

    trimmed = o_w | o_e
    params = {"K": K, "l1_bound": l1_bound}
    if algorithm == "rskc":
        params["alpha"] = alpha
    return ClusterFit(
        algorithm=algorithm,
        partition=Partition(np.where(trimmed, TRIMMED, labels), K),
        centers=_means(X, labels, ~trimmed, K, fallback=centers),
        weights=w,
        weighted_trim=frozenset(int(i) for i in np.flatnonzero(o_w)),
        euclidean_trim=frozenset(int(i) for i in np.flatnonzero(o_e)),
        objective=trace[-1],
        n_iter=cycle,
        seed=opts.seed,
        closest=labels,
        trace=tuple(trace),
        degenerate=degenerate,
        params=params,
    )


def sparse_kmeans(X, K: int, l1_bound: float, opts: FitOptions = FitOptions(),
                  init=None) -> ClusterFit:
    """Sparse K-means.

    Starting from equal weights ``1/sqrt(p)``, alternates a weighted
    K-means step with the closed-form weight update until the relative L1
    change of the weights falls below ``opts.tol`` (at most
    ``opts.max_outer`` cycles). Each weighted K-means step runs Lloyd to
    convergence from ``opts.n_starts`` random starts and from the previous
    centers, keeping the smallest weighted within-cluster SS.
    ``objective`` is the final weighted between-cluster SS.
    """
    return _sparse_fit(X, K, l1_bound, 0.0, opts, init, "skmeans")


def rsk_means(X, K: int, l1_bound: float, alpha: float, opts: FitOptions = FitOptions(),
              init=None) -> ClusterFit:
    """Robust sparse K-means.

    Each cycle runs weighted trimmed K-means to convergence, which yields
    the weighted trimmed set ``O_W``. It then measures every case's
    unweighted squared distance to its cluster mean (computed without
    ``O_W``) and trims the ``floor(alpha * n)`` largest as ``O_E``. The
    weights are re-solved on between-cluster sums of squares that leave out
    ``O = O_W | O_E``. Cycles repeat until the weights settle.

    With ``alpha = 0`` this is exactly :func:`sparse_kmeans`.
    """
    return _sparse_fit(X, K, l1_bound, alpha, opts, init, "rskc")
