"""Choosing the L1 bound and the number of clusters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataMatrix, as_data_matrix
from .engine import FitOptions, distances, rsk_means, sparse_kmeans, trimmed_kmeans
from .errors import FitError, RSKError
from .metrics import cer

DEFAULT_L1_CANDIDATES = tuple(round(5.7 + 0.1 * i, 1) for i in range(11))


class CalibrationError(RSKError):
    def __init__(self, index, cause):
        super().__init__(f"dataset {index}: {type(cause).__name__}: {cause}")
        self.index = index


def _sparse(X, K, l1_bound, alpha, opts):
    if alpha > 0:
        return rsk_means(X, K, l1_bound, alpha, opts)
    return sparse_kmeans(X, K, l1_bound, opts)


def select_l1_per_dataset(datasets, K: int, alpha: float = 0.0, target_nonzero: int = 50,
                          candidates=DEFAULT_L1_CANDIDATES,
                          opts: FitOptions = FitOptions()) -> list:
    """For each dataset, the candidate bound whose fit has the number of
    non-zero weights closest to ``target_nonzero`` (ties to the smaller
    bound). Uses sparse K-means when ``alpha`` is 0, robust sparse K-means
    otherwise."""
    candidates = sorted(float(c) for c in candidates)
    if not candidates:
        raise ValueError("no candidate bounds")
    if not datasets:
        raise ValueError("no datasets")
    chosen = []
    for i, X in enumerate(datasets):
        best, best_gap = None, None
        for bound in candidates:
            try:
                fit = _sparse(X, K, bound, alpha, opts)
            except Exception as exc:
                raise CalibrationError(i, exc) from exc
            gap = abs(fit.weights.nonzero - target_nonzero)
            if best_gap is None or gap < best_gap:
                best, best_gap = bound, gap
        chosen.append(best)
    return chosen


def calibrate_l1_bound(datasets, K: int, alpha: float = 0.0, target_nonzero: int = 50,
                       candidates=DEFAULT_L1_CANDIDATES,
                       opts: FitOptions = FitOptions()) -> float:
    """Average over datasets of the per-dataset best bound; see
    :func:`select_l1_per_dataset`."""
    return float(np.mean(select_l1_per_dataset(datasets, K, alpha, target_nonzero,
                                               candidates, opts)))


@dataclass(frozen=True)
class ClestParams:
    """Resampling settings for :func:`clest_select_k`.

    Attributes
    ----------
    n_splits : int
        Train/test splits per dataset.
    n_ref : int
        Uniform reference datasets.
    d_min : float
        Minimum gain of the reference statistic over the observed one for
        a K to qualify.
    train_fraction : float
        Share of cases used for training.
    n_starts : int
        Random starts for every sub-fit.
    max_retries : int
        Resamples allowed for a split whose fit degenerates.
    """

    n_splits: int = 10
    n_ref: int = 20
    d_min: float = 0.05
    train_fraction: float = 2 / 3
    n_starts: int = 5
    seed: int = 0
    max_retries: int = 10


@dataclass(frozen=True)
class ClestResult:
    k: int
    observed: dict
    reference: dict

    @property
    def gain(self) -> dict:
        return {k: self.reference[k] - self.observed[k] for k in self.observed}


def _cluster(X, K, alpha, l1_bound, seed, n_starts):
    opts = FitOptions(n_starts=n_starts, seed=seed)
    if l1_bound is None:
        return trimmed_kmeans(X, K, alpha, opts)
    return rsk_means(X, K, l1_bound, alpha, opts)


def _split_statistic(X: DataMatrix, K, alpha, l1_bound, params, rng):
    n_train = int(round(params.train_fraction * X.n))
    cers = []
    for _ in range(params.n_splits):
        for attempt in range(params.max_retries + 1):
            perm = rng.permutation(X.n)
            train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
            seeds = rng.integers(0, 2**31, size=2)
            try:
                train_fit = _cluster(X.subset(train), K, alpha, l1_bound, int(seeds[0]), params.n_starts)
                test_fit = _cluster(X.subset(test), K, alpha, l1_bound, int(seeds[1]), params.n_starts)
            except (FitError, ValueError):
                continue
            if train_fit.degenerate or test_fit.degenerate or np.any(train_fit.partition.sizes() == 0):
                continue
            break
        else:
            raise FitError(f"K={K}: no usable split after {params.max_retries + 1} attempts")
        w = None if train_fit.weights is None else train_fit.weights.w
        predicted = distances(X.subset(test), train_fit.centers, w).argmin(axis=1)
        cers.append(cer(predicted, test_fit.partition, test_fit.trimmed))
    return float(np.median(cers))


def _reference(X: DataMatrix, rng) -> DataMatrix:
    lo = np.nanmin(X.values, axis=0)
    hi = np.nanmax(X.values, axis=0)
    values = rng.uniform(lo, hi, size=X.shape)
    return DataMatrix(values, X.observed, X.case_ids, X.feature_ids)


def clest(X, k_range, alpha: float = 0.0, l1_bound: float | None = None,
          params: ClestParams = ClestParams()) -> ClestResult:
    """Resampling estimate of the number of clusters.

    For every ``K`` the cases are split repeatedly into training and test
    parts. The clustering fitted on the training part labels the test
    cases by nearest center, and the CER against a clustering fitted
    directly on the test part is recorded; the statistic is the median CER
    over splits. The same statistic averaged over uniform reference
    datasets (spanning each feature's observed range) gives the null
    value. The chosen ``K`` maximizes null minus observed among those
    whose gain exceeds ``params.d_min``; otherwise the smallest ``K``.

    The algorithm is robust sparse K-means with ``l1_bound`` and ``alpha``,
    or trimmed K-means with ``alpha`` when ``l1_bound`` is None.
    """
    X = as_data_matrix(X)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k_range")
    if ks[0] < 2 or ks[-1] > X.n / 3:
        raise ValueError(f"k_range must lie within [2, n/3 = {X.n / 3:.1f}]")
    if len(ks) == 1:
        return ClestResult(ks[0], {}, {})

    refs = [_reference(X, np.random.default_rng([params.seed, 1, b])) for b in range(params.n_ref)]
    observed, reference = {}, {}
    for K in ks:
        observed[K] = _split_statistic(
            X, K, alpha, l1_bound, params, np.random.default_rng([params.seed, 2, K, 0]))
        reference[K] = float(np.mean([
            _split_statistic(R, K, alpha, l1_bound, params,
                             np.random.default_rng([params.seed, 2, K, b + 1]))
            for b, R in enumerate(refs)]))
    gains = {K: reference[K] - observed[K] for K in ks}
    qualified = [K for K in ks if gains[K] > params.d_min]
    k = max(qualified, key=lambda K: (gains[K], -K)) if qualified else ks[0]
    return ClestResult(k, observed, reference)


def clest_select_k(X, k_range, alpha: float = 0.0, l1_bound: float | None = None,
                   params: ClestParams = ClestParams()) -> int:
    """The number of clusters chosen by :func:`clest`."""
    return clest(X, k_range, alpha, l1_bound, params).k
