"""Feature weights for sparse clustering.

Given per-feature between-cluster sums of squares ``B``, the weights solve::

    maximize   sum_j w_j B_j
    subject to ||w||_2 <= 1, ||w||_1 <= l, w_j >= 0

The maximizer is a normalized soft-thresholding of ``B``; the threshold is
zero when the L1 constraint is inactive and is otherwise found by bisection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateObjectiveError

# far inside the 1e-6 contract so the objective is accurate for large B
L1_TOL = 1e-12
MAX_BISECTION = 100


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Non-negative feature weights and the L1 bound they were fitted under."""

    w: np.ndarray
    l1_bound: float

    @property
    def nonzero(self) -> int:
        return int(np.count_nonzero(self.w > 0))

    def __len__(self):
        return len(self.w)

    @classmethod
    def uniform(cls, p: int) -> "WeightVector":
        return cls(np.full(p, 1.0 / np.sqrt(p)), float(np.sqrt(p)))


def soft_threshold(b, delta: float) -> np.ndarray:
    """Componentwise ``max(b - delta, 0)``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return np.maximum(np.asarray(b, dtype=float) - delta, 0.0)


def _normalized(b, delta):
    s = soft_threshold(b, delta)
    norm = np.linalg.norm(s)
    return s / norm if norm > 0 else s


def solve_weights(B, l1_bound: float) -> WeightVector:
    """Maximize ``w.B`` over the non-negative L2 unit ball intersected with
    the L1 ball of radius ``l1_bound``.

    Parameters
    ----------
    B : array_like, shape (p,)
        Between-cluster sums of squares, one per feature.
    l1_bound : float
        Between 1 and ``sqrt(p)``.

    Returns
    -------
    WeightVector

    Raises
    ------
    DegenerateObjectiveError
        If no component of ``B`` is positive.
    """
    B = np.asarray(B, dtype=float)
    p = B.size
    if not 1.0 <= l1_bound <= np.sqrt(p) * (1 + 1e-12):
        raise ValueError(f"l1_bound must lie in [1, sqrt(p)={np.sqrt(p):.4g}], got {l1_bound}")
    if not np.any(B > 0):
        raise DegenerateObjectiveError("no feature has a positive between-cluster sum of squares")

    w = _normalized(B, 0.0)
    # relative slack so that l1_bound = sqrt(p) always keeps B+ / ||B+||
    if w.sum() <= l1_bound * (1 + 1e-12):
        return WeightVector(w, float(l1_bound))

    # several features tie for the largest B and l1_bound is at most
    # sqrt(#ties): every split of mass across them is optimal, spread evenly
    top = B == B.max()
    n_top = int(top.sum())
    if l1_bound <= np.sqrt(n_top):
        return WeightVector(np.where(top, l1_bound / n_top, 0.0), float(l1_bound))

    lo, hi = 0.0, float(B.max())
    for _ in range(MAX_BISECTION):
        delta = 0.5 * (lo + hi)
        w = _normalized(B, delta)
        l1 = w.sum()
        if abs(l1 - l1_bound) <= L1_TOL:
            break
        if l1 > l1_bound:
            lo = delta
        else:
            hi = delta
    if w.sum() > l1_bound + L1_TOL:
        w = _normalized(B, hi)
    return WeightVector(w, float(l1_bound))
