"""Data container, CSV ingestion, row standardization and per-feature
between-cluster dissimilarities.

Missing entries are carried by a boolean ``observed`` mask. Unobserved cells
are stored as NaN and are never used in arithmetic: every computation goes
through :attr:`DataMatrix.filled` together with the mask.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyClusterError, ParseError, ZeroScaleError

#: Consistency factor making the MAD an estimate of the SD under normality.
MAD_SCALE = 1.4826


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An ``n x p`` numeric matrix (rows are cases) with a missing-entry mask.

    Parameters
    ----------
    values : array_like, shape (n, p)
        Data values. Entries where ``observed`` is False are replaced by NaN.
    observed : array_like of bool, shape (n, p), optional
        True where the entry is present. Defaults to ``isfinite(values)``.
    case_ids, feature_ids : sequence of str, optional
        Row and column labels; generated as ``"1".."n"`` and ``"V1".."Vp"``.
    """

    values: np.ndarray
    observed: np.ndarray = None
    case_ids: tuple = None
    feature_ids: tuple = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError(f"data must be 2-dimensional, got shape {values.shape}")
        if self.observed is None:
            observed = np.isfinite(values)
        else:
            observed = np.array(self.observed, dtype=bool, copy=True)
            if observed.shape != values.shape:
                raise DataError("observed mask shape does not match values")
        n, p = values.shape
        if n < 2 or p < 1:
            raise DataError(f"need at least 2 cases and 1 feature, got {n}x{p}")
        if not np.all(np.isfinite(values[observed])):
            raise DataError("observed entries must be finite")
        values[~observed] = np.nan

        case_ids = _ids(self.case_ids, n, "", "case")
        feature_ids = _ids(self.feature_ids, p, "V", "feature")
        empty_rows = np.flatnonzero(~observed.any(axis=1))
        if empty_rows.size:
            raise DataError(f"case {case_ids[empty_rows[0]]!r} has no observed entries")
        empty_cols = np.flatnonzero(~observed.any(axis=0))
        if empty_cols.size:
            raise DataError(f"feature {feature_ids[empty_cols[0]]!r} has no observed entries")

        values.flags.writeable = False
        observed.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "case_ids", case_ids)
        object.__setattr__(self, "feature_ids", feature_ids)

    @classmethod
    def from_array(cls, array, case_ids=None, feature_ids=None) -> "DataMatrix":
        """Wrap a float array, treating NaN entries as missing."""
        return cls(np.asarray(array, dtype=float), None, case_ids, feature_ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @cached_property
    def complete(self) -> bool:
        """True when no entry is missing."""
        return bool(self.observed.all())

    @cached_property
    def filled(self) -> np.ndarray:
        """Values with unobserved cells set to 0.0 (always combine with the mask)."""
        out = np.where(self.observed, self.values, 0.0)
        out.flags.writeable = False
        return out

    @cached_property
    def filled_sq(self) -> np.ndarray:
        out = self.filled ** 2
        out.flags.writeable = False
        return out

    def subset(self, rows) -> "DataMatrix":
        """Return the cases indexed by ``rows`` as a new matrix."""
        rows = np.asarray(rows)
        return DataMatrix(
            self.values[rows],
            self.observed[rows],
            tuple(self.case_ids[i] for i in np.arange(self.n)[rows]),
            self.feature_ids,
        )

    def with_values(self, values) -> "DataMatrix":
        """Same mask and labels, new values."""
        return DataMatrix(values, self.observed, self.case_ids, self.feature_ids)


def _ids(ids, count, prefix, what):
    if ids is None:
        return tuple(f"{prefix}{i + 1}" for i in range(count))
    ids = tuple(str(x) for x in ids)
    if len(ids) != count:
        raise DataError(f"expected {count} {what} ids, got {len(ids)}")
    return ids


def as_data_matrix(X) -> DataMatrix:
    if isinstance(X, DataMatrix):
        return X
    return DataMatrix.from_array(X)


def load_csv(path, has_header: bool = False, na_token: str = "NA",
             delimiter: str = ",", id_column: bool = False) -> DataMatrix:
    """Read a comma-separated numeric matrix, one case per row.

    Parameters
    ----------
    path : str or Path
        UTF-8 encoded file.
    has_header : bool
        If True the first row holds feature names.
    na_token : str
        Field value marking a missing entry. Empty fields are also missing.
    delimiter : str
        Field separator.
    id_column : bool
        If True the first column holds case labels.

    Returns
    -------
    DataMatrix

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ParseError
        On ragged rows or non-numeric fields; the message names the row.
    DataError
        If a case or a feature has no observed entry.
    """
    path = Path(path)
    rows = []
    line_numbers = []
    header = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            if has_header and header is None:
                header = [f.strip() for f in fields]
                continue
            rows.append(fields)
            line_numbers.append(reader.line_num)

    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0])
    case_ids = [] if id_column else None
    values = np.empty((len(rows), width - int(id_column)))
    observed = np.ones(values.shape, dtype=bool)
    for r, (fields, line) in enumerate(zip(rows, line_numbers)):
        if len(fields) != width:
            raise ParseError(
                f"{path}: row {line} has {len(fields)} fields, expected {width}", row=line)
        if id_column:
            case_ids.append(fields[0].strip())
            fields = fields[1:]
        for c, raw in enumerate(fields):
            token = raw.strip()
            if token == na_token or token == "":
                observed[r, c] = False
                values[r, c] = np.nan
                continue
            try:
                values[r, c] = float(token)
            except ValueError:
                raise ParseError(
                    f"{path}: row {line}, column {c + 1}: cannot parse {token!r}",
                    row=line) from None

    feature_ids = None
    if header is not None:
        if len(header) != width:
            raise ParseError(f"{path}: header has {len(header)} fields, expected {width}", row=1)
        feature_ids = header[1:] if id_column else header
    return DataMatrix(values, observed, case_ids, feature_ids)


def standardize_rows(X, robust: bool = False, ddof: int = 1) -> DataMatrix:
    """Center and scale every case using its own observed values.

    With ``robust=False`` the location is the mean and the scale the standard
    deviation (divisor ``m - ddof`` for ``m`` observed values). With
    ``robust=True`` they are the median and the MAD times 1.4826.
    The missing-entry mask is unchanged.

    Raises
    ------
    ZeroScaleError
        If a row has zero scale (including rows with a single observed value).
    """
    X = as_data_matrix(X)
    vals = np.where(X.observed, X.values, np.nan)
    counts = X.observed.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        if robust:
            loc = np.nanmedian(vals, axis=1)
            scale = MAD_SCALE * np.nanmedian(np.abs(vals - loc[:, None]), axis=1)
        else:
            loc = np.nanmean(vals, axis=1)
            ss = np.nansum((vals - loc[:, None]) ** 2, axis=1)
            scale = np.sqrt(ss / (counts - ddof))
    bad = np.flatnonzero(~(scale > 0) | (counts < 2))
    if bad.size:
        raise ZeroScaleError(X.case_ids[bad[0]])
    return X.with_values((vals - loc[:, None]) / scale[:, None])


def feature_dissimilarity(X, i: int, k: int) -> np.ndarray:
    """Per-feature squared differences between cases ``i`` and ``k``.

    Features unobserved in either case are NaN.
    """
    X = as_data_matrix(X)
    both = X.observed[i] & X.observed[k]
    diff = X.filled[i] - X.filled[k]
    return np.where(both, diff * diff, np.nan)


def per_feature_bcss(X, labels, excluded=(), n_clusters: int | None = None,
                     strict: bool = True) -> np.ndarray:
    """Between-cluster sum of squares of each feature.

    For feature ``j`` this is ``(1/n) sum_i sum_i' d(i,i',j) -
    sum_k (1/n_k) sum_{i,i' in C_k} d(i,i',j)`` over the cases that are not
    excluded, computed as ``2 * (TSS_j - WSS_j)``. With missing data each
    feature uses the included cases that observe it.

    Parameters
    ----------
    X : DataMatrix or array_like
    labels : Partition or array_like of int
        Cluster index ``0..K-1`` per case; negative values mark trimmed cases,
        which must also appear in ``excluded``.
    excluded : iterable of int
        Case indices left out of the computation.
    n_clusters : int, optional
        Number of clusters ``K``; inferred from ``labels`` when omitted.
    strict : bool
        If True, a cluster with no remaining cases raises
        :class:`EmptyClusterError`; otherwise it contributes nothing.

    Returns
    -------
    ndarray, shape (p,)
    """
    X = as_data_matrix(X)
    if hasattr(labels, "labels"):
        n_clusters = labels.n_clusters if n_clusters is None else n_clusters
        labels = labels.labels
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (X.n,):
        raise DataError(f"expected {X.n} labels, got shape {labels.shape}")
    if n_clusters is None:
        n_clusters = int(labels.max()) + 1

    include = np.ones(X.n, dtype=bool)
    excluded = np.fromiter(excluded, dtype=int)
    include[excluded] = False
    unassigned = np.flatnonzero(include & (labels < 0))
    if unassigned.size:
        raise DataError(f"case {unassigned[0]} is neither assigned nor excluded")

    x = X.filled[include]
    lab = labels[include]
    if X.complete:
        tss = _sum_sq(x)
        wss = np.zeros(X.p)
        for k in range(n_clusters):
            members = lab == k
            if not members.any():
                if strict:
                    raise EmptyClusterError(k + 1)
                continue
            wss += _sum_sq(x[members])
    else:
        m = X.observed[include]
        tss = _masked_sum_sq(x, m)
        wss = np.zeros(X.p)
        for k in range(n_clusters):
            members = lab == k
            if not members.any():
                if strict:
                    raise EmptyClusterError(k + 1)
                continue
            wss += _masked_sum_sq(x[members], m[members])
    return 2.0 * (tss - wss)


def _sum_sq(x):
    return ((x - x.mean(axis=0)) ** 2).sum(axis=0)


def _masked_sum_sq(x, m):
    counts = m.sum(axis=0)
    means = np.divide(x.sum(axis=0), counts, out=np.zeros(x.shape[1]), where=counts > 0)
    return (m * (x - means) ** 2).sum(axis=0)
