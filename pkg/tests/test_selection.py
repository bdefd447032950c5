import os

import numpy as np
import pytest

from rskmeans import (ClestParams, FitOptions, calibrate_l1_bound, clest, clest_select_k, load_csv,
                      standardize_rows)
from rskmeans.selection import CalibrationError, select_l1_per_dataset
from rskmeans.simulation import generate_dataset


def blobs(seed, K=2, n_per=15, p=3, sep=8.0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(K), n_per)
    x = rng.normal(size=(K * n_per, p))
    x[:, 0] += sep * labels
    return x


FAST = ClestParams(n_splits=4, n_ref=4, seed=1)


def test_clest_two_blobs():
    res = clest(blobs(0), [2, 3, 4], params=FAST)
    assert res.k == 2
    assert res.observed[2] < 0.05
    assert set(res.reference) == {2, 3, 4}


def test_clest_three_blobs_by_gain():
    res = clest(blobs(3, K=3), [2, 3, 4], params=FAST)
    assert res.k == 3
    assert res.gain[3] > FAST.d_min
    assert res.gain[3] == max(res.gain.values())


def test_clest_sparse_and_trimmed():
    x = blobs(1, p=6)
    x[0, 5] = 40.0
    assert clest_select_k(x, [2, 3], alpha=0.1, params=FAST) == 2
    assert clest_select_k(x, [2, 3], alpha=0.1, l1_bound=1.5, params=FAST) == 2


def test_clest_no_structure_falls_back_to_smallest():
    x = np.random.default_rng(4).uniform(size=(30, 2))
    res = clest(x, [2, 3], params=ClestParams(n_splits=4, n_ref=4, d_min=0.9, seed=1))
    assert res.k == 2


def test_clest_single_k():
    res = clest(blobs(0), [3], params=FAST)
    assert res.k == 3 and res.observed == {}


def test_clest_reproducible():
    a = clest(blobs(2), [2, 3], params=FAST)
    b = clest(blobs(2), [2, 3], params=FAST)
    assert a == b


@pytest.mark.parametrize("ks", [[1, 2], [2, 11], []])
def test_clest_range(ks):
    with pytest.raises(ValueError):
        clest(blobs(0), ks)


def test_select_l1_picks_closest_count():
    datasets = [generate_dataset("clean", s)[0] for s in (1, 2)]
    cands = [1.5, 6.2, 22.0]
    chosen = select_l1_per_dataset(datasets, 3, candidates=cands, opts=FitOptions(n_starts=5))
    assert chosen == [6.2, 6.2]
    assert calibrate_l1_bound(datasets, 3, 1 / 60, candidates=cands,
                              opts=FitOptions(n_starts=5)) == 6.2


def test_select_l1_errors():
    with pytest.raises(ValueError):
        calibrate_l1_bound([], 3)
    with pytest.raises(ValueError):
        calibrate_l1_bound([blobs(0)], 2, candidates=[])
    with pytest.raises(CalibrationError) as err:
        calibrate_l1_bound([blobs(0)], 2, candidates=[5.0])
    assert err.value.index == 0


EXPRESSION = os.environ.get("RSK_EXPRESSION_DATA")


@pytest.mark.skipif(not EXPRESSION, reason="set RSK_EXPRESSION_DATA to a cases-by-genes CSV")
def test_clest_on_expression_data():
    # 78 tumours; Clest over K = 2..5 for trimming counts 0, 1, 5 and 10
    X = standardize_rows(load_csv(EXPRESSION, has_header=True, id_column=True), robust=True)
    for count in (0, 1, 5, 10):
        assert clest_select_k(X, range(2, 6), count / X.n, 6.0) == 2
