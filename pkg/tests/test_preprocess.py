import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from sklearn.base import clone

from oracles import pearson_two_pass
from flowsentry.flowdata import Dataset
from flowsentry.preprocess import (FlowPreprocessor, PreprocessError, SMOTEResampler, apply_normalizer, clean,
                                   feature_label_correlation, fit_normalizer, kfold_partition,
                                   select_top_k_features, smote_oversample, smote_samples, split_train_test)


def ds_from(X, y):
    return Dataset.from_arrays(np.asarray(X, dtype=float), np.asarray(y))


# ---------------------------------------------------------------- cleaning


def test_clean_counts():
    X = [[1, 2], [np.nan, 1], [np.inf, 0], [-np.inf, np.nan], [3, 4]]
    out, rep = clean(ds_from(X, [0, 1, 0, 1, 1]))
    assert (rep.rows_in, rep.rows_out, rep.rows_dropped_nan, rep.rows_dropped_inf) == (5, 2, 2, 1)
    assert rep.rows_out == rep.rows_in - rep.rows_dropped_nan - rep.rows_dropped_inf
    assert np.isfinite(out.X).all()
    assert out.label_binary.tolist() == [0, 1]


def test_clean_identity_and_idempotence():
    d = ds_from([[1, 2], [3, 4]], [0, 1])
    out, rep = clean(d)
    assert rep.rows_in == rep.rows_out == 2 and rep.rows_dropped_nan == rep.rows_dropped_inf == 0
    dirty = ds_from([[1, np.nan], [3, 4], [np.inf, 1], [5, 6]], [0, 1, 0, 0])
    once, _ = clean(dirty)
    twice, rep2 = clean(once)
    assert np.array_equal(once.X, twice.X) and rep2.rows_out == rep2.rows_in


def test_clean_all_dropped():
    with pytest.raises(PreprocessError, match="empty after cleaning"):
        clean(ds_from([[np.nan]], [0]))


# ----------------------------------------------------------- normalization


def test_minmax_example():
    p = fit_normalizer(np.array([[0.0], [5.0], [10.0]]), "minmax")
    assert p.loc[0] == 0 and p.scale[0] == 10
    assert apply_normalizer(p, np.array([[0.0], [5.0], [10.0]]))[:, 0].tolist() == [0.0, 0.5, 1.0]
    # out of range test values are clipped to [-0.5, 1.5]
    assert apply_normalizer(p, np.array([[-100.0], [100.0], [12.0]]))[:, 0].tolist() == [-0.5, 1.5, 1.2]


def test_zscore_example():
    p = fit_normalizer(np.array([[1.0], [2.0], [3.0]]), "zscore")
    assert p.loc[0] == 2.0
    assert p.scale[0] == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    out = apply_normalizer(p, np.array([[1.0], [2.0], [3.0]]))[:, 0]
    assert out == pytest.approx([-1.22474, 0.0, 1.22474], abs=1e-5)


@pytest.mark.parametrize("method", ["minmax", "zscore"])
def test_constant_column(method):
    X = np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 5.0]])
    p = fit_normalizer(X, method)
    assert p.constant.tolist() == [True, False]
    assert apply_normalizer(p, X)[:, 0].tolist() == [0.0, 0.0, 0.0]


def test_normalizer_schema_mismatch():
    d = ds_from([[1, 2], [3, 4]], [0, 1])
    p = fit_normalizer(d)
    with pytest.raises(PreprocessError):
        apply_normalizer(p, np.zeros((2, 3)))
    other = Dataset.from_arrays(np.zeros((2, 2)), [0, 1], feature_names=["a", "b"])
    with pytest.raises(PreprocessError):
        apply_normalizer(p, other)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 5)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_normalizer_train_ranges(X):
    mm = apply_normalizer(fit_normalizer(X, "minmax"), X)
    assert mm.min() >= 0.0 and mm.max() <= 1.0
    zp = fit_normalizer(X, "zscore")
    assert (zp.scale >= 0).all()
    z = apply_normalizer(zp, X)
    for j in range(X.shape[1]):
        if zp.constant[j]:
            continue
        # tolerance relative to the spread; tiny spreads lose digits to cancellation
        if zp.scale[j] < 1e-3 * max(1.0, abs(zp.loc[j])):
            continue
        assert abs(z[:, j].mean()) <= 1e-9
        assert abs(z[:, j].std() - 1.0) <= 1e-9


# ------------------------------------------------------------- correlation


def test_correlation_examples():
    y = np.array([0, 0, 1, 1])
    X = np.column_stack([[1, 2, 3, 4], y, [7, 7, 7, 7]]).astype(float)
    c = feature_label_correlation(ds_from(X, y))
    assert c.r[0] == pytest.approx(0.89443, abs=1e-5)
    assert c.r[1] == pytest.approx(1.0, abs=1e-12)
    assert c.r[2] == 0.0 and not c.defined[2]
    assert c.defined[:2].all()


def test_correlation_single_class():
    c = feature_label_correlation(ds_from([[1.0], [2.0]], [1, 1]))
    assert not c.defined.any() and c.r.tolist() == [0.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 300), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_correlation_matches_two_pass(n, d, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 100, d) + y[:, None] * rng.normal(size=d)
    c = feature_label_correlation(ds_from(X, y))
    for j in range(d):
        assert abs(c.r[j] - pearson_two_pass(X[:, j].tolist(), y.tolist())) <= 1e-12
        assert abs(c.r[j]) <= 1.0


def test_select_top_k():
    y = np.array([0, 0, 1, 1])
    X = np.column_stack([[1, 2, 3, 4], [4, 3, 2, 1], [0, 1, 1, 1], [5, 5, 5, 5]]).astype(float)
    c = feature_label_correlation(ds_from(X, y))
    sel = select_top_k_features(c, 2)
    assert sel.selected_indices == (0, 1)  # equal |r|, lower index first
    everything = select_top_k_features(c, 50)
    assert sorted(everything.selected_indices) == [0, 1, 2]  # constant feature excluded
    assert len(set(everything.selected_indices)) == len(everything.selected_indices)
    rs = [abs(c.r[i]) for i in everything.selected_indices]
    assert rs == sorted(rs, reverse=True)
    with pytest.raises(PreprocessError):
        select_top_k_features(c, 0)


# ------------------------------------------------------------------- SMOTE


def test_smote_midpoint_example():
    class HalfRng:
        def permutation(self, n):
            return np.arange(n)

        def integers(self, lo, hi, size):
            return np.zeros(size, dtype=np.int64)

        def random(self, size):
            return np.full(size, 0.5)

    pts, seed, nn, u = smote_samples(np.array([[0.0, 0.0], [1.0, 1.0]]), 1, 1, HalfRng())
    assert pts.tolist() == [[0.5, 0.5]]


def test_smote_count_and_noop():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(150, 3))
    y = np.array([0] * 100 + [1] * 50)
    out = smote_oversample(ds_from(X, y), k_neighbors=5, target_ratio=1.0, seed=1)
    assert len(out) == 200 and out.synthetic.sum() == 50
    assert (out.label_binary[out.synthetic] == 1).all()
    assert np.array_equal(out.X[:150], X)
    same = smote_oversample(ds_from(X, y), target_ratio=0.5)
    assert len(same) == 150 and not same.synthetic.any()


def test_smote_errors_and_k_reduction():
    with pytest.raises(PreprocessError, match="SMOTE needs >=2 minority samples"):
        smote_oversample(ds_from(np.zeros((4, 1)), [0, 0, 0, 1]))
    X = np.arange(10, dtype=float).reshape(-1, 1)
    with pytest.warns(UserWarning, match="reducing k_neighbors"):
        out = smote_oversample(ds_from(X, [0] * 7 + [1] * 3), k_neighbors=5)
    assert out.synthetic.sum() == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(31, 120), st.integers(1, 8), st.floats(0.2, 1.0), st.integers(0, 10_000))
def test_smote_segment_and_ratio(n_min, n_maj, k, ratio, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_min + n_maj, 3))
    y = np.array([1] * n_min + [0] * n_maj)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out, det = smote_oversample(ds_from(X, y), k, ratio, seed, return_details=True)
    counts = np.bincount(out.label_binary, minlength=2)
    assert counts[1] / counts[0] >= ratio - 1e-12
    syn = out.X[out.synthetic]
    a, b = X[det["seed"]], X[det["neighbor"]]
    assert ((det["u"] >= 0) & (det["u"] < 1)).all()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    tol = 1e-12 * (1 + np.abs(hi))
    assert ((syn >= lo - tol) & (syn <= hi + tol)).all()
    assert (det["seed"] != det["neighbor"]).all()


def test_smote_resampler_estimator():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2))
    y = np.array([0] * 30 + [1] * 10)
    r = SMOTEResampler(k_neighbors=3, random_state=4)
    Xr, yr = r.fit_resample(X, y)
    assert Xr.shape == (60, 2) and yr.sum() == 30 and r.synthetic_mask_.sum() == 20
    assert clone(r).get_params() == r.get_params()


# --------------------------------------------------------- split / k-fold


def test_split_arithmetic_and_determinism():
    y = np.array([0] * 800 + [1] * 200)
    d = ds_from(np.arange(1000, dtype=float).reshape(-1, 1), y)
    tr, te = split_train_test(d, 0.8, seed=7)
    assert (np.bincount(tr.label_binary).tolist(), np.bincount(te.label_binary).tolist()) == ([640, 160], [160, 40])
    ids = np.concatenate([tr.X[:, 0], te.X[:, 0]])
    assert sorted(ids.tolist()) == list(range(1000))
    tr2, _ = split_train_test(d, 0.8, seed=7)
    assert np.array_equal(tr.X, tr2.X)


def test_split_boundary_and_errors():
    d = ds_from(np.zeros((10, 1)), [0] * 5 + [1] * 5)
    with pytest.raises(PreprocessError):
        split_train_test(d, 0.999, seed=0)
    with pytest.raises(PreprocessError):
        split_train_test(d, 1.0)
    with pytest.raises(PreprocessError):
        split_train_test(ds_from(np.zeros((5, 1)), [0, 0, 0, 0, 1]), 0.8)
    tr, te = split_train_test(ds_from(np.zeros((10, 1)), [0] * 10), 0.9, stratified=False)
    assert (len(tr), len(te)) == (9, 1)


def test_split_refuses_synthetic_rows():
    rng = np.random.default_rng(0)
    d = smote_oversample(ds_from(rng.normal(size=(20, 2)), [0] * 14 + [1] * 6), k_neighbors=2)
    with pytest.raises(PreprocessError, match="synthetic"):
        split_train_test(d)
    with pytest.raises(PreprocessError, match="synthetic"):
        kfold_partition(d, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 100), st.integers(2, 100), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_split_stratification_property(n0, n1, frac, seed):
    d = ds_from(np.arange(n0 + n1, dtype=float).reshape(-1, 1), [0] * n0 + [1] * n1)
    try:
        tr, te = split_train_test(d, frac, seed)
    except PreprocessError:
        return
    for c, n in ((0, n0), (1, n1)):
        assert abs((tr.label_binary == c).sum() - frac * n) <= 1
    assert len(tr) + len(te) == n0 + n1
    assert not set(tr.X[:, 0]) & set(te.X[:, 0])


def test_kfold_examples():
    f = kfold_partition(np.array([0, 1] * 50), 5, seed=0)
    assert f.sizes() == [20] * 5
    for i in range(5):
        _, val = f.split(i)
        assert np.bincount(np.array([0, 1] * 50)[val]).tolist() == [10, 10]
    y = np.array([0] * 60 + [1] * 43)
    assert sorted(kfold_partition(y, 5, seed=3).sizes(), reverse=True) == [21, 21, 21, 20, 20]
    with pytest.raises(PreprocessError):
        kfold_partition(np.array([0] * 10 + [1] * 3), 4)
    with pytest.raises(ValueError):
        kfold_partition(np.array([0, 1] * 5), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(2, 60), st.integers(2, 6), st.integers(0, 1000))
def test_kfold_partition_property(n0, n1, k, seed):
    y = np.array([0] * n0 + [1] * n1)
    if k > min(n0, n1):
        return
    f = kfold_partition(y, k, seed)
    sizes = f.sizes()
    assert max(sizes) - min(sizes) <= 1 and sum(sizes) == y.size
    for c in (0, 1):
        per = np.bincount(f.fold_of_row[y == c], minlength=k)
        assert per.max() - per.min() <= 1
    for i in range(k):
        tr, va = f.split(i)
        assert np.intersect1d(tr, va).size == 0
        assert np.union1d(tr, va).size == y.size


# ----------------------------------------------------- estimator wrapper


def test_flow_preprocessor_fit_transform():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 200)
    X = np.column_stack([y + rng.normal(0, 0.1, 200), rng.normal(size=200), np.ones(200), y * 5.0 + 3])
    pre = FlowPreprocessor(normalization="zscore", top_k=2)
    Xt = pre.fit_transform(X, y, feature_names=["a", "b", "c", "d"])
    assert Xt.shape == (200, 2)
    assert list(pre.get_feature_names_out()) == ["d", "a"]
    assert pre.get_params() == {"normalization": "zscore", "top_k": 2}
    back = FlowPreprocessor.from_json(pre.to_json())
    assert np.array_equal(back.transform(X), Xt)
    with pytest.raises(ValueError):
        pre.transform(np.full((1, 4), np.nan))
    with pytest.raises(ValueError):
        pre.transform(np.zeros((1, 3)))


def test_flow_preprocessor_unfitted():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        FlowPreprocessor().transform(np.zeros((1, 2)))
