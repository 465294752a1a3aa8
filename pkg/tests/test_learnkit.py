import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skypesiem.classifiers import train_tree
from skypesiem.errors import DatasetEmpty, RowParseError, SchemaMismatch
from skypesiem.flowkit import CSV_HEADER, FeatureVector
from skypesiem.learnkit import (NORMAL, SKYPE, ClassLabel, Discretizer, LabeledDataset, Standardizer,
                                discretize, load_dataset, stratified_split)

HEADER = ",".join(CSV_HEADER)


def row(label, *vals):
    vals = vals or (1, 100, 5, 90, 110, 20, 2, 15, 25)
    return ",".join(str(v) for v in vals) + f",{label}"


def test_empty_dataset_fails_at_train_time():
    ds = load_dataset(HEADER + "\n")
    assert len(ds) == 0
    with pytest.raises(DatasetEmpty):
        train_tree(ds)


def test_two_rows_one_per_class():
    ds = load_dataset("\n".join([HEADER, row("Skype"), row("Normal")]))
    assert len(ds) == 2 and ds.y.tolist() == [SKYPE, NORMAL]


@pytest.mark.parametrize("text", ["skype", "SKYPE", " Skype "])
def test_labels_case_insensitive(text):
    ds = load_dataset("\n".join([HEADER, row(text)]))
    assert ds.instances[0][1] is ClassLabel.SKYPE


def test_round_trip_through_csv(corpus):
    back = load_dataset(corpus.to_csv())
    assert np.array_equal(back.X, corpus.X) and np.array_equal(back.y, corpus.y)


def test_schema_mismatch():
    with pytest.raises(SchemaMismatch):
        load_dataset("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaMismatch):
        load_dataset("")


def test_row_errors_carry_line_numbers():
    with pytest.raises(RowParseError) as err:
        load_dataset("\n".join([HEADER, row("Skype"), "1,2,x,4,5,6,7,8,9,Skype"]))
    assert err.value.line == 3
    with pytest.raises(RowParseError):
        load_dataset("\n".join([HEADER, row("Maybe")]))
    with pytest.raises(RowParseError):
        load_dataset("\n".join([HEADER, "1,2,3,Skype"]))


def test_decimal_comma_is_not_a_number():
    with pytest.raises(RowParseError):
        load_dataset("\n".join([HEADER, '1,"100,5",5,90,110,20,2,15,25,Skype']))


def _ds(n_skype, n_normal):
    X = np.arange((n_skype + n_normal) * 9, dtype=float).reshape(-1, 9)
    return LabeledDataset(X, np.array([SKYPE] * n_skype + [NORMAL] * n_normal))


def test_exact_stratification():
    train, test = stratified_split(_ds(10, 10), 0.5, seed=1)
    assert train.class_counts().tolist() == [5, 5] and test.class_counts().tolist() == [5, 5]


def test_split_rounding():
    # 3 * 0.7 = 2.1 -> 2 and 7 * 0.7 = 4.9 -> 5
    train, _ = stratified_split(_ds(3, 7), 0.7, seed=0)
    assert train.class_counts().tolist() == [2, 5]


def test_split_deterministic():
    a, _ = stratified_split(_ds(30, 40), 0.6, seed=9)
    b, _ = stratified_split(_ds(30, 40), 0.6, seed=9)
    assert np.array_equal(a.X, b.X)


def test_split_errors():
    with pytest.raises(DatasetEmpty):
        stratified_split(_ds(0, 0), 0.5, 0)
    with pytest.raises(ValueError):
        stratified_split(_ds(2, 2), 1.0, 0)


@given(st.integers(0, 40), st.integers(0, 40), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_partitions(n_s, n_n, frac, seed):
    if n_s + n_n == 0:
        return
    ds = _ds(n_s, n_n)
    train, test = stratified_split(ds, frac, seed)
    a = {tuple(r) for r in train.X}
    b = {tuple(r) for r in test.X}
    assert not a & b and a | b == {tuple(r) for r in ds.X}
    for c, n_c in ((SKYPE, n_s), (NORMAL, n_n)):
        assert abs(train.class_counts()[c] - n_c * frac) <= 1


# -- Standardizer -------------------------------------------------------------

def test_zero_variance_feature_maps_to_zero():
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    s = Standardizer.fit(X)
    assert s.std[1] == 1.0 and np.all(s.transform(X)[:, 1] == 0)


@given(arrays(float, (8, 3), elements=st.floats(-1e6, 1e6)))
def test_standardize_inverse(X):
    s = Standardizer.fit(X)
    back = s.inverse_transform(s.transform(X))
    assert np.allclose(back, X, rtol=1e-9, atol=1e-9 * (1 + np.abs(X).max()))


def test_standardizer_dict_round_trip():
    s = Standardizer.fit(np.random.default_rng(0).normal(size=(10, 9)))
    t = Standardizer.from_dict(s.to_dict())
    assert np.array_equal(s.mean, t.mean) and np.array_equal(s.std, t.std)


# -- Discretizer ---------------------------------------------------------------

def _fit_1_to_100():
    col = np.arange(1, 101, dtype=float)
    X = np.column_stack([np.zeros(100), col])
    return Discretizer.fit(X, 10)


def test_deciles_of_1_to_100():
    d = _fit_1_to_100()
    # numpy's linear quantile at q = k/10 is 1 + 99 k / 10
    assert d.cuts[1] == pytest.approx([1 + 9.9 * k for k in range(1, 10)])
    assert d.transform(np.array([0.0, 50.0]))[1] == 4


def test_boundary_and_clamping():
    d = _fit_1_to_100()
    assert d.transform(np.array([0.0, 1.0]))[1] == 0
    assert d.transform(np.array([0.0, -7.0]))[1] == 0
    assert d.transform(np.array([0.0, 1e9]))[1] == 9
    edge = d.cuts[1][3]
    assert d.transform(np.array([0.0, edge]))[1] == 4


def test_discretize_feature_vector():
    X = np.random.default_rng(0).uniform(0, 100, size=(200, 9))
    X[:, 0] = np.round(X[:, 0] / 100)
    d = Discretizer.fit(X)
    v = FeatureVector.from_array(X[5])
    assert np.array_equal(discretize(d, v), d.transform(X[5]))
    assert d.cardinality(0) == 2


def test_discretizer_dict_round_trip():
    d = _fit_1_to_100()
    assert Discretizer.from_dict(d.to_dict()) == d


@given(st.lists(st.integers(0, 1000), min_size=20, max_size=300, unique=True))
def test_equal_frequency_bin_occupancy(values):
    col = np.array(values, dtype=float)
    d = Discretizer.fit(np.column_stack([np.zeros(len(col)), col]), 10)
    bins = d.transform(np.column_stack([np.zeros(len(col)), col]))[:, 1]
    counts = np.bincount(bins, minlength=d.cardinality(1))
    n = len(col)
    assert counts.sum() == n
    assert counts.min() >= n // 10 - 1 and counts.max() <= -(-n // 10) + 1


@given(arrays(float, (30, 9), elements=st.floats(-1e3, 1e3)), arrays(float, (5, 9), elements=st.floats(-1e4, 1e4)))
def test_every_value_maps_to_one_bin(X, Q):
    d = Discretizer.fit(X)
    B = d.transform(Q)
    for j in range(1, 9):
        assert B[:, j].min() >= 0 and B[:, j].max() < d.cardinality(j)
        cuts = np.array(d.cuts[j])
        assert np.all(np.diff(cuts) > 0)
