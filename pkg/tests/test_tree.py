import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_root, entropy_bits, split_scores
from skypesiem.classifiers import TreeModel, entropy, information_gain, predict, train_tree
from skypesiem.classifiers.tree import Leaf, Split
from skypesiem.errors import DatasetEmpty, EmptySet
from skypesiem.flowkit import FeatureVector
from skypesiem.learnkit import NORMAL, SKYPE, ClassLabel, LabeledDataset


def ds_from(rows, labels):
    X = np.zeros((len(rows), 9))
    X[:, :len(rows[0])] = rows
    return LabeledDataset(X, np.asarray(labels))


def test_entropy_examples():
    assert entropy([10, 0]) == 0.0
    assert entropy([5, 5]) == 1.0
    assert entropy([9, 5]) == pytest.approx(entropy_bits([9, 5]), abs=1e-12)
    assert entropy([9, 5]) == pytest.approx(0.94029, abs=1e-4)


def test_entropy_of_empty_set():
    with pytest.raises(EmptySet):
        entropy([0, 0])


def test_information_gain_examples():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([SKYPE, SKYPE, NORMAL, NORMAL])
    assert information_gain(X, y, 0, 2.5).gain == pytest.approx(1.0)
    assert information_gain(np.ones((4, 1)), y, 0, 1.0) == (0.0, 0.0)
    ds = ds_from([[1], [2], [3], [4]], y)
    assert information_gain(ds, 0, 2.5).gain == pytest.approx(entropy([2, 2]))


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=30),
       st.floats(0, 5))
def test_information_gain_matches_counting(pairs, thr):
    X = np.array([[float(v)] for v, _ in pairs])
    y = np.array([c for _, c in pairs])
    g = information_gain(X, y, 0, thr)
    ref = split_scores([[float(v)] for v, _ in pairs], y.tolist(), 0, thr)
    assert g.gain == pytest.approx(ref[0], abs=1e-12)
    assert g.gain_ratio == pytest.approx(ref[1], abs=1e-12)


def random_small_dataset(rng):
    n = int(rng.integers(4, 21))
    k = int(rng.integers(1, 5))
    # coarse integer values produce plenty of gain ties
    X = rng.integers(0, 6, size=(n, k)).astype(float)
    y = rng.integers(0, 2, size=n)
    if len(set(y.tolist())) < 2:
        y[0] = 1 - y[0]
    return X, y


def test_root_split_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        X, y = random_small_dataset(rng)
        model = train_tree(ds_from(X.tolist(), y), min_leaf=2)
        ref = brute_force_root(X.tolist(), y.tolist())
        if ref is None:
            assert isinstance(model.root, Leaf)
        else:
            assert isinstance(model.root, Split)
            assert (model.root.attribute, model.root.threshold) == (ref[0], pytest.approx(ref[1]))
            assert model.root.gain_ratio == pytest.approx(ref[2], rel=1e-9)


def test_separable_one_feature():
    X = [[v] for v in (1, 2, 3, 10, 11, 12)]
    y = [SKYPE] * 3 + [NORMAL] * 3
    model = train_tree(ds_from(X, y))
    assert model.depth == 1
    assert (model.predict_labels(ds_from(X, y).X) == np.array(y)).all()
    assert model.root.threshold == 6.5


def test_identical_vectors_give_one_leaf():
    model = train_tree(ds_from([[1, 1]] * 5, [0, 1, 1, 0, 1]))
    assert isinstance(model.root, Leaf) and model.root.counts == (2, 3)


def test_single_class_is_degenerate_leaf():
    model = train_tree(ds_from([[1], [2], [3]], [SKYPE] * 3))
    assert model.degenerate and isinstance(model.root, Leaf)


def test_empty_dataset():
    with pytest.raises(DatasetEmpty):
        train_tree(LabeledDataset(np.zeros((0, 9)), np.zeros(0, dtype=int)))


def test_laplace_leaf_prediction():
    # leaf with 3 Skype and 1 Normal -> (4/6, 2/6)
    model = TreeModel(Leaf((3, 1)))
    label, post = predict(model, FeatureVector.from_array([0] * 9))
    assert label is ClassLabel.SKYPE
    assert post.as_tuple() == pytest.approx((4 / 6, 2 / 6))


def test_min_leaf_stops_small_nodes():
    model = train_tree(ds_from([[1], [2], [3]], [0, 1, 0]), min_leaf=2)
    assert isinstance(model.root, Leaf)


def test_serialization_round_trip(trained):
    _, test, models = trained
    tree = models["tree"]
    back = TreeModel.from_dict(tree.to_dict())
    assert np.array_equal(back.predict_proba(test.X), tree.predict_proba(test.X))


@given(st.integers(0, 2**32 - 1))
def test_leaf_distributions_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    X, y = random_small_dataset(rng)
    model = train_tree(ds_from(X.tolist(), y))
    P = model.predict_proba(ds_from(X.tolist(), y).X)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert ((P > 0) & (P < 1)).all()


@given(st.integers(0, 2**32 - 1))
def test_instance_order_invariance(seed):
    rng = np.random.default_rng(seed)
    X, y = random_small_dataset(rng)
    perm = rng.permutation(len(y))
    a = train_tree(ds_from(X.tolist(), y))
    b = train_tree(ds_from(X[perm].tolist(), y[perm]))
    assert a.to_dict() == b.to_dict()


@given(st.integers(0, 2**32 - 1))
def test_monotone_transform_preserves_partition(seed):
    rng = np.random.default_rng(seed)
    X, y = random_small_dataset(rng)
    a = train_tree(ds_from(X.tolist(), y))
    b = train_tree(ds_from(np.exp(X / 2.0).tolist(), y))
    if isinstance(a.root, Leaf):
        assert isinstance(b.root, Leaf)
        return
    assert b.root.attribute == a.root.attribute
    left_a = X[:, a.root.attribute] <= a.root.threshold
    left_b = np.exp(X / 2.0)[:, b.root.attribute] <= b.root.threshold
    assert np.array_equal(left_a, left_b)
    assert math.isclose(a.root.gain_ratio, b.root.gain_ratio, rel_tol=1e-9)
