import itertools

import numpy as np
import pytest

from oracles import (exhaustive_best_parents, greedy_margin, greedy_parents, log_ch_score,
                     random_network_data)
from skypesiem.classifiers import BayesNetModel, k2_score, k2_search, train_bayesnet
from skypesiem.classifiers.bayesnet import CLASS_NODE, estimate_cpts, node_order
from skypesiem.errors import DatasetEmpty
from skypesiem.learnkit import LabeledDataset

AMBIGUOUS = 1e-6


def k2_oracle_trials(n_trials=50, seed=0):
    """(compared, mismatches) of greedy K2 vs exhaustive enumeration on random small networks."""
    rng = np.random.default_rng(seed)
    compared, mismatches = 0, []
    for trial in range(n_trials):
        rows, card = random_network_data(rng)
        data = np.array(rows, dtype=np.int64)
        order = list(range(len(card)))
        greedy = k2_search(data, card, order, max_parents=3)
        for node in order:
            preds = order[:node]
            best, top, runner_up = exhaustive_best_parents(rows, card, node, preds, 3)
            if top - runner_up < AMBIGUOUS or greedy_margin(rows, card, node, preds, 3) < AMBIGUOUS:
                continue
            compared += 1
            if set(greedy[node]) != best:
                mismatches.append((trial, node, greedy[node], sorted(best)))
    return compared, mismatches


def test_k2_score_matches_reference():
    rng = np.random.default_rng(1)
    for _ in range(30):
        rows, card = random_network_data(rng, 20, 80)
        data = np.array(rows)
        for node in range(len(card)):
            for k in range(node + 1):
                for pa in itertools.combinations(range(node), k):
                    ref = log_ch_score(data[:, node].tolist(), [data[:, p].tolist() for p in pa],
                                       card[node], [card[p] for p in pa])
                    assert k2_score(node, pa, data, card) == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_k2_score_finite_at_corpus_scale(corpus):
    model = train_bayesnet(corpus)
    data = np.column_stack([corpus.y, model.discretizer.transform(corpus.X)])
    for node in range(1, 10):
        assert np.isfinite(k2_score(node, (0,), data, model.card))


def test_independent_parent_does_not_help():
    rng = np.random.default_rng(5)
    wins = 0
    for _ in range(20):
        data = rng.integers(0, 3, size=(500, 2))
        wins += k2_score(1, (), data, [3, 3]) >= k2_score(1, (0,), data, [3, 3])
    assert wins >= 18


def test_copied_parent_helps():
    rng = np.random.default_rng(6)
    a = rng.integers(0, 3, size=200)
    data = np.column_stack([a, a])
    assert k2_score(1, (0,), data, [3, 3]) > k2_score(1, (), data, [3, 3])


@pytest.mark.xfail(strict=True, reason="greedy K2 can stop at a local optimum; see counterexample test below")
def test_greedy_matches_exhaustive_when_unambiguous():
    compared, mismatches = k2_oracle_trials()
    assert compared > 0
    assert mismatches == []


def test_greedy_local_optimum_counterexample():
    # trial 17 at seed 0: from {0} every single addition lowers the score, yet {0, 1, 2} is best
    rng = np.random.default_rng(0)
    for _ in range(18):
        rows, card = random_network_data(rng)
    data = np.array(rows, dtype=np.int64)
    assert k2_search(data, card, [0, 1, 2, 3], 3)[3] == (0,)
    here = k2_score(3, (0,), data, card)
    assert k2_score(3, (0, 1), data, card) < here and k2_score(3, (0, 2), data, card) < here
    assert k2_score(3, (0, 1, 2), data, card) > here + 20
    assert exhaustive_best_parents(rows, card, 3, [0, 1, 2], 3)[0] == {0, 1, 2}


def test_greedy_matches_plain_greedy_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        rows, card = random_network_data(rng, 100, 400)
        data = np.array(rows, dtype=np.int64)
        order = list(range(len(card)))
        greedy = k2_search(data, card, order, max_parents=3)
        for node in order:
            if greedy_margin(rows, card, node, order[:node], 3) < AMBIGUOUS:
                continue
            ref, _ = greedy_parents(rows, card, node, order[:node], 3)
            assert set(greedy[node]) == ref


def test_max_parents_one_is_naive_bayes():
    rng = np.random.default_rng(8)
    n = 600
    y = rng.integers(0, 2, size=n)
    X = np.zeros((n, 9))
    X[:, 0] = y ^ (rng.random(n) < 0.2)
    for j in range(1, 9):
        X[:, j] = rng.normal(loc=3.0 * (1 - y) * j, scale=1.0 + j)
    model = train_bayesnet(LabeledDataset(X, y), max_parents=1)
    assert model.order[0] == CLASS_NODE
    assert all(model.parents[j] == (CLASS_NODE,) for j in range(1, 10))
    assert model.parents[CLASS_NODE] == ()


def test_trained_structure_invariants(trained):
    model = trained[2]["bayesnet"]
    pos = {n: i for i, n in enumerate(model.order)}
    for node, pa in model.parents.items():
        assert len(pa) <= 3
        assert all(pos[p] < pos[node] for p in pa)  # acyclic by ordering
        assert np.allclose(model.cpts[node].table.sum(axis=1), 1.0, atol=1e-9)


def test_node_order_by_mutual_information():
    rng = np.random.default_rng(2)
    c = rng.integers(0, 2, size=400)
    weak = np.where(rng.random(400) < 0.6, c, rng.integers(0, 2, size=400))
    strong = np.where(rng.random(400) < 0.95, c, 1 - c)
    noise = rng.integers(0, 2, size=400)
    data = np.column_stack([c, noise, weak, strong])
    assert node_order(data) == [0, 3, 2, 1]


def test_uniform_labels_give_balanced_class_cpt():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(2000, 9))
    y = rng.integers(0, 2, size=2000)
    model = train_bayesnet(LabeledDataset(X, y))
    assert model.cpts[CLASS_NODE].table[0] == pytest.approx([0.5, 0.5], abs=0.03)


def test_joint_sums_to_one_on_tiny_models():
    rng = np.random.default_rng(9)
    for _ in range(20):
        card = [2, 2, 2, 2]
        data = rng.integers(0, 2, size=(50, 4))
        parents = k2_search(data, card, [0, 1, 2, 3], 3)
        model = BayesNetModel([0, 1, 2, 3], estimate_cpts(data, parents, card), card, None)
        configs = np.array(list(itertools.product(range(2), repeat=4)))
        assert np.exp(model.log_joint(configs)).sum() == pytest.approx(1.0, abs=1e-12)


def test_empty_dataset():
    with pytest.raises(DatasetEmpty):
        train_bayesnet(LabeledDataset(np.zeros((0, 9)), np.zeros(0, dtype=int)))


def test_serialization_round_trip(trained):
    _, test, models = trained
    m = models["bayesnet"]
    back = BayesNetModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict_proba(test.X), m.predict_proba(test.X))
