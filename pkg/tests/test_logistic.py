import numpy as np
import pytest

from oracles import central_difference
from skypesiem.classifiers import LogisticModel, sigmoid, train_logistic
from skypesiem.classifiers.logistic import design_matrix, log_likelihood, log_likelihood_gradient
from skypesiem.errors import DatasetEmpty, SingleClass, UntrainedModel
from skypesiem.learnkit import NORMAL, SKYPE, LabeledDataset


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(2.0) == pytest.approx(0.88080, abs=1e-5)
    z = np.linspace(-40, 40, 81)
    assert np.allclose(sigmoid(-z), 1 - sigmoid(z))
    assert np.isfinite(sigmoid(np.array([-1e4, 1e4]))).all()


def gradient_check(rng, n_points=10):
    """Worst relative error of analytic vs central-difference gradient on one random dataset."""
    n, k = int(rng.integers(5, 60)), int(rng.integers(1, 9))
    A = design_matrix(rng.normal(size=(n, k)))
    t = rng.integers(0, 2, size=n).astype(float)
    worst = 0.0
    for _ in range(n_points):
        beta = rng.normal(scale=1.5, size=k + 1)
        num = np.array(central_difference(lambda b: log_likelihood(np.array(b), A, t), beta.tolist()))
        ana = log_likelihood_gradient(beta, A, t)
        worst = max(worst, float(np.linalg.norm(ana - num) / max(np.linalg.norm(num), 1e-12)))
    return worst


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    assert max(gradient_check(rng) for _ in range(20)) < 1e-4


def test_gradient_includes_penalty():
    A = design_matrix(np.array([[1.0], [-1.0]]))
    t = np.array([1.0, 0.0])
    beta = np.array([0.3, 2.0])
    lam = 0.5
    num = central_difference(lambda b: log_likelihood(np.array(b), A, t, lam), beta.tolist())
    assert np.allclose(log_likelihood_gradient(beta, A, t, lam), num, rtol=1e-6)


def test_separable_1d_dataset():
    X = np.zeros((20, 9))
    X[:, 1] = np.r_[np.linspace(60, 150, 10), np.linspace(300, 1400, 10)]
    y = np.array([SKYPE] * 10 + [NORMAL] * 10)
    model = train_logistic(LabeledDataset(X, y))
    assert (model.predict_labels(X) == y).all()
    assert np.isfinite(model.beta).all()


def test_labels_independent_of_features():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(4000, 9))
    y = (rng.random(4000) < 0.3).astype(int)  # 70% Skype
    model = train_logistic(LabeledDataset(X, y))
    assert np.abs(model.beta[1:]).max() < 0.1
    assert model.predict_proba(X)[:, 0].mean() == pytest.approx((y == SKYPE).mean(), abs=0.01)


def test_converges_on_corpus(trained):
    model = trained[2]["logistic"]
    assert model.converged or model.iterations == 2000
    assert np.isfinite(model.beta).all()


def test_degenerate_inputs():
    with pytest.raises(DatasetEmpty):
        train_logistic(LabeledDataset(np.zeros((0, 9)), np.zeros(0, dtype=int)))
    with pytest.raises(SingleClass):
        train_logistic(LabeledDataset(np.ones((3, 9)), np.zeros(3, dtype=int)))


def test_untrained_model():
    with pytest.raises(UntrainedModel):
        from skypesiem.classifiers import predict
        from skypesiem.flowkit import FeatureVector
        predict(LogisticModel(), FeatureVector.from_array([0] * 9))


def test_serialization_round_trip(trained):
    _, test, models = trained
    m = models["logistic"]
    back = LogisticModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict_proba(test.X), m.predict_proba(test.X))
