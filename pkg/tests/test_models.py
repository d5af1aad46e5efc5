import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.svm import SVC

from logsentinel import models as M
from logsentinel.errors import LengthMismatch, NonFiniteInput, SchemaMismatch, SingleClass
from logsentinel.models import _trees
from logsentinel.models.linear import loss_and_grad
from logsentinel.models.svm import kkt_residuals, rbf_kernel, smo

from oracles import central_difference

XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([0, 1, 1, 0])


def blobs(seed=0, n=80, d=3, shift=1.5):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(int)
    X = rng.normal(size=(n, d)) + shift * y[:, None]
    return X, y


def test_metrics_examples():
    m = M.compute_metrics([1, 1, 0, 0], [1, 0, 0, 0])
    assert (m.accuracy, m.precision, m.recall) == (0.75, 1.0, 0.5)
    assert m.f1 == pytest.approx(2 / 3, abs=1e-15)
    assert M.compute_metrics([1, 0, 1], [1, 0, 1]) == M.Metrics(1.0, 1.0, 1.0, 1.0)
    assert M.compute_metrics([1, 0, 1], [0, 0, 0]) == M.Metrics(1 / 3, 0.0, 0.0, 0.0)
    with pytest.raises(LengthMismatch):
        M.compute_metrics([1, 0], [1])
    with pytest.raises(LengthMismatch):
        M.compute_metrics([], [])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_metrics_f1_invariant(pairs):
    t, p = zip(*pairs)
    m = M.compute_metrics(t, p)
    denom = m.precision + m.recall
    assert m.f1 == (2 * m.precision * m.recall / denom if denom > 0 else 0.0)
    assert all(0.0 <= v <= 1.0 for v in m.as_dict().values())


def test_spec_validation():
    assert M.ModelSpec("knn").params["k"] == 5
    assert M.ModelSpec("random_forest").params["n_trees"] == 100
    for family, hp in [("knn", {"k": 0}), ("knn", {"depth": 1}), ("svm_rbf", {"gamma": "auto"}),
                       ("logistic", {"l2": -1}), ("random_forest", {"bootstrap": 1})]:
        with pytest.raises(ValueError):
            M.ModelSpec(family, hp)
    with pytest.raises(ValueError):
        M.ModelSpec("xgboost")


def test_knn_memorizes():
    X, y = blobs(1)
    model = M.fit(M.ModelSpec("knn", {"k": 1}), X, y)
    assert np.array_equal(M.predict(model, X), y)


def test_knn_matches_sklearn():
    X, y = blobs(2)
    Xq, _ = blobs(3)
    ours = M.fit(M.ModelSpec("knn"), X, y)
    mu, sd = X.mean(axis=0), X.std(axis=0)
    ref = KNeighborsClassifier(5).fit((X - mu) / sd, y)
    assert np.array_equal(M.predict(ours, Xq), ref.predict((Xq - mu) / sd))


def test_knn_vote_tie_is_benign():
    X = np.array([[0.0], [2.0]])
    model = M.fit(M.ModelSpec("knn", {"k": 2}), X, np.array([0, 1]))
    assert M.predict(model, np.array([[1.0], [5.0], [-3.0]])).tolist() == [0, 0, 0]


def test_decision_tree_xor():
    model = M.fit(M.ModelSpec("decision_tree"), XOR_X, XOR_Y)
    assert np.array_equal(M.predict(model, XOR_X), XOR_Y)


def test_decision_tree_tie_break_lower_feature_and_midpoint():
    # both features separate the classes perfectly; feature 0 must win
    X = np.array([[0.0, 10.0], [1.0, 11.0], [4.0, 20.0], [5.0, 21.0]])
    y = np.array([0, 0, 1, 1])
    model = M.fit(M.ModelSpec("decision_tree"), X, y)
    assert model.params["feature"][0] == 0
    assert model.params["threshold"][0] == 2.5


def test_logistic_separable():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    model = M.fit(M.ModelSpec("logistic"), X, y)
    assert np.array_equal(M.predict(model, X), y)
    assert model.params["converged"]


def test_logistic_matches_sklearn():
    X, y = blobs(4, n=120)
    model = M.fit(M.ModelSpec("logistic"), X, y)
    Z = (X - model.mean) / model.scale
    ref = LogisticRegression(C=1.0, tol=1e-12, max_iter=10000).fit(Z, y)
    theta = model.params["theta"]
    assert np.allclose(theta[:-1], ref.coef_[0], atol=1e-6)
    assert theta[-1] == pytest.approx(ref.intercept_[0], abs=1e-6)


def test_logistic_gradient_check():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n, d = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.5).astype(float)
        theta = rng.normal(size=d + 1)
        l2 = float(rng.uniform(0, 3))
        _, grad = loss_and_grad(theta, X, y, l2)
        numeric = central_difference(lambda t: loss_and_grad(t, X, y, l2)[0], theta)
        rel = np.linalg.norm(grad - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert rel <= 1e-4


def test_naive_bayes_two_gaussians():
    rng = np.random.default_rng(6)
    X = np.concatenate([rng.normal(0, 1, 1000), rng.normal(6, 1, 1000)])[:, None]
    y = np.array([0] * 1000 + [1] * 1000)
    Xt = np.concatenate([rng.normal(0, 1, 500), rng.normal(6, 1, 500)])[:, None]
    yt = np.array([0] * 500 + [1] * 500)
    model = M.fit(M.ModelSpec("naive_bayes"), X, y)
    pred = M.predict(model, Xt)
    assert np.mean(pred == yt) > 0.95
    assert np.array_equal(pred, GaussianNB().fit(X, y).predict(Xt))


def test_naive_bayes_matches_sklearn_multivariate():
    X, y = blobs(7, n=150, d=4, shift=0.8)
    Xq, _ = blobs(8, n=60, d=4)
    ours = M.predict(M.fit(M.ModelSpec("naive_bayes"), X, y), Xq)
    assert np.array_equal(ours, GaussianNB().fit(X, y).predict(Xq))


def test_gbdt_noisy_xor():
    rng = np.random.default_rng(0)
    X = np.repeat(XOR_X, 100, axis=0) + rng.normal(0, 0.1, size=(400, 2))
    y = np.repeat(XOR_Y, 100)
    model = M.fit(M.ModelSpec("gbdt_limited_depth"), X, y)
    assert np.mean(M.predict(model, X) == y) >= 0.95
    losses = model.params["losses"]
    assert np.all(np.diff(losses) <= 0)


def test_gbdt_loss_monotone_on_hard_data():
    for seed in range(5):
        X, y = blobs(seed, n=60, shift=0.3)
        losses = M.fit(M.ModelSpec("gbdt_limited_depth", {"learning_rate": 0.3}), X, y).params["losses"]
        assert losses.shape == (201,)
        assert np.all(np.diff(losses) <= 0)


def test_svm_kkt_and_constraints():
    for seed in range(5):
        X, y = blobs(seed, n=70, shift=1.0)
        model = M.fit(M.ModelSpec("svm_rbf"), X, y)
        alpha = model.params["alpha"]
        ys = np.where(y == 1, 1.0, -1.0)
        assert np.all(alpha >= 0) and np.all(alpha <= 1.0)
        assert abs(alpha @ ys) <= 1e-6
        assert model.params["gap"] < 1e-3
        Z = (X - model.mean) / model.scale
        K = rbf_kernel(Z, Z, model.params["gamma"])
        assert np.max(kkt_residuals(alpha, ys, K, model.params["rho"], 1.0)) <= 1e-3


def test_svm_matches_sklearn():
    X, y = blobs(5, n=90, shift=1.0)
    model = M.fit(M.ModelSpec("svm_rbf"), X, y)
    Z = (X - model.mean) / model.scale
    ref = SVC(C=1.0, gamma="scale", tol=1e-6).fit(Z, y)
    assert model.params["gamma"] == pytest.approx(1.0 / (Z.shape[1] * Z.var()), rel=1e-12)
    ours = M.decision_scores(model, X)
    assert np.max(np.abs(ours - ref.decision_function(Z))) < 5e-3


def test_smo_direct_small_problem():
    X = np.array([[0.0], [1.0], [3.0], [4.0]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    K = rbf_kernel(X, X, 0.5)
    alpha, rho, it, gap = smo(K, y, 10.0, 1e-6, 10000)
    f = K @ (alpha * y) - rho
    assert np.all(np.sign(f) == y)
    assert gap < 1e-6


def test_forest_deterministic_and_seeded():
    X, y = blobs(9, n=100, shift=0.7)
    a = M.fit(M.ModelSpec("random_forest", {"n_trees": 15}, seed=1), X, y)
    b = M.fit(M.ModelSpec("random_forest", {"n_trees": 15}, seed=1), X, y)
    c = M.fit(M.ModelSpec("random_forest", {"n_trees": 15}, seed=2), X, y)
    assert np.array_equal(a.params["feature"], b.params["feature"])
    assert np.array_equal(a.params["threshold"], b.params["threshold"])
    assert not (a.params["feature"].shape == c.params["feature"].shape
                and np.array_equal(a.params["threshold"], c.params["threshold"]))


def test_bootstrap_indices_in_range():
    idx = _trees.bootstrap_indices(50, np.uint64(7))
    assert idx.shape == (50,) and idx.min() >= 0 and idx.max() < 50
    assert np.array_equal(idx, _trees.bootstrap_indices(50, np.uint64(7)))


@pytest.mark.parametrize("family", M.FAMILIES)
def test_every_family_contract(family):
    X, y = blobs(10, n=60)
    spec = M.ModelSpec(family, {"n_trees": 10} if family == "random_forest" else {}, seed=3)
    m1 = M.fit(spec, X, y, ["a", "b", "c"])
    m2 = M.fit(spec, X, y, ["a", "b", "c"])
    p1 = M.predict(m1, X)
    assert np.array_equal(p1, M.predict(m2, X))
    assert set(np.unique(p1)) <= {0, 1}
    assert np.mean(p1 == y) > 0.7
    restored = M.from_json(M.to_json(m1))
    assert np.array_equal(M.decision_scores(restored, X), M.decision_scores(m1, X))
    with pytest.raises(SchemaMismatch):
        M.predict(m1, X[:, :2])
    with pytest.raises(NonFiniteInput):
        M.predict(m1, np.full((1, 3), np.nan))


@pytest.mark.parametrize("family", M.FAMILIES)
def test_fit_errors(family):
    X, y = blobs(0, n=20)
    with pytest.raises(SingleClass):
        M.fit(M.ModelSpec(family), X, np.zeros(20, dtype=int))
    bad = X.copy()
    bad[0, 0] = np.inf
    with pytest.raises(NonFiniteInput):
        M.fit(M.ModelSpec(family), bad, y)
    with pytest.raises(SchemaMismatch):
        M.fit(M.ModelSpec(family), X, y[:-1])


@pytest.mark.parametrize("family", ["knn", "naive_bayes", "logistic"])
def test_permutation_invariance(family):
    X, y = blobs(12, n=80)
    Xq, _ = blobs(13, n=40)
    perm = np.random.default_rng(0).permutation(80)
    a = M.predict(M.fit(M.ModelSpec(family), X, y), Xq)
    b = M.predict(M.fit(M.ModelSpec(family), X[perm], y[perm]), Xq)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("family", ["knn", "naive_bayes"])
def test_label_flip_symmetry(family):
    X, y = blobs(14, n=81)
    Xq, _ = blobs(15, n=40)
    a = M.predict(M.fit(M.ModelSpec(family), X, y), Xq)
    b = M.predict(M.fit(M.ModelSpec(family), X, 1 - y), Xq)
    assert np.array_equal(a, 1 - b)


def test_derive_seed_stable():
    assert M.derive_seed(0, 1, 2) == M.derive_seed(0, 1, 2)
    assert M.derive_seed(0, 1, 2) != M.derive_seed(0, 2, 1)
    assert 0 <= M.derive_seed(5) < 2 ** 63


def test_model_json_rejects_other_documents():
    with pytest.raises(SchemaMismatch):
        M.from_json('{"format": "something-else"}')
