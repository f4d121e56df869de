import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _cart_oracle import grow, predict_one
from trajclass.exceptions import ConvergenceError, ParameterError, ShapeError, TrainingError
from trajclass.learners import (
    SVC, DecisionTreeClassifier, DTParams, RandomForestClassifier, RFParams, SVMParams, dt_train, entropy, gini,
    kernel_matrix, make_classifier, model_from_json, model_to_json, predict, rf_train, svm_train,
)


def separable(seed, n=60, d=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    margin = X @ w
    keep = np.abs(margin) > 0.3
    return X[keep], np.where(margin[keep] > 0, "pos", "neg")


def blobs(seed, n=40, k=2, sep=10.0):
    rng = np.random.default_rng(seed)
    centers = np.arange(k)[:, None] * sep * np.ones((1, 2))
    y = np.repeat(np.arange(k), n)
    return centers[y] + rng.normal(size=(len(y), 2)), y


# -- params ------------------------------------------------------------------

def test_param_ranges():
    DTParams(5, 1, 2, "gini")
    RFParams(n_estimators=100, max_depth=50, min_samples_leaf=10, min_samples_split=10, criterion="entropy")
    SVMParams(0.1, "sigmoid")
    for bad in (dict(max_depth=4), dict(min_samples_leaf=11), dict(min_samples_split=1), dict(criterion="x")):
        with pytest.raises(ParameterError):
            DTParams(**bad)
    with pytest.raises(ParameterError):
        RFParams(n_estimators=101)
    with pytest.raises(ParameterError):
        SVMParams(C=100.5)
    with pytest.raises(ParameterError):
        SVMParams(kernel="laplace")


# -- impurity ----------------------------------------------------------------

def test_impurity_endpoints():
    assert gini([4, 0]) == 0 and gini([5, 5]) == 0.5
    assert entropy([5, 5]) == 1.0 and entropy([0, 7]) == 0.0


# -- decision tree -----------------------------------------------------------

def test_single_threshold_split():
    x = np.r_[np.linspace(-5, -0.5, 10), np.linspace(0.5, 5, 10)][:, None]
    y = np.array(["A"] * 10 + ["B"] * 10)
    tree = dt_train(x, y, DTParams(max_depth=5))
    assert tree.tree_.n_nodes[0] == 3
    assert tree.tree_.threshold[0, 0] == 0.0
    assert np.all(tree.predict(x) == y)


def _oracle_structure(node, arrays, i=0):
    if "feature" not in node:
        return arrays.left[0, i] == -1 and int(np.argmax(arrays.value[0, i])) == int(np.argmax(node["counts"]))
    return (arrays.feature[0, i] == node["feature"] and arrays.threshold[0, i] == node["threshold"]
            and _oracle_structure(node["left"], arrays, arrays.left[0, i])
            and _oracle_structure(node["right"], arrays, arrays.right[0, i]))


@pytest.mark.parametrize("criterion", ["gini", "entropy"])
def test_tree_matches_plain_python_oracle(criterion):
    rng = np.random.default_rng(0 if criterion == "gini" else 1)
    for case in range(120):
        n, d, k = int(rng.integers(5, 40)), int(rng.integers(1, 5)), int(rng.integers(2, 4))
        # coarse integer features produce many exactly tied splits
        X = rng.integers(0, 4, size=(n, d)).astype(float)
        y = rng.integers(0, k, size=n)
        depth, leaf, split = int(rng.integers(1, 8)), int(rng.integers(1, 4)), int(rng.integers(2, 6))
        ours = DecisionTreeClassifier(criterion=criterion, max_depth=depth, min_samples_leaf=leaf,
                                      min_samples_split=split, random_state=0).fit(X, y)
        oracle = grow(X, np.searchsorted(np.unique(y), y), len(np.unique(y)), criterion, depth, split, leaf)
        assert _oracle_structure(oracle, ours.tree_), case
        expected = [np.unique(y)[predict_one(oracle, row)] for row in X]
        assert np.array_equal(ours.predict(X), expected)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_tree_fits_consistent_data_perfectly(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 60)), int(rng.integers(1, 4))
    X = rng.normal(size=(n, d)).round(2)
    _, first = np.unique(X, axis=0, return_index=True)
    X = X[np.sort(first)]
    y = rng.integers(0, 3, size=len(X))
    # greedy growth can need more than ceil(log2 n) + d levels on random labels, so depth is unbounded here
    tree = DecisionTreeClassifier(max_depth=None).fit(X, y)
    assert np.all(tree.predict(X) == y)


def test_tree_determinism_and_majority_tie():
    X, y = separable(3)
    a = DecisionTreeClassifier(max_depth=6, random_state=1).fit(X, y)
    b = DecisionTreeClassifier(max_depth=6, random_state=99).fit(X, y)
    assert model_to_json(a) == model_to_json(b).replace('"random_state": 99', '"random_state": 1')
    # duplicate rows cannot be split; the 1:1 leaf predicts the first class
    stump = DecisionTreeClassifier(max_depth=5).fit([[0.0], [0.0]], ["b", "a"])
    assert stump.predict([[0.5]])[0] == "a"


def test_predict_contract():
    X, y = separable(4)
    tree = DecisionTreeClassifier(max_depth=10).fit(X, y)
    assert len(tree.predict(np.empty((0, X.shape[1])))) == 0
    assert set(tree.predict(np.random.default_rng(0).normal(size=(200, 3)) * 10)) <= {"neg", "pos"}
    with pytest.raises(ShapeError):
        tree.predict(X[:, :2])
    with pytest.raises(TrainingError):
        DecisionTreeClassifier().fit(np.empty((0, 2)), [])
    assert np.array_equal(predict(tree, X), tree.predict(X))


# -- random forest -----------------------------------------------------------

def test_single_unbootstrapped_tree_equals_decision_tree():
    X, y = separable(5, d=4)
    rf = RandomForestClassifier(n_estimators=1, bootstrap=False, max_features=None, max_depth=8,
                                random_state=0).fit(X, y)
    dt = DecisionTreeClassifier(max_depth=8, random_state=0).fit(X, y)
    Z = np.random.default_rng(1).normal(size=(300, 4))
    assert np.array_equal(rf.predict(Z), dt.predict(Z))


def test_unanimous_forest_vote_and_tree_order():
    X, y = blobs(0)
    rf = RandomForestClassifier(n_estimators=15, max_depth=10, random_state=3).fit(X, y)
    votes = rf.tree_votes(X)
    unanimous = np.all(votes == votes[:, :1], axis=1)
    assert np.array_equal(rf.predict(X)[unanimous], rf.classes_[votes[unanimous, 0]])
    # reversing the trees leaves the majority vote unchanged
    before = rf.predict(X)
    t = rf.trees_
    rf.trees_ = type(t)(*(getattr(t, f)[::-1].copy() for f in ("feature", "threshold", "left", "right",
                                                                 "value", "n_nodes")))
    assert np.array_equal(rf.tree_votes(X), votes[:, ::-1])
    assert np.array_equal(rf.predict(X), before)


def test_forest_on_separated_blobs():
    X, y = blobs(1)
    Xt, yt = blobs(2)
    rf = rf_train(X, y, RFParams(n_estimators=25), seed=0)
    assert np.mean(rf.predict(Xt) == yt) == 1.0


def test_forest_feature_subsampling_count():
    rf = RandomForestClassifier()
    assert rf._n_candidates(30) == 6 and rf._n_candidates(4) == 2 and rf._n_candidates(1) == 1


def test_forest_seeded_reproducibility():
    X, y = blobs(4, k=3, sep=2.0)
    a = RandomForestClassifier(n_estimators=10, random_state=7).fit(X, y)
    b = RandomForestClassifier(n_estimators=10, random_state=7).fit(X, y)
    assert model_to_json(a) == model_to_json(b)


# -- SVM ---------------------------------------------------------------------

def _check_dual(model):
    for m in model.machines_:
        assert np.all(m.alpha >= 0) and np.all(m.alpha <= model.C + 1e-12)
        assert abs(np.dot(m.alpha, m.y)) <= 1e-6


def test_linear_svm_separable_and_dual_constraints():
    X, y = separable(6)
    svm = svm_train(X, y, SVMParams(C=100, kernel="linear"))
    assert np.all(svm.predict(X) == y)
    _check_dual(svm)


def test_rbf_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    svm = SVC(C=100, kernel="rbf", gamma=1.0).fit(X, y)
    assert np.all(svm.predict(X) == y)
    _check_dual(svm)


def test_one_vs_one_machine_count():
    X, y = blobs(3, k=3, sep=5.0)
    svm = SVC(C=1.0, kernel="rbf").fit(X, y)
    assert len(svm.machines_) == 3
    _check_dual(svm)
    assert np.mean(svm.predict(X) == y) > 0.95


@pytest.mark.parametrize("kernel", ["linear", "poly", "rbf", "sigmoid"])
def test_dual_objective_non_decreasing(kernel):
    X, y = blobs(5, n=25, sep=1.5)
    svm = SVC(C=5.0, kernel=kernel, record_objective=True).fit(X, y)
    trace = svm.machines_[0].objective_trace
    assert len(trace) > 1
    assert np.all(np.diff(trace) >= -1e-9 * np.maximum(1, np.abs(trace[1:])))
    _check_dual(svm)


def test_svm_errors():
    with pytest.raises(TrainingError):
        SVC().fit([[0.0], [1.0]], [1, 1])
    X, y = blobs(6, n=30, sep=0.5)
    with pytest.raises(ConvergenceError) as info:
        SVC(C=100, kernel="linear", tol=1e-12, max_iter=3).fit(X, y)
    assert info.value.iterations == 3


def test_rbf_kernel_psd():
    rng = np.random.default_rng(8)
    for _ in range(20):
        A = rng.normal(size=(10, 4))
        K = kernel_matrix(A, A, "rbf", gamma=float(rng.uniform(0.1, 3)))
        assert np.allclose(K, K.T) and np.linalg.eigvalsh(K).min() >= -1e-8


# -- shared API --------------------------------------------------------------

@pytest.mark.parametrize("kind,params", [
    ("DT", dict(max_depth=10, min_samples_leaf=1, min_samples_split=2, criterion="entropy")),
    ("RF", dict(n_estimators=10, max_depth=10, min_samples_leaf=1, min_samples_split=2, criterion="gini")),
    ("SVM", dict(C=10.0, kernel="poly")),
])
def test_json_round_trip_and_params(kind, params):
    X, y = blobs(9, k=3, sep=4.0)
    model = make_classifier(kind, params, seed=2).fit(X, y)
    clone = model_from_json(model_to_json(model))
    assert np.array_equal(clone.predict(X), model.predict(X))
    assert clone.get_params() == model.get_params()
