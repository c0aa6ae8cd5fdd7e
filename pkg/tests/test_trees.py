"""Stump, REP tree, random tree, NBTree, LMT."""

import numpy as np
import pytest

from sewerbench.classifiers import ClassifierSpec, FitContext, fit
from sewerbench.classifiers.trees import (
    _reduced_error_prune,
    stump_fit_weighted,
    tree_leaf_ids,
)
from sewerbench.dataset import Dataset, FEATURE_NAMES
from sewerbench.errors import ConfigError
from sewerbench.numerics import fit_logistic


def _ds(x, y, names=None):
    x = np.atleast_2d(np.asarray(x, float))
    if x.shape[0] < x.shape[1] and x.shape[0] == len(y):
        pass
    names = names or tuple(f"f{i}" for i in range(x.shape[1]))
    return Dataset(names, x, np.asarray(y))


def _stump_oracle(x, y, w):
    """Exhaustive enumeration of every (feature, midpoint) split."""
    n, d = x.shape
    wt0 = w[y == 0].sum()
    wt1 = w[y == 1].sum()
    best = (np.inf, None, None)
    for a in range(d):
        vals = np.unique(x[:, a])
        for lo, hi in zip(vals, vals[1:]):
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            left = x[:, a] <= thr
            l0 = w[left & (y == 0)].sum()
            l1 = w[left & (y == 1)].sum()
            err = min(l0, l1) + min(wt0 - l0, wt1 - l1)
            if err < best[0]:
                best = (err, a, thr)
    return best


def test_stump_1d_separable_midpoint():
    x = np.array([[0.0], [1.0], [4.0], [5.0]])
    y = np.array([0, 0, 1, 1])
    stump = stump_fit_weighted(x, y, np.ones(4))
    assert stump["feature"] == 0
    assert stump["threshold"] == pytest.approx(2.5)
    assert stump["left"][0] == 1.0 and stump["right"][1] == 1.0


def test_stump_xor_deterministic_tie():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    stump = stump_fit_weighted(x, y, np.ones(4))
    # all splits give weighted error 2.0 = half the weight; tie rule picks
    # the lowest feature and threshold
    assert stump["feature"] == 0
    assert stump["threshold"] == pytest.approx(0.5)


def test_stump_matches_exhaustive_oracle():
    rng = np.random.default_rng(88)
    for _ in range(100):
        n = int(rng.integers(5, 20))
        d = int(rng.integers(1, 5))
        x = np.round(rng.normal(size=(n, d)), 2)
        y = rng.integers(0, 2, size=n)
        w = rng.uniform(0.1, 2.0, size=n)
        if np.all(y == y[0]):
            y[0] = 1 - y[0]
        stump = stump_fit_weighted(x, y, w)
        err_oracle, feat, thr = _stump_oracle(x, y, w)
        if feat is None:
            assert stump["feature"] == -1
            continue
        left = x[:, stump["feature"]] <= stump["threshold"]
        l0 = w[left & (y == 0)].sum()
        l1 = w[left & (y == 1)].sum()
        err_got = min(l0, l1) + min(w[y == 0].sum() - l0, w[y == 1].sum() - l1)
        assert err_got == pytest.approx(err_oracle, abs=1e-12)
        assert (stump["feature"], stump["threshold"]) == (feat, pytest.approx(thr))


def test_stump_rejects_bad_weights():
    x = np.array([[0.0], [1.0]])
    with pytest.raises(ConfigError):
        stump_fit_weighted(x, np.array([0, 1]), np.zeros(2))
    with pytest.raises(ConfigError):
        stump_fit_weighted(x, np.array([0, 1]), np.array([1.0, -1.0]))


def test_rep_pure_node_single_leaf():
    x = np.linspace(0, 1, 12).reshape(-1, 1)
    model = fit(ClassifierSpec("REP_TREE"), _ds(x, np.zeros(12, int)))
    assert model.payload["feat"].tolist() == [-1]
    assert model.predict(np.array([0.5])) == 0


def test_reduced_error_prune_hand_trace():
    # hand-built tree: root splits at 6.5; left subtree isolates the noisy
    # x=1 point (labeled 1 inside the class-0 region)
    tree = {
        "feat": np.array([0, 0, -1, -1, -1]),
        "thr": np.array([6.5, 1.5, 0.0, 0.0, 0.0]),
        "left": np.array([1, 3, -1, -1, -1]),
        "right": np.array([2, 4, -1, -1, -1]),
        "c0": np.array([5, 5, 0, 0, 5]),
        "c1": np.array([7, 1, 6, 1, 0]),
    }
    prune_x = np.array([[1.2], [2.0], [3.0]])
    prune_y = np.array([0, 0, 0])
    # subtree at node 1 mislabels x=1.2 (goes to the label-1 leaf); the
    # collapsed leaf (majority 0) makes zero prune errors -> collapse
    pruned = _reduced_error_prune(tree, prune_x, prune_y)
    assert pruned["feat"][1] == -1  # noisy branch collapsed
    assert pruned["feat"][0] == 0  # root split kept


def test_rep_prune_never_hurts_prune_slice():
    rng = np.random.default_rng(5)
    x = rng.uniform(size=(200, 3))
    y = ((x[:, 0] > 0.5) ^ (rng.uniform(size=200) < 0.15)).astype(int)
    model = fit(ClassifierSpec("REP_TREE", seed_path=(3,)), _ds(x, y),
                FitContext(11))
    assert not model.payload["prune_skipped"]
    # pruned tree exists and routes everything to populated leaves
    dist = model.predict_dist_batch(x)
    assert np.all(np.isfinite(dist))
    acc = np.mean(model.predict_batch(x) == y)
    assert acc > 0.8


def test_rep_prune_skips_on_tiny_data():
    x = np.array([[0.0], [1.0], [2.0]])
    model = fit(ClassifierSpec("REP_TREE"), _ds(x, np.array([0, 1, 0])))
    assert model.payload["prune_skipped"]


def test_random_tree_pure_single_leaf_and_one_feature():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    model = fit(ClassifierSpec("RANDOM_TREE"), _ds(x, np.array([0, 0, 0, 0])))
    assert model.payload["feat"].tolist() == [-1]
    # single feature: subsampling cannot vary, tree is deterministic entropy
    y = np.array([0, 0, 1, 1])
    m1 = fit(ClassifierSpec("RANDOM_TREE", seed_path=(1,)), _ds(x, y), FitContext(7))
    m2 = fit(ClassifierSpec("RANDOM_TREE", seed_path=(2,)), _ds(x, y), FitContext(7))
    assert m1.payload["thr"].tolist() == m2.payload["thr"].tolist()
    assert np.all(m1.predict_batch(x) == y)


def test_random_tree_seeds_differ():
    rng = np.random.default_rng(10)
    x = rng.uniform(size=(300, 7))
    y = ((x[:, 0] + x[:, 3] > 1.0) ^ (rng.uniform(size=300) < 0.1)).astype(int)
    ds = Dataset(FEATURE_NAMES, x, y)
    m1 = fit(ClassifierSpec("RANDOM_TREE", seed_path=(1,)), ds, FitContext(42))
    m2 = fit(ClassifierSpec("RANDOM_TREE", seed_path=(2,)), ds, FitContext(42))
    seq1 = list(zip(m1.payload["feat"].tolist(), m1.payload["thr"].tolist()))
    seq2 = list(zip(m2.payload["feat"].tolist(), m2.payload["thr"].tolist()))
    assert seq1 != seq2


def test_nbtree_pure_data_single_leaf():
    x = np.linspace(0, 1, 20).reshape(-1, 1)
    model = fit(ClassifierSpec("NB_TREE"), _ds(x, np.zeros(20, int)))
    assert model.payload["feat"].tolist() == [-1]
    assert model.predict(np.array([0.3])) == 0


def test_nbtree_gaussian_separable_stays_single_nb_leaf():
    rng = np.random.default_rng(2)
    x0 = rng.normal(-2.0, 0.5, size=(40, 2))
    x1 = rng.normal(2.0, 0.5, size=(40, 2))
    x = np.vstack([x0, x1])
    y = np.array([0] * 40 + [1] * 40)
    model = fit(ClassifierSpec("NB_TREE", seed_path=(1,)), _ds(x, y), FitContext(3))
    # NB alone is already near-perfect here; no split can beat it by 5%
    assert model.payload["feat"].tolist() == [-1]
    assert np.mean(model.predict_batch(x) == y) == 1.0


def test_nbtree_prediction_is_leaf_nb_posterior():
    rng = np.random.default_rng(9)
    x = rng.uniform(size=(120, 3))
    y = ((x[:, 0] > 0.5) & (x[:, 1] > 0.4)).astype(int)
    model = fit(ClassifierSpec("NB_TREE", seed_path=(4,)), _ds(x, y), FitContext(5))
    from sewerbench.classifiers.bayes import nb_posterior

    leaves = tree_leaf_ids(model.payload, x)
    dist = model.predict_dist_batch(x)
    for i in (0, 17, 63):
        leaf = int(leaves[i])
        direct = nb_posterior(model.payload["leaf_models"][leaf], x[i : i + 1])[0]
        assert np.allclose(dist[i], direct, atol=1e-12)


def test_lmt_small_train_equals_fit_logistic():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(12, 2))  # below min_split=15: root is the only leaf
    y = (x[:, 0] + 0.2 * rng.normal(size=12) > 0).astype(int)
    if np.all(y == y[0]):
        y[0] = 1 - y[0]
    model = fit(ClassifierSpec("LMT"), _ds(x, y))
    assert model.payload["feat"].tolist() == [-1]
    leaf = model.payload["leaf_models"][0]
    assert leaf["kind"] == "logistic"
    direct = fit_logistic(x, y, l2=1e-3, max_iter=200, tol=1e-6)
    assert np.array_equal(leaf["w"], direct)


def test_lmt_pure_leaf_constant():
    x = np.vstack([np.zeros((20, 1)), np.ones((20, 1))])
    y = np.array([0] * 20 + [1] * 20)
    model = fit(ClassifierSpec("LMT"), _ds(x, y))
    kinds = {m["kind"] for m in model.payload["leaf_models"].values()}
    assert kinds == {"const"}
    assert model.predict(np.array([0.0])) == 0
    assert model.predict(np.array([1.0])) == 1
