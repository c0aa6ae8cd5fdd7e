"""MLP, RBF network, SVM: gradient checks, cross-checks, and behavior."""

import numpy as np
import pytest

from sewerbench.classifiers import ClassifierSpec, FitContext, dump_model, fit
from sewerbench.classifiers.nets import kmeans, mlp_loss_grad, rbf_activations
from sewerbench.dataset import Dataset
from sewerbench.numerics import fit_logistic
from sewerbench.rng import derive_stream


def _ds(x, y):
    x = np.atleast_2d(np.asarray(x, float))
    names = tuple(f"f{i}" for i in range(x.shape[1]))
    return Dataset(names, x, np.asarray(y))


def _toy_separable(n=30, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal([-1.5, -1.5], 0.4, size=(n // 2, 2))
    x1 = rng.normal([1.5, 1.5], 0.4, size=(n // 2, 2))
    x = np.vstack([x0, x1])
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    return _ds(x, y)


# --- MLP ---------------------------------------------------------------------


def test_mlp_gradient_vs_central_differences():
    rng = np.random.default_rng(77)
    for _ in range(20):
        n, d, h = 6, 3, 4
        xs = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n)
        w1 = rng.normal(scale=0.5, size=(h, d))
        b1 = rng.normal(scale=0.5, size=h)
        w2 = rng.normal(scale=0.5, size=(2, h))
        b2 = rng.normal(scale=0.5, size=2)
        _, (gw1, gb1, gw2, gb2) = mlp_loss_grad(w1, b1, w2, b2, xs, y)
        eps = 1e-6

        def num_grad(arr, analytic):
            num = np.zeros_like(arr)
            flat = arr.ravel()
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + eps
                lp, _ = mlp_loss_grad(w1, b1, w2, b2, xs, y)
                flat[i] = old - eps
                lm, _ = mlp_loss_grad(w1, b1, w2, b2, xs, y)
                flat[i] = old
                num.ravel()[i] = (lp - lm) / (2 * eps)
            rel = np.abs(analytic - num) / np.maximum(1.0, np.abs(num))
            assert np.max(rel) <= 1e-4

        num_grad(w1, gw1)
        num_grad(b1, gb1)
        num_grad(w2, gw2)
        num_grad(b2, gb2)


def test_mlp_separable_toy_reaches_perfect_training_accuracy():
    ds = _toy_separable()
    model = fit(ClassifierSpec("MLP", {"hidden": 8, "epochs": 200}, seed_path=(1,)),
                ds, FitContext(42))
    assert np.mean(model.predict_batch(ds.x) == ds.y) == 1.0


def test_mlp_same_stream_identical_weights():
    ds = _toy_separable(20, seed=3)
    spec = ClassifierSpec("MLP", {"hidden": 5, "epochs": 20}, seed_path=(9,))
    m1 = fit(spec, ds, FitContext(7, (1, 2)))
    m2 = fit(spec, ds, FitContext(7, (1, 2)))
    assert dump_model(m1) == dump_model(m2)
    m3 = fit(spec, ds, FitContext(7, (1, 3)))
    assert dump_model(m1) != dump_model(m3)


# --- RBF ---------------------------------------------------------------------


def test_kmeans_two_blobs():
    rng = np.random.default_rng(11)
    blob_a = rng.normal([0.2, 0.2], 0.02, size=(40, 2))
    blob_b = rng.normal([0.8, 0.8], 0.02, size=(40, 2))
    x = np.vstack([blob_a, blob_b])
    centers, assign = kmeans(x, 2, derive_stream(5, (1,)))
    means = np.array([blob_a.mean(axis=0), blob_b.mean(axis=0)])
    for m in means:
        assert np.min(np.linalg.norm(centers - m, axis=1)) < 0.08
    assert len(np.unique(assign)) == 2


def test_rbf_activation_is_one_at_center():
    centers = np.array([[0.3, 0.7]])
    widths = np.array([0.5])
    acts = rbf_activations(centers, widths, centers.copy())
    assert acts[0, 0] == pytest.approx(1.0)


def test_rbf_output_layer_equals_fit_logistic_on_activations():
    ds = _toy_separable(40, seed=5)
    model = fit(ClassifierSpec("RBF", {"centers": 4}, seed_path=(2,)), ds, FitContext(19))
    xs = model.scaler.transform(ds.x)
    acts = rbf_activations(model.payload["centers"], model.payload["widths"], xs)
    direct = fit_logistic(acts, ds.y, l2=1e-6, max_iter=300, tol=1e-8)
    assert np.array_equal(model.payload["w"], direct)


def test_rbf_learns_blobs():
    ds = _toy_separable(60, seed=6)
    model = fit(ClassifierSpec("RBF", {"centers": 2}, seed_path=(3,)), ds, FitContext(4))
    assert np.mean(model.predict_batch(ds.x) == ds.y) == 1.0


# --- SVM ---------------------------------------------------------------------


def test_svm_two_point_boundary_midway():
    x = np.array([[0.0], [2.0]])
    y = np.array([0, 1])
    model = fit(ClassifierSpec("SVM"), _ds(x, y))
    assert model.predict(np.array([0.9])) == 0
    assert model.predict(np.array([1.1])) == 1
    mid = model.predict_dist(np.array([1.0]))
    assert mid.p_safe == pytest.approx(0.5, abs=1e-6)


def test_svm_xor_training_accuracy():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(ClassifierSpec("SVM", {"c": 10.0, "gamma": 2.0}), _ds(x, y))
    assert np.all(model.predict_batch(x) == y)


def test_svm_single_class_constant():
    x = np.random.default_rng(0).normal(size=(10, 2))
    model = fit(ClassifierSpec("SVM"), _ds(x, np.ones(10, int)))
    assert model.payload["kind"] == "const"
    assert np.all(model.predict_batch(x) == 1)


def test_svm_payload_keeps_support_vectors_only():
    ds = _toy_separable(40, seed=8)
    model = fit(ClassifierSpec("SVM"), ds)
    assert np.all(model.payload["alpha"] > 1e-8)
    assert model.payload["sv_x"].shape[0] == model.payload["alpha"].shape[0]
    assert model.payload["sv_x"].shape[0] < len(ds)
