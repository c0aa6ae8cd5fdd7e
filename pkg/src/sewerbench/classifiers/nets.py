"""Network-based classifiers: multilayer perceptron (per-instance SGD with
momentum), RBF network (seeded k-means centers + logistic output layer),
and the RBF-kernel SVM trained by SMO.

All three scale their inputs with an embedded min-max scaler.
"""

from __future__ import annotations

import numpy as np

from sewerbench import _kernels
from sewerbench.classifiers.base import AlgoDef
from sewerbench.dataset import fit_scaler
from sewerbench.errors import ConfigError, FitError
from sewerbench.numerics import fit_logistic, smo_train_rbf
from sewerbench.rng import RngStream

_RBF_L2 = 1e-6
_RBF_LOGIT_ITERS = 300
_RBF_LOGIT_TOL = 1e-8
_SVM_SUPPORT_EPS = 1e-8
_SVM_LINK_SLOPE = 2.0


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------


def _mlp_fit(params, train, stream):
    hidden = int(params["hidden"])
    epochs = int(params["epochs"])
    lr = float(params["learning_rate"])
    momentum = float(params["momentum"])
    if hidden < 1 or epochs < 1:
        raise ConfigError("MLP needs hidden >= 1 and epochs >= 1")
    scaler = fit_scaler(train.x)
    xs = scaler.transform(train.x)
    w1, b1, w2, b2, status = _kernels.mlp_train(
        np.ascontiguousarray(xs),
        np.ascontiguousarray(train.y, np.int8),
        hidden, lr, momentum, epochs,
        np.uint64(stream.spawn(4).state_u64()),
    )
    if status != 0:
        raise FitError("MLP loss diverged after 3 learning-rate halvings")
    return {"w1": w1, "b1": b1, "w2": w2, "b2": b2}, scaler


def mlp_forward(payload, xs: np.ndarray) -> np.ndarray:
    """Softmax outputs for already-scaled inputs."""
    a1 = 1.0 / (1.0 + np.exp(-(xs @ payload["w1"].T + payload["b1"])))
    z = a1 @ payload["w2"].T + payload["b2"]
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_loss_grad(w1, b1, w2, b2, xs, y):
    """Summed cross-entropy and gradients at arbitrary weights.

    Same forward math as the SGD kernel; exists so the gradient can be
    checked against central finite differences.
    """
    n = xs.shape[0]
    a1 = 1.0 / (1.0 + np.exp(-(xs @ w1.T + b1)))
    z = a1 @ w2.T + b2
    zs = z - z.max(axis=1, keepdims=True)
    e = np.exp(zs)
    p = e / e.sum(axis=1, keepdims=True)
    onehot = np.zeros((n, 2))
    onehot[np.arange(n), y.astype(int)] = 1.0
    loss = -float(np.sum(np.log(np.maximum(p[np.arange(n), y.astype(int)], 1e-300))))
    g2 = p - onehot  # (n, 2)
    gw2 = g2.T @ a1
    gb2 = g2.sum(axis=0)
    d1 = (g2 @ w2) * a1 * (1.0 - a1)
    gw1 = d1.T @ xs
    gb1 = d1.sum(axis=0)
    return loss, (gw1, gb1, gw2, gb2)


def _mlp_predict(payload, scaler, x):
    return mlp_forward(payload, scaler.transform(np.atleast_2d(x)))


def _encode_mlp(p):
    return {k: p[k].tolist() for k in ("w1", "b1", "w2", "b2")}


def _decode_mlp(o):
    return {k: np.array(o[k], float) for k in ("w1", "b1", "w2", "b2")}


# ---------------------------------------------------------------------------
# RBF network
# ---------------------------------------------------------------------------


def kmeans(x: np.ndarray, k: int, stream: RngStream, iters: int = 50):
    """Seeded Lloyd iterations; an emptied cluster is re-seeded to the
    point farthest from its assigned center. Stops early when assignments
    stabilize."""
    n = x.shape[0]
    if k > n:
        raise ConfigError("more centers than points")
    centers = x[stream.permutation(n)[:k]].copy()
    assign = np.full(n, -1)
    for _ in range(iters):
        d2 = _sq_dists(x, centers)
        new_assign = np.argmin(d2, axis=1)  # ties -> lowest center index
        nearest = d2[np.arange(n), new_assign]
        used = set()
        for c in range(k):
            if np.any(new_assign == c):
                continue
            candidates = np.argsort(-nearest, kind="stable")
            for cand in candidates:
                if int(cand) not in used:
                    break
            used.add(int(cand))
            centers[c] = x[cand]
            new_assign[cand] = c
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            mask = assign == c
            if np.any(mask):
                centers[c] = x[mask].mean(axis=0)
    return centers, assign


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances via the expanded-norm matmul
    form (no (n, m, d) temporaries); clipped at 0 against rounding."""
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def rbf_activations(centers, widths, xs):
    return np.exp(-_sq_dists(xs, centers) / (2.0 * widths[None, :] ** 2))


def _rbf_fit(params, train, stream):
    k = int(params["centers"])
    if k < 1 or k > len(train):
        raise ConfigError("centers must be in [1, n]")
    scaler = fit_scaler(train.x)
    xs = scaler.transform(train.x)
    centers, _ = kmeans(xs, k, stream.spawn(5), iters=int(params["kmeans_iters"]))
    if k > 1:
        dc = np.sqrt(((centers[:, None, :] - centers[None, :, :]) ** 2).sum(-1))
        widths = dc.sum(axis=1) / (k - 1)
    else:
        widths = np.ones(1)
    widths = np.maximum(widths, 1e-12)
    acts = rbf_activations(centers, widths, xs)
    w = fit_logistic(acts, train.y, l2=_RBF_L2,
                     max_iter=_RBF_LOGIT_ITERS, tol=_RBF_LOGIT_TOL)
    return {"centers": centers, "widths": widths, "w": w}, scaler


def _rbf_predict(payload, scaler, x):
    xs = scaler.transform(np.atleast_2d(x))
    acts = rbf_activations(payload["centers"], payload["widths"], xs)
    z = payload["w"][0] + acts @ payload["w"][1:]
    with np.errstate(over="ignore"):
        p1 = 1.0 / (1.0 + np.exp(-z))
    return np.stack([1.0 - p1, p1], axis=1)


def _encode_rbf(p):
    return {k: p[k].tolist() for k in ("centers", "widths", "w")}


def _decode_rbf(o):
    return {k: np.array(o[k], float) for k in ("centers", "widths", "w")}


# ---------------------------------------------------------------------------
# SVM
# ---------------------------------------------------------------------------


def _svm_fit(params, train, stream):
    c = float(params["c"])
    gamma = float(params["gamma"])
    tol = float(params["tol"])
    max_passes = int(params["max_passes"])
    scaler = fit_scaler(train.x)
    if np.all(train.y == train.y[0]):
        return {"kind": "const", "label": int(train.y[0])}, scaler
    xs = scaler.transform(train.x)
    ypm = 2.0 * train.y.astype(float) - 1.0
    res = smo_train_rbf(xs, ypm, c=c, gamma=gamma, tol=tol, max_passes=max_passes)
    keep = res.alphas > _SVM_SUPPORT_EPS
    return {
        "kind": "svm",
        "sv_x": xs[keep],
        "sv_y": ypm[keep],
        "alpha": res.alphas[keep],
        "bias": res.bias,
        "gamma": gamma,
        "converged": res.converged,
    }, scaler


def svm_decision(payload, xs: np.ndarray) -> np.ndarray:
    sv = payload["sv_x"]
    coeff = payload["alpha"] * payload["sv_y"]
    out = np.empty(xs.shape[0])
    for lo in range(0, xs.shape[0], 4096):  # bound the kernel-block size
        chunk = xs[lo : lo + 4096]
        k = np.exp(-payload["gamma"] * _sq_dists(chunk, sv))
        out[lo : lo + 4096] = k @ coeff
    return out + payload["bias"]


def _svm_predict(payload, scaler, x):
    xs = scaler.transform(np.atleast_2d(x))
    if payload["kind"] == "const":
        out = np.zeros((xs.shape[0], 2))
        out[:, payload["label"]] = 1.0
        return out
    f = svm_decision(payload, xs)
    with np.errstate(over="ignore"):
        p1 = 1.0 / (1.0 + np.exp(-_SVM_LINK_SLOPE * f))
    return np.stack([1.0 - p1, p1], axis=1)


def _encode_svm(p):
    if p["kind"] == "const":
        return {"kind": "const", "label": p["label"]}
    return {
        "kind": "svm",
        "sv_x": p["sv_x"].tolist(),
        "sv_y": p["sv_y"].tolist(),
        "alpha": p["alpha"].tolist(),
        "bias": float(p["bias"]),
        "gamma": float(p["gamma"]),
        "converged": bool(p["converged"]),
    }


def _decode_svm(o):
    if o["kind"] == "const":
        return {"kind": "const", "label": int(o["label"])}
    return {
        "kind": "svm",
        "sv_x": np.array(o["sv_x"], float),
        "sv_y": np.array(o["sv_y"], float),
        "alpha": np.array(o["alpha"], float),
        "bias": float(o["bias"]),
        "gamma": float(o["gamma"]),
        "converged": bool(o["converged"]),
    }


ALGOS = {
    "MLP": AlgoDef(_mlp_fit, _mlp_predict, _encode_mlp, _decode_mlp,
                   defaults={"hidden": 100, "learning_rate": 0.3,
                             "momentum": 0.2, "epochs": 500}),
    "RBF": AlgoDef(_rbf_fit, _rbf_predict, _encode_rbf, _decode_rbf,
                   defaults={"centers": 10, "kmeans_iters": 50}),
    "SVM": AlgoDef(_svm_fit, _svm_predict, _encode_svm, _decode_svm,
                   defaults={"c": 1.0, "gamma": 1.0 / 7.0,
                             "tol": 1e-3, "max_passes": 200}),
}
