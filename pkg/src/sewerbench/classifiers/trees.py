"""Tree-based classifiers: decision stump, REP tree (reduced-error
pruning), unpruned random tree, naive-Bayes tree, and the simplified
logistic model tree.

All trees are binary entropy trees over numeric features with midpoint
thresholds, grown by the compiled builder in _kernels. Split ties break to
the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import math

import numpy as np

from sewerbench import _kernels
from sewerbench.classifiers.base import AlgoDef, counts_to_dist, majority_label
from sewerbench.classifiers.bayes import decode_nb, encode_nb, nb_posterior, nb_train
from sewerbench.dataset import make_folds
from sewerbench.errors import ConfigError
from sewerbench.numerics import fit_logistic

_LMT_L2 = 1e-3
_LMT_MAX_ITER = 200
_LMT_TOL = 1e-6
# one-sided z for the C4.5-style pessimistic error bound at confidence 0.25
_Z_CF25 = 0.6744897501960817


# ---------------------------------------------------------------------------
# shared tree plumbing
# ---------------------------------------------------------------------------


def _grow(x, y, min_leaf, min_node_to_split, min_gain, feat_sub=0, seed_state=0):
    feat, thr, left, right, c0, c1, state = _kernels.build_tree(
        np.ascontiguousarray(x, float),
        np.ascontiguousarray(y, np.int8),
        int(min_leaf),
        int(min_node_to_split),
        float(min_gain),
        int(feat_sub),
        np.uint64(seed_state),
    )
    return {"feat": feat, "thr": thr, "left": left, "right": right, "c0": c0, "c1": c1}, int(state)


def tree_leaf_ids(tree, x) -> np.ndarray:
    return _kernels.tree_apply(
        tree["feat"], tree["thr"], tree["left"], tree["right"],
        np.ascontiguousarray(x, float),
    )


def tree_dist(tree, x) -> np.ndarray:
    leaves = tree_leaf_ids(tree, x)
    c0 = tree["c0"][leaves].astype(float)
    c1 = tree["c1"][leaves].astype(float)
    tot = np.maximum(c0 + c1, 1.0)
    return np.stack([c0 / tot, c1 / tot], axis=1)


def _root_entropy(y) -> float:
    n = y.shape[0]
    c1 = int(np.sum(y == 1))
    c0 = n - c1
    if c0 == 0 or c1 == 0:
        return 0.0
    p0, p1 = c0 / n, c1 / n
    return -(p0 * math.log(p0) + p1 * math.log(p1))


def encode_tree(tree):
    return {k: tree[k].tolist() for k in ("feat", "thr", "left", "right", "c0", "c1")}


def decode_tree(obj):
    return {
        "feat": np.array(obj["feat"], np.int64),
        "thr": np.array(obj["thr"], float),
        "left": np.array(obj["left"], np.int64),
        "right": np.array(obj["right"], np.int64),
        "c0": np.array(obj["c0"], np.int64),
        "c1": np.array(obj["c1"], np.int64),
    }


# ---------------------------------------------------------------------------
# decision stump
# ---------------------------------------------------------------------------


def stump_fit_weighted(x: np.ndarray, y: np.ndarray, weights: np.ndarray) -> dict:
    """Single split minimizing weighted misclassification.

    Considers every midpoint between consecutive distinct values of every
    feature; ties go to the lowest feature index, then lowest threshold.
    Returns feature -1 (weighted-majority leaf) when no feature has two
    distinct values.
    """
    x = np.atleast_2d(np.asarray(x, float))
    y = np.asarray(y)
    w = np.asarray(weights, float)
    if np.any(w < 0) or not np.any(w > 0):
        raise ConfigError("stump weights must be non-negative and not all zero")
    n, d = x.shape
    wt0 = float(np.sum(w[y == 0]))
    wt1 = float(np.sum(w[y == 1]))
    best = (np.inf, -1, 0.0, 0.0, 0.0)  # err, feat, thr, l0, l1
    for a in range(d):
        order = np.argsort(x[:, a], kind="stable")
        vals = x[order, a]
        l0 = 0.0
        l1 = 0.0
        for pos in range(n - 1):
            i = order[pos]
            if y[i] == 0:
                l0 += w[i]
            else:
                l1 += w[i]
            v, vnext = vals[pos], vals[pos + 1]
            if vnext <= v:
                continue
            err = min(l0, l1) + min(wt0 - l0, wt1 - l1)
            if err < best[0]:
                mid = 0.5 * (v + vnext)
                thr = mid if v <= mid < vnext else v
                best = (err, a, thr, l0, l1)
    _, feat, thr, l0, l1 = best
    if feat < 0:
        return {
            "feature": -1,
            "threshold": 0.0,
            "left": counts_to_dist(wt0, wt1),
            "right": counts_to_dist(wt0, wt1),
        }
    return {
        "feature": int(feat),
        "threshold": float(thr),
        "left": counts_to_dist(l0, l1),
        "right": counts_to_dist(wt0 - l0, wt1 - l1),
    }


def stump_dist(payload, x):
    x = np.atleast_2d(x)
    out = np.empty((x.shape[0], 2))
    if payload["feature"] < 0:
        out[:] = payload["left"]
        return out
    mask = x[:, payload["feature"]] <= payload["threshold"]
    out[mask] = payload["left"]
    out[~mask] = payload["right"]
    return out


def _stump_fit(params, train, stream):
    return stump_fit_weighted(train.x, train.y, np.ones(len(train))), None


def _stump_predict(payload, scaler, x):
    return stump_dist(payload, x)


def _encode_stump(p):
    return {
        "feature": p["feature"],
        "threshold": p["threshold"],
        "left": list(map(float, p["left"])),
        "right": list(map(float, p["right"])),
    }


def _decode_stump(o):
    return {
        "feature": int(o["feature"]),
        "threshold": float(o["threshold"]),
        "left": np.array(o["left"], float),
        "right": np.array(o["right"], float),
    }


# ---------------------------------------------------------------------------
# REP tree: grow on 75%, reduced-error prune against the held-out 25%
# ---------------------------------------------------------------------------


def _reduced_error_prune(tree, prune_x, prune_y):
    """Collapse subtrees whose replacement leaf does not increase held-out
    error. Node ids exceed their parents', so one descending pass suffices."""
    n_nodes = tree["feat"].shape[0]
    p0 = np.zeros(n_nodes, np.int64)
    p1 = np.zeros(n_nodes, np.int64)
    feat, thr, left, right = tree["feat"], tree["thr"], tree["left"], tree["right"]
    for i in range(prune_x.shape[0]):
        node = 0
        while True:
            if prune_y[i] == 0:
                p0[node] += 1
            else:
                p1[node] += 1
            if feat[node] < 0:
                break
            node = left[node] if prune_x[i, feat[node]] <= thr[node] else right[node]
    err = np.zeros(n_nodes)
    for node in range(n_nodes - 1, -1, -1):
        label = majority_label(tree["c0"][node], tree["c1"][node])
        leaf_err = p1[node] if label == 0 else p0[node]
        if feat[node] < 0:
            err[node] = leaf_err
            continue
        child_err = err[left[node]] + err[right[node]]
        if leaf_err <= child_err:
            feat[node] = -1
            err[node] = leaf_err
        else:
            err[node] = child_err
    return tree


def _rep_fit(params, train, stream):
    min_leaf = int(params["min_leaf"])
    split_fraction = float(params["split_fraction"])
    if min_leaf < 1:
        raise ConfigError("min_leaf must be >= 1")
    n = len(train)
    prune_skipped = False
    grow_idx = np.arange(n)
    prune_idx = np.empty(0, np.int64)
    if n >= 4:
        seed = stream.spawn(1).next_u64()
        try:
            plan = make_folds(train.y, k=4, seed=seed, stratified=True)
        except ConfigError:
            try:
                plan = make_folds(train.y, k=4, seed=seed, stratified=False)
            except ConfigError:
                plan = None
        if plan is not None:
            prune_idx = plan.test_indices(0)
            grow_idx = plan.train_indices(0)
    if prune_idx.size == 0:
        prune_skipped = True
        grow_idx = np.arange(n)
    gy = train.y[grow_idx]
    min_gain = split_fraction * _root_entropy(gy)
    tree, _ = _grow(train.x[grow_idx], gy, min_leaf, 2 * min_leaf, min_gain)
    if not prune_skipped:
        tree = _reduced_error_prune(tree, train.x[prune_idx], train.y[prune_idx])
    tree["prune_skipped"] = prune_skipped
    return tree, None


def _rep_predict(payload, scaler, x):
    return tree_dist(payload, x)


def _encode_rep(p):
    out = encode_tree(p)
    out["prune_skipped"] = bool(p.get("prune_skipped", False))
    return out


def _decode_rep(o):
    p = decode_tree(o)
    p["prune_skipped"] = bool(o.get("prune_skipped", False))
    return p


# ---------------------------------------------------------------------------
# random tree: per-node random feature subsets, grown to purity
# ---------------------------------------------------------------------------


def _random_tree_fit(params, train, stream):
    d = train.x.shape[1]
    k = params.get("features_per_split")
    if k is None:
        k = math.ceil(math.sqrt(d))
    k = max(1, min(int(k), d))
    tree, _ = _grow(
        train.x, train.y, min_leaf=1, min_node_to_split=2, min_gain=0.0,
        feat_sub=k if k < d else 0, seed_state=stream.spawn(2).state_u64(),
    )
    return tree, None


# ---------------------------------------------------------------------------
# naive-Bayes tree
# ---------------------------------------------------------------------------

_NBT_MIN_NODE = 10
_NBT_RELATIVE_GAIN = 0.95  # split must cut CV error by >= 5% relative


def _nb_cv_error(x, y, seed) -> float:
    """Seeded 5-fold CV error of naive Bayes on this node's data."""
    try:
        plan = make_folds(y, 5, seed=seed, stratified=True)
    except ConfigError:
        plan = make_folds(y, 5, seed=seed, stratified=False)
    wrong = 0
    for f in range(5):
        tr, te = plan.train_indices(f), plan.test_indices(f)
        model = nb_train(x[tr], y[tr])
        pred = np.argmax(nb_posterior(model, x[te]), axis=1)
        wrong += int(np.sum(pred != y[te]))
    return wrong / y.shape[0]


def _split_cv_error(x, y, feat, thr, seed) -> float:
    try:
        plan = make_folds(y, 5, seed=seed, stratified=True)
    except ConfigError:
        plan = make_folds(y, 5, seed=seed, stratified=False)
    wrong = 0
    for f in range(5):
        tr, te = plan.train_indices(f), plan.test_indices(f)
        left = x[tr][:, feat] <= thr
        models = {}
        for side, mask in (("l", left), ("r", ~left)):
            if np.any(mask):
                models[side] = nb_train(x[tr][mask], y[tr][mask])
        fallback = nb_train(x[tr], y[tr])
        te_left = x[te][:, feat] <= thr
        for side, mask in (("l", te_left), ("r", ~te_left)):
            if not np.any(mask):
                continue
            model = models.get(side, fallback)
            pred = np.argmax(nb_posterior(model, x[te][mask]), axis=1)
            wrong += int(np.sum(pred != y[te][mask]))
    return wrong / y.shape[0]


def _nbtree_fit(params, train, stream):
    x, y = train.x, train.y
    feat_list, thr_list, left_list, right_list = [], [], [], []
    c0_list, c1_list = [], []
    leaf_models = {}
    counter = [0]

    def new_node(idx):
        node = len(feat_list)
        c1 = int(np.sum(y[idx] == 1))
        feat_list.append(-1)
        thr_list.append(0.0)
        left_list.append(-1)
        right_list.append(-1)
        c0_list.append(len(idx) - c1)
        c1_list.append(c1)
        return node

    def build(idx):
        node = new_node(idx)
        ys = y[idx]
        pure = c0_list[node] == 0 or c1_list[node] == 0
        if len(idx) < _NBT_MIN_NODE or pure:
            leaf_models[node] = nb_train(x[idx], ys)
            return node
        feats = np.arange(x.shape[1])
        bf, bt, bg = _kernels.best_entropy_split(x, y.astype(np.int8), idx, feats, 2)
        accept = False
        if bf >= 0 and bg > 0:
            seed = stream.spawn(3, counter[0]).next_u64()
            counter[0] += 1
            err_nb = _nb_cv_error(x[idx], ys, seed)
            err_split = _split_cv_error(x[idx], ys, bf, bt, seed)
            accept = err_nb > 0 and err_split <= _NBT_RELATIVE_GAIN * err_nb
        if not accept:
            leaf_models[node] = nb_train(x[idx], ys)
            return node
        mask = x[idx][:, bf] <= bt
        feat_list[node] = int(bf)
        thr_list[node] = float(bt)
        left_list[node] = build(idx[mask])
        right_list[node] = build(idx[~mask])
        return node

    build(np.arange(len(train)))
    tree = {
        "feat": np.array(feat_list, np.int64),
        "thr": np.array(thr_list, float),
        "left": np.array(left_list, np.int64),
        "right": np.array(right_list, np.int64),
        "c0": np.array(c0_list, np.int64),
        "c1": np.array(c1_list, np.int64),
        "leaf_models": leaf_models,
    }
    return tree, None


def _nbtree_predict(payload, scaler, x):
    x = np.atleast_2d(x)
    leaves = tree_leaf_ids(payload, x)
    out = np.empty((x.shape[0], 2))
    for leaf in np.unique(leaves):
        mask = leaves == leaf
        out[mask] = nb_posterior(payload["leaf_models"][int(leaf)], x[mask])
    return out


def _encode_nbtree(p):
    out = encode_tree(p)
    out["leaf_models"] = {str(k): encode_nb(v) for k, v in p["leaf_models"].items()}
    return out


def _decode_nbtree(o):
    p = decode_tree(o)
    p["leaf_models"] = {int(k): decode_nb(v) for k, v in o["leaf_models"].items()}
    return p


# ---------------------------------------------------------------------------
# logistic model tree (simplified: logistic models at the leaves)
# ---------------------------------------------------------------------------


def _lmt_fit(params, train, stream):
    min_split = int(params["min_split"])
    if min_split < 2:
        raise ConfigError("min_split must be >= 2")
    tree, _ = _grow(train.x, train.y, min_leaf=1, min_node_to_split=min_split, min_gain=0.0)
    leaves = tree_leaf_ids(tree, train.x)
    leaf_models = {}
    for leaf in np.unique(leaves):
        mask = leaves == leaf
        ys = train.y[mask]
        if np.all(ys == ys[0]):
            leaf_models[int(leaf)] = {"kind": "const", "label": int(ys[0])}
        else:
            w = fit_logistic(train.x[mask], ys, l2=_LMT_L2,
                             max_iter=_LMT_MAX_ITER, tol=_LMT_TOL)
            leaf_models[int(leaf)] = {"kind": "logistic", "w": w}
    tree["leaf_models"] = leaf_models
    return tree, None


def _lmt_predict(payload, scaler, x):
    x = np.atleast_2d(x)
    leaves = tree_leaf_ids(payload, x)
    out = np.empty((x.shape[0], 2))
    for leaf in np.unique(leaves):
        mask = leaves == leaf
        model = payload["leaf_models"][int(leaf)]
        if model["kind"] == "const":
            out[mask, 0] = 1.0 - model["label"]
            out[mask, 1] = float(model["label"])
        else:
            w = model["w"]
            z = w[0] + x[mask] @ w[1:]
            with np.errstate(over="ignore"):
                p1 = 1.0 / (1.0 + np.exp(-z))
            out[mask, 0] = 1.0 - p1
            out[mask, 1] = p1
    return out


def _encode_lmt(p):
    out = encode_tree(p)
    enc = {}
    for k, m in p["leaf_models"].items():
        if m["kind"] == "const":
            enc[str(k)] = {"kind": "const", "label": m["label"]}
        else:
            enc[str(k)] = {"kind": "logistic", "w": [float(v) for v in m["w"]]}
    out["leaf_models"] = enc
    return out


def _decode_lmt(o):
    p = decode_tree(o)
    dec = {}
    for k, m in o["leaf_models"].items():
        if m["kind"] == "const":
            dec[int(k)] = {"kind": "const", "label": int(m["label"])}
        else:
            dec[int(k)] = {"kind": "logistic", "w": np.array(m["w"], float)}
    p["leaf_models"] = dec
    return p


# ---------------------------------------------------------------------------
# C4.5-style pessimistic error bound (shared with PART)
# ---------------------------------------------------------------------------


def pessimistic_errors(wrong: float, n: float, z: float = _Z_CF25) -> float:
    """Upper-bound error count from observed errors at confidence 0.25."""
    if n <= 0:
        return 0.0
    f = wrong / n
    ucf = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (
        1.0 + z * z / n
    )
    return n * ucf


ALGOS = {
    "STUMP": AlgoDef(_stump_fit, _stump_predict, _encode_stump, _decode_stump, defaults={}),
    "REP_TREE": AlgoDef(
        _rep_fit, _rep_predict, _encode_rep, _decode_rep,
        defaults={"min_leaf": 2, "split_fraction": 0.001},
    ),
    "RANDOM_TREE": AlgoDef(
        _random_tree_fit, _rep_predict, encode_tree, decode_tree,
        defaults={"features_per_split": None},
    ),
    "NB_TREE": AlgoDef(_nbtree_fit, _nbtree_predict, _encode_nbtree, _decode_nbtree, defaults={}),
    "LMT": AlgoDef(_lmt_fit, _lmt_predict, _encode_lmt, _decode_lmt, defaults={"min_split": 15}),
}
