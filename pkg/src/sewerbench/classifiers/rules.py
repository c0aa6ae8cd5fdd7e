"""Rule-based classifiers: majority predictor (ZeroR), decision table with
best-first feature-subset search, and PART-style rule lists extracted from
repeatedly built, pessimistically pruned trees.
"""

from __future__ import annotations

import heapq
from statistics import NormalDist

import numpy as np

from sewerbench.classifiers.base import AlgoDef, counts_to_dist, majority_label
from sewerbench.classifiers.trees import _grow, pessimistic_errors
from sewerbench.errors import ConfigError

# ---------------------------------------------------------------------------
# ZeroR
# ---------------------------------------------------------------------------


def _zeror_fit(params, train, stream):
    c1 = int(np.sum(train.y == 1))
    return {"c0": len(train) - c1, "c1": c1}, None


def _zeror_predict(payload, scaler, x):
    x = np.atleast_2d(x)
    dist = counts_to_dist(payload["c0"], payload["c1"])
    return np.tile(dist, (x.shape[0], 1))


# ---------------------------------------------------------------------------
# decision table
# ---------------------------------------------------------------------------

_N_BINS = 10
_STALE_LIMIT = 5  # best-first stops after this many non-improving expansions


def _bin_matrix(x, mins, widths):
    b = np.zeros(x.shape, np.int64)
    for j in range(x.shape[1]):
        if widths[j] > 0:
            b[:, j] = np.clip((x[:, j] - mins[j]) // widths[j], 0, _N_BINS - 1)
    return b


def _loo_accuracy(binned, y, subset, global_label):
    """Leave-one-out accuracy of the table on the given feature subset."""
    n = y.shape[0]
    if subset:
        codes = np.zeros(n, np.int64)
        for pos, f in enumerate(subset):
            codes += binned[:, f] * (_N_BINS ** pos)
    else:
        codes = np.zeros(n, np.int64)
    _, inverse, counts = np.unique(codes, return_inverse=True, return_counts=True)
    c1 = np.bincount(inverse, weights=(y == 1).astype(float))
    c0 = counts - c1
    own0 = (y == 0).astype(float)
    own1 = (y == 1).astype(float)
    cell0 = c0[inverse] - own0
    cell1 = c1[inverse] - own1
    pred = np.where(cell1 > cell0, 1, 0)  # ties -> 0
    empty = (cell0 + cell1) == 0
    pred[empty] = global_label
    return float(np.mean(pred == y))


def decision_table_search(binned, y, n_features, global_label):
    """Best-first search over feature subsets maximizing LOO accuracy.

    Expansion of the most promising open subset generates its supersets;
    the search stops after _STALE_LIMIT consecutive expansions that fail
    to improve on the best accuracy seen, or when the lattice is
    exhausted. The stale cutoff is a cost-control heuristic, so it only
    engages when the lattice exceeds 16 subsets; up to 4 features the
    search always exhausts the lattice (and therefore returns the
    exhaustive optimum). Ties prefer the earlier-found (smaller,
    lexicographically first) subset.
    """
    evaluated = {}

    def evaluate(subset):
        if subset not in evaluated:
            evaluated[subset] = _loo_accuracy(binned, y, subset, global_label)
        return evaluated[subset]

    stale_limit = _STALE_LIMIT if 2 ** n_features > 16 else np.inf
    start = ()
    best_subset, best_acc = start, evaluate(start)
    open_heap = [(-best_acc, len(start), start)]
    closed = set()
    stale = 0
    while open_heap and stale < stale_limit:
        _, _, subset = heapq.heappop(open_heap)
        if subset in closed:
            continue
        closed.add(subset)
        improved = False
        for f in range(n_features):
            if f in subset:
                continue
            child = tuple(sorted(subset + (f,)))
            if child in evaluated:
                continue
            acc = evaluate(child)
            heapq.heappush(open_heap, (-acc, len(child), child))
            if acc > best_acc:
                best_acc = acc
                best_subset = child
                improved = True
        stale = 0 if improved else stale + 1
    return best_subset, best_acc


def _dt_fit(params, train, stream):
    x, y = train.x, train.y
    n, d = x.shape
    mins = x.min(axis=0)
    widths = (x.max(axis=0) - mins) / _N_BINS
    binned = _bin_matrix(x, mins, widths)
    c1 = int(np.sum(y == 1))
    global_label = majority_label(n - c1, c1)
    subset, _ = decision_table_search(binned, y, d, global_label)
    table = {}
    if subset:
        codes = np.zeros(n, np.int64)
        for pos, f in enumerate(subset):
            codes += binned[:, f] * (_N_BINS ** pos)
    else:
        codes = np.zeros(n, np.int64)
    for code in np.unique(codes):
        mask = codes == code
        k1 = int(np.sum(y[mask] == 1))
        table[int(code)] = (int(np.sum(mask)) - k1, k1)
    return {
        "subset": tuple(int(f) for f in subset),
        "mins": mins,
        "widths": widths,
        "table": table,
        "global": (n - c1, c1),
    }, None


def _dt_predict(payload, scaler, x):
    x = np.atleast_2d(x)
    binned = _bin_matrix(x, payload["mins"], payload["widths"])
    out = np.empty((x.shape[0], 2))
    g = counts_to_dist(*payload["global"])
    subset = payload["subset"]
    for i in range(x.shape[0]):
        code = 0
        for pos, f in enumerate(subset):
            code += int(binned[i, f]) * (_N_BINS ** pos)
        cell = payload["table"].get(code)
        out[i] = counts_to_dist(*cell) if cell is not None else g
    return out


def _encode_dt(p):
    return {
        "subset": list(p["subset"]),
        "mins": [float(v) for v in p["mins"]],
        "widths": [float(v) for v in p["widths"]],
        "table": {str(k): list(v) for k, v in p["table"].items()},
        "global": list(p["global"]),
    }


def _decode_dt(o):
    return {
        "subset": tuple(o["subset"]),
        "mins": np.array(o["mins"], float),
        "widths": np.array(o["widths"], float),
        "table": {int(k): tuple(v) for k, v in o["table"].items()},
        "global": tuple(o["global"]),
    }


# ---------------------------------------------------------------------------
# PART
# ---------------------------------------------------------------------------


def _pessimistic_prune(tree, z):
    """C4.5-style subtree replacement on grow counts."""
    n_nodes = tree["feat"].shape[0]
    pess = np.zeros(n_nodes)
    feat = tree["feat"]
    for node in range(n_nodes - 1, -1, -1):
        c0, c1 = tree["c0"][node], tree["c1"][node]
        wrong = min(c0, c1)
        leaf_pess = pessimistic_errors(wrong, c0 + c1, z)
        if feat[node] < 0:
            pess[node] = leaf_pess
            continue
        child = pess[tree["left"][node]] + pess[tree["right"][node]]
        if leaf_pess <= child:
            feat[node] = -1
            pess[node] = leaf_pess
        else:
            pess[node] = child
    return tree


def _leaf_paths(tree):
    """(node_id, conds) per leaf, preorder; conds are (feat, is_gt, thr)."""
    out = []
    stack = [(0, [])]
    while stack:
        node, conds = stack.pop()
        if tree["feat"][node] < 0:
            out.append((node, conds))
            continue
        f, t = int(tree["feat"][node]), float(tree["thr"][node])
        stack.append((int(tree["right"][node]), conds + [(f, 1, t)]))
        stack.append((int(tree["left"][node]), conds + [(f, 0, t)]))
    out.sort(key=lambda item: item[0])
    return out


def _covered_mask(x, conds):
    mask = np.ones(x.shape[0], bool)
    for f, is_gt, thr in conds:
        mask &= (x[:, f] > thr) if is_gt else (x[:, f] <= thr)
    return mask


def _part_fit(params, train, stream):
    """Repeated build-prune-extract: the largest-coverage leaf of each
    pruned tree becomes a rule and its instances are removed. The final
    rule is an unconditional default."""
    confidence = float(params["confidence"])
    if not 0.0 < confidence < 0.5:
        raise ConfigError("PART confidence must be in (0, 0.5)")
    z = NormalDist().inv_cdf(1.0 - confidence)
    x, y = train.x, train.y
    remaining = np.arange(len(train))
    rules = []

    def default_rule(idx):
        ys = y[idx] if idx.size else y
        c1 = int(np.sum(ys == 1))
        c0 = ys.shape[0] - c1
        rules.append({"conds": [], "label": majority_label(c0, c1), "counts": (c0, c1)})

    while remaining.size > 0:
        ys = y[remaining]
        if remaining.size < 4 or np.all(ys == ys[0]):
            default_rule(remaining)
            remaining = np.empty(0, np.int64)
            break
        tree, _ = _grow(x[remaining], ys, min_leaf=2, min_node_to_split=4, min_gain=0.0)
        tree = _pessimistic_prune(tree, z)
        leaves = _leaf_paths(tree)
        if len(leaves) == 1:
            default_rule(remaining)
            remaining = np.empty(0, np.int64)
            break
        best_node, best_conds = max(
            leaves,
            key=lambda item: (tree["c0"][item[0]] + tree["c1"][item[0]], -item[0]),
        )
        covered = _covered_mask(x[remaining], best_conds)
        if not np.any(covered):
            default_rule(remaining)
            remaining = np.empty(0, np.int64)
            break
        c0 = int(tree["c0"][best_node])
        c1 = int(tree["c1"][best_node])
        rules.append({
            "conds": [tuple(c) for c in best_conds],
            "label": majority_label(c0, c1),
            "counts": (c0, c1),
        })
        remaining = remaining[~covered]
    if not rules or rules[-1]["conds"]:
        # remainder emptied exactly by the last conditional rule
        c1 = int(np.sum(y == 1))
        rules.append({"conds": [], "label": majority_label(len(train) - c1, c1),
                      "counts": (len(train) - c1, c1)})
    return {"rules": rules}, None


def _part_predict(payload, scaler, x):
    x = np.atleast_2d(x)
    out = np.empty((x.shape[0], 2))
    undecided = np.ones(x.shape[0], bool)
    for rule in payload["rules"]:
        mask = undecided & _covered_mask(x, rule["conds"])
        if np.any(mask):
            out[mask] = counts_to_dist(*rule["counts"])
        undecided &= ~mask
        if not np.any(undecided):
            break
    return out


def _encode_part(p):
    return {
        "rules": [
            {"conds": [[int(f), int(g), float(t)] for f, g, t in r["conds"]],
             "label": int(r["label"]),
             "counts": [int(r["counts"][0]), int(r["counts"][1])]}
            for r in p["rules"]
        ]
    }


def _decode_part(o):
    return {
        "rules": [
            {"conds": [tuple(c) for c in r["conds"]],
             "label": int(r["label"]),
             "counts": (int(r["counts"][0]), int(r["counts"][1]))}
            for r in o["rules"]
        ]
    }


ALGOS = {
    "ZERO_R": AlgoDef(_zeror_fit, _zeror_predict,
                      lambda p: dict(p), lambda o: {"c0": int(o["c0"]), "c1": int(o["c1"])},
                      defaults={}),
    "DT": AlgoDef(_dt_fit, _dt_predict, _encode_dt, _decode_dt, defaults={}),
    "PART": AlgoDef(_part_fit, _part_predict, _encode_part, _decode_part,
                    defaults={"confidence": 0.25}),
}
