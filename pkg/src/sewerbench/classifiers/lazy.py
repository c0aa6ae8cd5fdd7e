"""Instance-based classifiers: 1-nearest-neighbor (IBK), the entropic
K* learner, and locally weighted learning with a per-query decision stump.

All three are scale-sensitive and embed a min-max scaler fit on their
training slice. Stored instances keep training order so distance ties
resolve to the earliest index.
"""

from __future__ import annotations

import numpy as np

from sewerbench import _kernels
from sewerbench.classifiers.base import AlgoDef, one_hot_dist
from sewerbench.dataset import fit_scaler
from sewerbench.errors import ConfigError

_KSTAR_BISECT_ITERS = 64
_KSTAR_PROBES = 64


# ---------------------------------------------------------------------------
# IBK (1-NN)
# ---------------------------------------------------------------------------


def _ibk_fit(params, train, stream):
    k = int(params["k"])
    if k != 1:
        raise ConfigError("IBK is pinned to neighbor size 1")
    scaler = fit_scaler(train.x)
    return {"x": scaler.transform(train.x), "y": train.y.copy()}, scaler


def _ibk_predict(payload, scaler, x):
    q = scaler.transform(np.atleast_2d(x))
    labels = _kernels.nn1_predict(
        np.ascontiguousarray(payload["x"]),
        np.ascontiguousarray(payload["y"], np.int8),
        np.ascontiguousarray(q),
    )
    return one_hot_dist(labels)


# ---------------------------------------------------------------------------
# K*
# ---------------------------------------------------------------------------


def kstar_select_scale(col: np.ndarray, blend: float) -> float:
    """Per-attribute kernel scale via bisection on the effective count.

    The scale s (kernel weight exp(-|dx|/s)) is chosen so the mean
    leave-one-out effective instance count (sum w)^2 / sum w^2 over a
    deterministic probe set matches 1 + blend*(n-1): blend -> 0 behaves
    like a nearest-match lookup, blend -> 1 weighs everything equally.
    Returns the inverse scale (0 marks a degenerate constant attribute).
    """
    n = col.shape[0]
    spread = float(col.max() - col.min())
    if spread <= 0 or n < 2:
        return 0.0
    order = np.argsort(col, kind="stable")
    m = min(_KSTAR_PROBES, n)
    probe_pos = np.round(np.linspace(0, n - 1, m)).astype(np.int64)
    probes = order[probe_pos].astype(np.int64)
    target = 1.0 + blend * (n - 1)
    lo, hi = 1e-6 * spread, 1e4 * spread
    col = np.ascontiguousarray(col, float)
    if _kernels.kstar_mean_neff(col, probes, 1.0 / hi) <= target:
        return 1.0 / hi
    if _kernels.kstar_mean_neff(col, probes, 1.0 / lo) >= target:
        return 1.0 / lo
    for _ in range(_KSTAR_BISECT_ITERS):
        mid = np.sqrt(lo * hi)
        if _kernels.kstar_mean_neff(col, probes, 1.0 / mid) < target:
            lo = mid
        else:
            hi = mid
    return 1.0 / np.sqrt(lo * hi)


def _kstar_fit(params, train, stream):
    blend = float(params["blend"])
    if not 0.0 < blend <= 1.0:
        raise ConfigError("K* blend must be in (0, 1]")
    scaler = fit_scaler(train.x)
    xs = scaler.transform(train.x)
    inv_scale = np.array([kstar_select_scale(xs[:, a], blend) for a in range(xs.shape[1])])
    return {"x": xs, "y": train.y.copy(), "inv_scale": inv_scale}, scaler


def _kstar_predict(payload, scaler, x):
    q = scaler.transform(np.atleast_2d(x))
    scores = _kernels.kstar_scores(
        np.ascontiguousarray(payload["x"]),
        np.ascontiguousarray(payload["y"], np.int8),
        np.ascontiguousarray(q),
        np.ascontiguousarray(payload["inv_scale"]),
    )
    totals = scores.sum(axis=1, keepdims=True)
    y = payload["y"]
    prior1 = float(np.mean(y == 1))
    out = np.empty_like(scores)
    ok = totals[:, 0] > 0
    out[ok] = scores[ok] / totals[ok]
    out[~ok] = (1.0 - prior1, prior1)  # everything underflowed: train priors
    return out


# ---------------------------------------------------------------------------
# LWL (linear-decay weights, decision stump local learner)
# ---------------------------------------------------------------------------


def _lwl_fit(params, train, stream):
    scaler = fit_scaler(train.x)
    xs = scaler.transform(train.x)
    return {"x": xs, "y": train.y.copy()}, scaler


def _lwl_orders(payload):
    orders = payload.get("_orders")
    if orders is None:
        xs = payload["x"]
        orders = np.empty((xs.shape[0], xs.shape[1]), np.int64)
        for a in range(xs.shape[1]):
            orders[:, a] = np.argsort(xs[:, a], kind="stable")
        payload["_orders"] = orders
    return orders


def _lwl_predict(payload, scaler, x):
    q = scaler.transform(np.atleast_2d(x))
    return _kernels.lwl_predict_dist(
        np.ascontiguousarray(payload["x"]),
        np.ascontiguousarray(payload["y"], np.int8),
        np.ascontiguousarray(_lwl_orders(payload)),
        np.ascontiguousarray(q),
    )


def _encode_instances(p):
    out = {"x": p["x"].tolist(), "y": p["y"].tolist()}
    if "inv_scale" in p:
        out["inv_scale"] = p["inv_scale"].tolist()
    return out


def _decode_instances(o):
    p = {"x": np.array(o["x"], float), "y": np.array(o["y"], np.int8)}
    if "inv_scale" in o:
        p["inv_scale"] = np.array(o["inv_scale"], float)
    return p


ALGOS = {
    "IBK": AlgoDef(_ibk_fit, _ibk_predict, _encode_instances, _decode_instances,
                   defaults={"k": 1}),
    "KSTAR": AlgoDef(_kstar_fit, _kstar_predict, _encode_instances, _decode_instances,
                     defaults={"blend": 0.2}),
    "LWL": AlgoDef(_lwl_fit, _lwl_predict, _encode_instances, _decode_instances,
                   defaults={}),
}
