"""The nine ensemble schemes: bagging, AdaBoost.M1 on stumps, random
subspaces, random committee, rotation forest, greedy ensemble selection,
probability-averaging vote, multi-scheme selection by internal CV, and the
weighted predictor ensemble (held-out-accuracy vote weights).

Every ensemble predicts through the same argmax-with-tie-to-0 contract as
the base classifiers. Member randomness derives from the ensemble's seed
path, so ensembles are as reproducible as their members.

Stream sub-path tags (under the ensemble seed path): 1/2 bagging member +
bootstrap, 3 subspace draw, 4 committee member, 5/6 rotation draw + tree,
7/8 selection split + library, 9/10 multi-scheme folds + internal fits,
11 WPE split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from sewerbench.classifiers import (
    ClassifierSpec,
    FitContext,
    Model,
    model_from_envelope,
    model_to_envelope,
)
from sewerbench.classifiers import fit as fit_classifier
from sewerbench.dataset import Dataset, make_folds
from sewerbench.errors import ConfigError
from sewerbench.numerics import pca

ENSEMBLE_FORMAT = "sewerbench-ensemble"

METHODS = (
    "BAGGING",
    "ADABOOST_M1",
    "RANDOM_SUBSPACE",
    "RANDOM_COMMITTEE",
    "ROTATION_FOREST",
    "ENSEMBLE_SELECTION",
    "VOTE",
    "MULTI_SCHEME",
    "WPE",
)

#: E2 methods combine an explicit member roster instead of cloned bases
MEMBER_METHODS = ("VOTE", "MULTI_SCHEME", "WPE")

_DEFAULTS = {
    "BAGGING": {"base": "REP_TREE", "base_params": {}},
    "ADABOOST_M1": {},
    "RANDOM_SUBSPACE": {"base": "REP_TREE", "base_params": {}, "fraction": 0.5},
    "RANDOM_COMMITTEE": {"base": "RANDOM_TREE", "base_params": {}},
    "ROTATION_FOREST": {"base": "RANDOM_TREE", "base_params": {}, "k_subsets": 3,
                        "sample_fraction": 0.75},
    "ENSEMBLE_SELECTION": {"base": "REP_TREE", "base_params": {}},
    "VOTE": {},
    "MULTI_SCHEME": {},
    "WPE": {},
}


@dataclass(frozen=True)
class EnsembleSpec:
    method: str
    size: int = 10
    members: tuple = ()
    params: dict = field(default_factory=dict)
    seed_path: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown ensemble method {self.method!r}")
        if self.size < 1:
            raise ConfigError("ensemble size must be >= 1")
        defaults = _DEFAULTS[self.method]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"{self.method}: unknown parameter(s) {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "seed_path", tuple(int(p) for p in self.seed_path))
        if self.method in MEMBER_METHODS and not self.members:
            raise ConfigError(f"{self.method} requires an explicit member list")

    def key(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "size": self.size,
                "params": self.params,
                "seed_path": list(self.seed_path),
                "members": [m.key() for m in self.members],
            },
            sort_keys=True,
        )


@dataclass
class EnsembleModel:
    spec: EnsembleSpec
    payload: dict

    def predict_dist_batch(self, x: np.ndarray) -> np.ndarray:
        return _PREDICT[self.spec.method](self.spec, self.payload, np.atleast_2d(x))

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        dist = self.predict_dist_batch(x)
        return (dist[:, 1] > dist[:, 0]).astype(np.int8)

    def predict(self, x: np.ndarray) -> int:
        return int(self.predict_batch(np.atleast_2d(x))[0])

    def predict_dist(self, x: np.ndarray):
        from sewerbench.classifiers import ClassDistribution

        row = self.predict_dist_batch(np.atleast_2d(x))[0]
        return ClassDistribution(float(row[0]), float(row[1]))


def _base_spec(ens: EnsembleSpec, tag: int, m: int) -> ClassifierSpec:
    return ClassifierSpec(
        ens.params["base"],
        ens.params.get("base_params", {}),
        ens.seed_path + (tag, m),
    )


def _holdout_split(y, ctx: FitContext, ens: EnsembleSpec, tag: int):
    """Seeded stratified 80/20 split (fold 0 of a 5-fold plan is held out)."""
    seed = ctx.stream_for(ens.seed_path + (tag,)).next_u64()
    try:
        plan = make_folds(y, 5, seed=seed, stratified=True)
    except ConfigError:
        plan = make_folds(y, 5, seed=seed, stratified=False)
    return plan.train_indices(0), plan.test_indices(0)


def plurality_vote(labels: np.ndarray) -> np.ndarray:
    """labels (n_members, n_queries) -> vote-fraction distributions."""
    votes1 = (labels == 1).sum(axis=0)
    n = labels.shape[0]
    dist = np.empty((labels.shape[1], 2))
    dist[:, 1] = votes1 / n
    dist[:, 0] = 1.0 - dist[:, 1]
    return dist


def weighted_vote(labels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """The weighted-predictor combination: per class j, sum the weights of
    members voting for j; argmax with ties to 0 happens downstream."""
    score1 = (weights[:, None] * (labels == 1)).sum(axis=0)
    score0 = (weights[:, None] * (labels == 0)).sum(axis=0)
    total = score0 + score1
    dist = np.empty((labels.shape[1], 2))
    ok = total > 0
    dist[ok, 0] = score0[ok] / total[ok]
    dist[ok, 1] = score1[ok] / total[ok]
    dist[~ok] = 0.5
    return dist


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _fit_bagging(ens, train, ctx):
    n = len(train)
    members = []
    for m in range(ens.size):
        stream = ctx.stream_for(ens.seed_path + (2, m))
        idx = np.array([stream.randint_below(n) for _ in range(n)])
        replicate = train.subset(idx)
        model = fit_classifier(_base_spec(ens, 1, m), replicate, ctx.uncached())
        members.append(model)
    return {"members": members}


def _fit_adaboost(ens, train, ctx):
    from sewerbench.classifiers.trees import stump_dist, stump_fit_weighted

    x, y = train.x, train.y
    n = len(train)
    weights = np.full(n, 1.0 / n)
    stumps = []
    alphas = []
    for _ in range(ens.size):
        stump = stump_fit_weighted(x, y, weights)
        dist = stump_dist(stump, x)
        pred = (dist[:, 1] > dist[:, 0]).astype(np.int8)
        miss = pred != y
        eps = float(np.sum(weights[miss]))
        if eps >= 0.5:
            break
        stumps.append(stump)
        alphas.append(float(np.log((1.0 - max(eps, 1e-12)) / max(eps, 1e-12))))
        if eps <= 0.0:
            break
        weights = weights * np.exp(alphas[-1] * miss)
        weights /= weights.sum()
    c1 = int(np.sum(y == 1))
    return {
        "stumps": stumps,
        "alphas": np.array(alphas),
        "fallback": (n - c1, c1),  # used when no stump beats chance
    }


def _fit_subspace(ens, train, ctx):
    d = train.x.shape[1]
    k = max(1, int(np.ceil(float(ens.params["fraction"]) * d)))
    members = []
    subsets = []
    for m in range(ens.size):
        stream = ctx.stream_for(ens.seed_path + (3, m))
        subset = sorted(stream.sample_without_replacement(d, k))
        names = tuple(train.feature_names[i] for i in subset)
        projected = Dataset(names, train.x[:, subset], train.y)
        model = fit_classifier(_base_spec(ens, 1, m), projected, ctx.uncached())
        members.append(model)
        subsets.append(subset)
    return {"members": members, "subsets": subsets}


def _fit_committee(ens, train, ctx):
    members = [
        fit_classifier(_base_spec(ens, 4, m), train, ctx.uncached())
        for m in range(ens.size)
    ]
    return {"members": members}


def _rotation_matrix(ens, train, ctx, m):
    """Block-diagonal rotation from per-subset PCA on class-filtered
    75% bootstrap samples."""
    d = train.x.shape[1]
    k = int(ens.params["k_subsets"])
    frac = float(ens.params["sample_fraction"])
    stream = ctx.stream_for(ens.seed_path + (5, m))
    perm = stream.permutation(d)
    chunks = [np.sort(np.array(c)) for c in np.array_split(np.array(perm), k) if len(c)]
    rot = np.zeros((d, d))
    for chunk in chunks:
        keep = [cls for cls in (0, 1) if stream.uniform() < 0.5]
        if not keep:
            keep = [0, 1]
        mask = np.isin(train.y, keep)
        pool = np.flatnonzero(mask)
        if pool.size == 0:
            pool = np.arange(len(train))
        draws = max(1, int(np.ceil(frac * pool.size)))
        sample_idx = pool[[stream.randint_below(pool.size) for _ in range(draws)]]
        axes = pca(train.x[np.ix_(sample_idx, chunk)]).rotation
        rot[np.ix_(chunk, chunk)] = axes
    return rot


def _fit_rotation(ens, train, ctx):
    members = []
    rotations = []
    for m in range(ens.size):
        rot = _rotation_matrix(ens, train, ctx, m)
        rotated = Dataset(train.feature_names, train.x @ rot, train.y)
        model = fit_classifier(_base_spec(ens, 6, m), rotated, ctx.uncached())
        members.append(model)
        rotations.append(rot)
    return {"members": members, "rotations": rotations}


def _fit_selection(ens, train, ctx):
    fit_idx, sel_idx = _holdout_split(train.y, ctx, ens, 7)
    fit_part = train.subset(fit_idx)
    sel_x, sel_y = train.x[sel_idx], train.y[sel_idx]
    if ens.members:
        library_specs = list(ens.members)
    else:
        library_specs = [_base_spec(ens, 8, i) for i in range(ens.size)]
    library = [fit_classifier(s, fit_part, ctx.uncached()) for s in library_specs]
    preds = np.stack([m.predict_batch(sel_x) for m in library])
    bag = []
    bag_votes = np.zeros(sel_x.shape[0])  # running count of label-1 votes
    current_acc = -1.0
    while len(bag) < ens.size:
        best_i, best_acc = -1, current_acc
        for i in range(len(library)):
            votes1 = bag_votes + (preds[i] == 1)
            pred = (votes1 * 2 > (len(bag) + 1)).astype(np.int8)  # tie -> 0
            acc = float(np.mean(pred == sel_y))
            if acc > best_acc:
                best_acc, best_i = acc, i
        if best_i < 0:
            break
        bag.append(best_i)
        bag_votes += preds[best_i] == 1
        current_acc = best_acc
    if not bag:
        bag = [0]
    return {"library": library, "bag": bag}


def _fit_vote(ens, train, ctx):
    members = [fit_classifier(spec, train, ctx) for spec in ens.members]
    return {"members": members}


def _fit_multi_scheme(ens, train, ctx):
    seed = ctx.stream_for(ens.seed_path + (9,)).next_u64()
    try:
        plan = make_folds(train.y, 5, seed=seed, stratified=True)
    except ConfigError:
        plan = make_folds(train.y, 5, seed=seed, stratified=False)
    cv_means = []
    for mi, member in enumerate(ens.members):
        correct = 0
        for f in range(5):
            tr, te = plan.train_indices(f), plan.test_indices(f)
            inner_spec = ClassifierSpec(
                member.algorithm, member.params, ens.seed_path + (10, mi, f)
            )
            model = fit_classifier(inner_spec, train.subset(tr), ctx.uncached())
            correct += int(np.sum(model.predict_batch(train.x[te]) == train.y[te]))
        cv_means.append(correct / len(train))
    winner = int(np.argmax(cv_means))  # argmax keeps the earliest on ties
    model = fit_classifier(ens.members[winner], train, ctx)
    return {"winner": winner, "cv_means": cv_means, "model": model}


def _fit_wpe(ens, train, ctx):
    fit_idx, held_idx = _holdout_split(train.y, ctx, ens, 11)
    fit_part = train.subset(fit_idx)
    members = [fit_classifier(spec, fit_part, ctx.uncached()) for spec in ens.members]
    weights = np.array(
        [
            float(np.mean(m.predict_batch(train.x[held_idx]) == train.y[held_idx]))
            for m in members
        ]
    )
    return {"members": members, "weights": weights}


_FIT = {
    "BAGGING": _fit_bagging,
    "ADABOOST_M1": _fit_adaboost,
    "RANDOM_SUBSPACE": _fit_subspace,
    "RANDOM_COMMITTEE": _fit_committee,
    "ROTATION_FOREST": _fit_rotation,
    "ENSEMBLE_SELECTION": _fit_selection,
    "VOTE": _fit_vote,
    "MULTI_SCHEME": _fit_multi_scheme,
    "WPE": _fit_wpe,
}


def fit_ensemble(spec: EnsembleSpec, train: Dataset, ctx: FitContext | None = None) -> EnsembleModel:
    if len(train) == 0:
        raise ConfigError("cannot fit on an empty dataset")
    if ctx is None:
        ctx = FitContext()
    return EnsembleModel(spec=spec, payload=_FIT[spec.method](spec, train, ctx))


def fit_any(spec, train: Dataset, ctx: FitContext | None = None):
    """Uniform entry point for base classifiers and ensembles."""
    if isinstance(spec, EnsembleSpec):
        return fit_ensemble(spec, train, ctx)
    return fit_classifier(spec, train, ctx)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


def _predict_plurality(spec, payload, x):
    labels = np.stack([m.predict_batch(x) for m in payload["members"]])
    return plurality_vote(labels)


def _predict_adaboost(spec, payload, x):
    from sewerbench.classifiers.trees import stump_dist

    if not payload["stumps"]:
        c0, c1 = payload["fallback"]
        tot = max(c0 + c1, 1)
        return np.tile(np.array([c0 / tot, c1 / tot]), (x.shape[0], 1))
    labels = []
    for s in payload["stumps"]:
        dist = stump_dist(s, x)
        labels.append((dist[:, 1] > dist[:, 0]).astype(np.int8))
    return weighted_vote(np.stack(labels), payload["alphas"])


def _predict_subspace(spec, payload, x):
    labels = np.stack(
        [
            m.predict_batch(x[:, subset])
            for m, subset in zip(payload["members"], payload["subsets"])
        ]
    )
    return plurality_vote(labels)


def _predict_average(spec, payload, x):
    dists = np.stack([m.predict_dist_batch(x) for m in payload["members"]])
    return dists.mean(axis=0)


def _predict_rotation(spec, payload, x):
    dists = np.stack(
        [
            m.predict_dist_batch(x @ rot)
            for m, rot in zip(payload["members"], payload["rotations"])
        ]
    )
    return dists.mean(axis=0)


def _predict_selection(spec, payload, x):
    labels = np.stack([payload["library"][i].predict_batch(x) for i in payload["bag"]])
    return plurality_vote(labels)


def _predict_multi(spec, payload, x):
    return payload["model"].predict_dist_batch(x)


def _predict_wpe(spec, payload, x):
    labels = np.stack([m.predict_batch(x) for m in payload["members"]])
    return weighted_vote(labels, payload["weights"])


_PREDICT = {
    "BAGGING": _predict_plurality,
    "ADABOOST_M1": _predict_adaboost,
    "RANDOM_SUBSPACE": _predict_subspace,
    "RANDOM_COMMITTEE": _predict_average,
    "ROTATION_FOREST": _predict_rotation,
    "ENSEMBLE_SELECTION": _predict_selection,
    "VOTE": _predict_average,
    "MULTI_SCHEME": _predict_multi,
    "WPE": _predict_wpe,
}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _member_specs_to_json(members):
    return [
        {"algorithm": s.algorithm, "params": s.params, "seed_path": list(s.seed_path)}
        for s in members
    ]


def _member_specs_from_json(objs):
    return tuple(
        ClassifierSpec(o["algorithm"], o["params"], tuple(o["seed_path"])) for o in objs
    )


def ensemble_to_envelope(model: EnsembleModel) -> dict:
    spec = model.spec
    p = model.payload
    payload: dict = {}
    if spec.method == "ADABOOST_M1":
        from sewerbench.classifiers.trees import _encode_stump

        payload = {
            "stumps": [_encode_stump(s) for s in p["stumps"]],
            "alphas": p["alphas"].tolist(),
            "fallback": list(p["fallback"]),
        }
    elif spec.method == "MULTI_SCHEME":
        payload = {
            "winner": p["winner"],
            "cv_means": [float(v) for v in p["cv_means"]],
            "model": model_to_envelope(p["model"]),
        }
    elif spec.method == "ENSEMBLE_SELECTION":
        payload = {
            "members": [model_to_envelope(m) for m in p["library"]],
            "bag": list(map(int, p["bag"])),
        }
    else:
        payload = {"members": [model_to_envelope(m) for m in p["members"]]}
        if spec.method == "RANDOM_SUBSPACE":
            payload["subsets"] = [list(map(int, s)) for s in p["subsets"]]
        elif spec.method == "ROTATION_FOREST":
            payload["rotations"] = [r.tolist() for r in p["rotations"]]
        elif spec.method == "WPE":
            payload["weights"] = p["weights"].tolist()
    return {
        "format": ENSEMBLE_FORMAT,
        "version": 1,
        "method": spec.method,
        "size": spec.size,
        "params": spec.params,
        "seed_path": list(spec.seed_path),
        "member_specs": _member_specs_to_json(spec.members),
        "payload": payload,
    }


def ensemble_from_envelope(obj: dict) -> EnsembleModel:
    if obj.get("format") != ENSEMBLE_FORMAT:
        raise ConfigError("not an ensemble envelope")
    spec = EnsembleSpec(
        obj["method"],
        obj["size"],
        _member_specs_from_json(obj["member_specs"]),
        obj["params"],
        tuple(obj["seed_path"]),
    )
    p = obj["payload"]
    if spec.method == "ADABOOST_M1":
        from sewerbench.classifiers.trees import _decode_stump

        payload = {
            "stumps": [_decode_stump(s) for s in p["stumps"]],
            "alphas": np.array(p["alphas"], float),
            "fallback": tuple(p["fallback"]),
        }
    elif spec.method == "MULTI_SCHEME":
        payload = {
            "winner": int(p["winner"]),
            "cv_means": list(p["cv_means"]),
            "model": model_from_envelope(p["model"]),
        }
    elif spec.method == "ENSEMBLE_SELECTION":
        payload = {
            "library": [model_from_envelope(m) for m in p["members"]],
            "bag": list(p["bag"]),
        }
    else:
        payload = {"members": [model_from_envelope(m) for m in p["members"]]}
        if spec.method == "RANDOM_SUBSPACE":
            payload["subsets"] = [list(s) for s in p["subsets"]]
        elif spec.method == "ROTATION_FOREST":
            payload["rotations"] = [np.array(r, float) for r in p["rotations"]]
        elif spec.method == "WPE":
            payload["weights"] = np.array(p["weights"], float)
    return EnsembleModel(spec=spec, payload=payload)


def dump_ensemble(model: EnsembleModel) -> str:
    return json.dumps(ensemble_to_envelope(model), sort_keys=True)


def load_ensemble(text: str) -> EnsembleModel:
    return ensemble_from_envelope(json.loads(text))
