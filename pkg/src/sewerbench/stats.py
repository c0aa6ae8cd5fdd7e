"""Accuracy bookkeeping, the repeated stratified 10-fold CV protocol, and
pairwise two-sample Kolmogorov-Smirnov dominance analysis.

The KS D statistic is the largest gap between the two empirical CDFs over
the pooled sample; at the 5% level the critical value is
1.358 * sqrt((n+m)/(n*m)). A rejected test is directed by comparing means
(ties within 1e-12 stay EQUAL), matching the =, succeeds, precedes
rendering of the dominance matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from sewerbench.classifiers import FitContext
from sewerbench.dataset import Dataset, make_folds
from sewerbench.ensembles import fit_any
from sewerbench.errors import ConfigError, FitError
from sewerbench.rng import derive_state

KS_ALPHA = 0.05
KS_COEFF_5PCT = 1.358
_MEAN_TIE_EPS = 1e-12

EQUAL = "EQUAL"
DOMINATES = "DOMINATES"
DOMINATED = "DOMINATED"

_SYMBOL_MD = {EQUAL: "=", DOMINATES: "≻", DOMINATED: "≺"}
_SYMBOL_CSV = {EQUAL: "=", DOMINATES: ">", DOMINATED: "<"}


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ConfigError("predictions and labels must be equal-length, non-empty")
    return float(np.mean(predictions == labels))


@dataclass
class EvalSample:
    """Per-classifier train/test accuracies over repeats x folds cells."""

    classifier_id: str
    category: str
    train_accuracies: list
    test_accuracies: list

    @property
    def train_mean(self) -> float:
        return float(np.mean(self.train_accuracies))

    @property
    def test_mean(self) -> float:
        return float(np.mean(self.test_accuracies))

    @property
    def train_std(self) -> float:
        return float(np.std(self.train_accuracies, ddof=1))

    @property
    def test_std(self) -> float:
        return float(np.std(self.test_accuracies, ddof=1))

    def to_json(self) -> dict:
        return {
            "classifier_id": self.classifier_id,
            "category": self.category,
            "train_accuracies": list(self.train_accuracies),
            "test_accuracies": list(self.test_accuracies),
            "train_mean": self.train_mean,
            "train_std": self.train_std,
            "test_mean": self.test_mean,
            "test_std": self.test_std,
        }

    @staticmethod
    def from_json(obj) -> "EvalSample":
        return EvalSample(
            obj["classifier_id"],
            obj.get("category", ""),
            list(obj["train_accuracies"]),
            list(obj["test_accuracies"]),
        )


def fold_seed(root_seed: int, repeat: int) -> int:
    """Fold plans depend only on (root seed, repeat): every classifier in a
    bench run sees identical partitions."""
    return derive_state(root_seed, (90, repeat))


def run_cv(
    spec,
    dataset: Dataset,
    k: int = 10,
    repeats: int = 10,
    root_seed: int = 42,
    classifier_id: str | None = None,
    category: str = "",
    stratified: bool = True,
) -> EvalSample:
    """Repeated stratified k-fold CV; deterministic end to end.

    Cell (r, f) trains on the other k-1 folds with streams rooted at
    (root_seed, r, f, *spec.seed_path), records accuracy on those k-1
    folds and on the held-out fold.
    """
    train_accs = []
    test_accs = []
    cid = classifier_id or getattr(spec, "algorithm", None) or spec.method
    for r in range(repeats):
        plan = make_folds(dataset.y, k, seed=fold_seed(root_seed, r), stratified=stratified)
        for f in range(k):
            tr = plan.train_indices(f)
            te = plan.test_indices(f)
            ctx = FitContext(root_seed, (r, f))
            try:
                model = fit_any(spec, dataset.subset(tr), ctx)
                train_accs.append(accuracy(model.predict_batch(dataset.x[tr]), dataset.y[tr]))
                test_accs.append(accuracy(model.predict_batch(dataset.x[te]), dataset.y[te]))
            except Exception as exc:
                raise FitError(
                    f"{cid}: fit failed at repeat {r} fold {f}: {exc}"
                ) from exc
    return EvalSample(cid, category, train_accs, test_accs)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KsOutcome:
    relation: str
    d_statistic: float
    critical_value: float
    alpha: float = KS_ALPHA

    def __post_init__(self):
        if (self.relation == EQUAL) != (self.d_statistic <= self.critical_value):
            raise ConfigError("relation inconsistent with D vs critical value")

    def symbol(self, csv: bool = False) -> str:
        return (_SYMBOL_CSV if csv else _SYMBOL_MD)[self.relation]


def ks_two_sample(a, b, alpha: float = KS_ALPHA) -> KsOutcome:
    """Two-sample KS with direction from the means.

    D is evaluated by a sorted merge over the pooled values, computing
    |i/n - j/m| after consuming every element equal to the current value,
    exactly the candidate set a brute-force pooled-CDF scan evaluates.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = a.size, b.size
    if n < 2 or m < 2:
        raise ConfigError("KS test needs at least 2 observations per sample")
    if alpha != KS_ALPHA:
        raise ConfigError("only the 5% significance level is tabulated")
    sa = np.sort(a, kind="stable")
    sb = np.sort(b, kind="stable")
    i = j = 0
    d = 0.0
    while i < n or j < m:
        if j >= m or (i < n and sa[i] <= sb[j]):
            v = sa[i]
        else:
            v = sb[j]
        while i < n and sa[i] == v:
            i += 1
        while j < m and sb[j] == v:
            j += 1
        gap = abs(i / n - j / m)
        if gap > d:
            d = gap
    critical = KS_COEFF_5PCT * np.sqrt((n + m) / (n * m))
    if d <= critical:
        relation = EQUAL
    else:
        mean_a = float(np.mean(a))
        mean_b = float(np.mean(b))
        if abs(mean_a - mean_b) <= _MEAN_TIE_EPS:
            relation = EQUAL
            d = min(d, critical)  # unreachable in practice; keep invariant
        elif mean_a > mean_b:
            relation = DOMINATES
        else:
            relation = DOMINATED
    return KsOutcome(relation, d, float(critical), alpha)


@dataclass
class KsMatrix:
    classifier_ids: list
    outcomes: dict  # (i, j) -> KsOutcome for every ordered pair, i != j

    def outcome(self, i: int, j: int) -> KsOutcome:
        return self.outcomes[(i, j)]

    def symbol(self, i: int, j: int, csv: bool = False) -> str:
        if i == j:
            return "="
        return self.outcomes[(i, j)].symbol(csv)

    def to_json(self) -> dict:
        return {
            "classifier_ids": list(self.classifier_ids),
            "cells": [
                {
                    "row": self.classifier_ids[i],
                    "col": self.classifier_ids[j],
                    "relation": o.relation,
                    "d": o.d_statistic,
                    "critical": o.critical_value,
                }
                for (i, j), o in sorted(self.outcomes.items())
            ],
        }


def build_ks_matrix(samples: list) -> KsMatrix:
    """All ordered pairs on test-accuracy samples (both directions are
    computed independently so antisymmetry is a checkable property)."""
    ids = [s.classifier_id for s in samples]
    outcomes = {}
    for i, si in enumerate(samples):
        for j, sj in enumerate(samples):
            if i == j:
                continue
            outcomes[(i, j)] = ks_two_sample(si.test_accuracies, sj.test_accuracies)
    return KsMatrix(ids, outcomes)


@dataclass
class RankTable:
    rows: list  # dicts: rank, category, classifier_id, train_mean, test_mean


def build_rank_table(samples: list) -> RankTable:
    """Descending mean test accuracy; ties by higher train mean, then name."""
    order = sorted(
        samples,
        key=lambda s: (-s.test_mean, -s.train_mean, s.classifier_id),
    )
    rows = [
        {
            "rank": i + 1,
            "category": s.category,
            "classifier_id": s.classifier_id,
            "train_mean": s.train_mean,
            "test_mean": s.test_mean,
        }
        for i, s in enumerate(order)
    ]
    return RankTable(rows)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def render_accuracy_table_md(samples: list) -> str:
    lines = [
        "| Category | Classifier | Train acc | Train std | Test acc | Test std |",
        "|---|---|---|---|---|---|",
    ]
    by_cat: dict = {}
    for s in samples:
        by_cat.setdefault(s.category, []).append(s)
    for cat in sorted(by_cat, key=_category_order):
        for s in sorted(by_cat[cat], key=lambda t: -t.test_mean):
            lines.append(
                f"| {cat} | {s.classifier_id} | {s.train_mean:.4f} | "
                f"{s.train_std:.4f} | {s.test_mean:.4f} | {s.test_std:.4f} |"
            )
    return "\n".join(lines) + "\n"


def render_accuracy_table_csv(samples: list) -> str:
    lines = ["category,classifier,train_mean,train_std,test_mean,test_std"]
    by_cat: dict = {}
    for s in samples:
        by_cat.setdefault(s.category, []).append(s)
    for cat in sorted(by_cat, key=_category_order):
        for s in sorted(by_cat[cat], key=lambda t: -t.test_mean):
            lines.append(
                f"{cat},{s.classifier_id},{s.train_mean:.6f},{s.train_std:.6f},"
                f"{s.test_mean:.6f},{s.test_std:.6f}"
            )
    return "\n".join(lines) + "\n"


def _category_order(cat: str):
    known = {"F1": 0, "F2": 1, "F3": 2, "F4": 3, "E1": 4, "E2": 5}
    return (known.get(cat, 99), cat)


def render_rank_table_md(table: RankTable) -> str:
    lines = [
        "| Rank | Category | Classifier | Training (%) | Test (%) |",
        "|---|---|---|---|---|",
    ]
    for r in table.rows:
        lines.append(
            f"| {r['rank']} | {r['category']} | {r['classifier_id']} | "
            f"{100 * r['train_mean']:.4f} | {100 * r['test_mean']:.4f} |"
        )
    return "\n".join(lines) + "\n"


def render_rank_table_csv(table: RankTable) -> str:
    lines = ["rank,category,classifier,train_pct,test_pct"]
    for r in table.rows:
        lines.append(
            f"{r['rank']},{r['category']},{r['classifier_id']},"
            f"{100 * r['train_mean']:.4f},{100 * r['test_mean']:.4f}"
        )
    return "\n".join(lines) + "\n"


def render_ks_matrix_md(matrix: KsMatrix) -> str:
    ids = matrix.classifier_ids
    header = "| Classifier | " + " | ".join(ids) + " |"
    sep = "|---" * (len(ids) + 1) + "|"
    lines = [header, sep]
    for i, row_id in enumerate(ids):
        cells = [matrix.symbol(i, j) for j in range(len(ids))]
        lines.append(f"| {row_id} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_ks_matrix_csv(matrix: KsMatrix) -> str:
    ids = matrix.classifier_ids
    lines = ["classifier," + ",".join(ids)]
    for i, row_id in enumerate(ids):
        cells = [matrix.symbol(i, j, csv=True) for j in range(len(ids))]
        lines.append(row_id + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def eval_samples_to_json(samples: list) -> str:
    return json.dumps([s.to_json() for s in samples], sort_keys=True, indent=1)


def eval_samples_from_json(text: str) -> list:
    return [EvalSample.from_json(o) for o in json.loads(text)]
