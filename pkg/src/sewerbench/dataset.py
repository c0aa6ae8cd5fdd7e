"""Dataset container, CSV I/O, min-max scaling, and repeated stratified
k-fold splitting.

The CSV contract is fixed: header `humidity,temperature,in_no2,in_co,
in_h2s,in_nh3,in_ch4,class`, one row per instance, class in {0, 1}. Floats
are written with repr so a read-back is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sewerbench.errors import ConfigError, DataFormatError
from sewerbench.rng import derive_stream

FEATURE_NAMES = ("humidity", "temperature", "in_no2", "in_co", "in_h2s", "in_nh3", "in_ch4")
CSV_HEADER = ",".join(FEATURE_NAMES) + ",class"

_FOLD_TAG = 3


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    label: int


@dataclass
class Dataset:
    """Feature matrix (n, d) plus binary labels, column names fixed."""

    feature_names: tuple
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int8)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ConfigError("feature matrix and labels disagree")
        if self.x.shape[1] != len(self.feature_names):
            raise ConfigError("feature count does not match names")
        if self.y.size and not np.all((self.y == 0) | (self.y == 1)):
            raise ConfigError("labels must be binary")

    def __len__(self):
        return self.x.shape[0]

    def instance(self, i: int) -> Instance:
        return Instance(self.x[i].copy(), int(self.y[i]))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.feature_names, self.x[idx], self.y[idx])


def write_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for i in range(len(dataset)):
            row = ",".join(repr(float(v)) for v in dataset.x[i])
            fh.write(f"{row},{int(dataset.y[i])}\n")


def read_csv(path) -> Dataset:
    """Parse the 8-column contract; errors name the offending line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        return Dataset(FEATURE_NAMES, np.empty((0, 7)), np.empty(0, np.int8))
    if lines[0].strip() != CSV_HEADER:
        raise DataFormatError(f"bad header; expected {CSV_HEADER!r}", line=1)
    xs = []
    ys = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 8:
            raise DataFormatError(f"expected 8 columns, got {len(parts)}", line=lineno)
        try:
            feats = [float(p) for p in parts[:7]]
        except ValueError as exc:
            raise DataFormatError(f"bad numeric value ({exc})", line=lineno) from None
        cls = parts[7].strip()
        if cls not in ("0", "1"):
            raise DataFormatError(f"class must be 0 or 1, got {cls!r}", line=lineno)
        xs.append(feats)
        ys.append(int(cls))
    if not xs:
        return Dataset(FEATURE_NAMES, np.empty((0, 7)), np.empty(0, np.int8))
    return Dataset(FEATURE_NAMES, np.array(xs), np.array(ys, np.int8))


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray  # fold index per instance
    seed: int
    stratified: bool

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "stratified": self.stratified,
            "assignments": self.assignments.tolist(),
        }


def make_folds(dataset_or_labels, k: int, seed: int, stratified: bool = True) -> FoldPlan:
    """Deterministic fold assignment; sizes differ by at most one.

    Stratified mode shuffles each class separately and deals the classes
    consecutively round-robin, so per-class fold counts also differ by at
    most one.
    """
    if isinstance(dataset_or_labels, Dataset):
        y = dataset_or_labels.y
    else:
        y = np.asarray(dataset_or_labels)
    n = y.shape[0]
    if k < 2:
        raise ConfigError("k must be at least 2")
    if k > n:
        raise ConfigError(f"k={k} exceeds dataset size {n}")
    rng = derive_stream(seed, (_FOLD_TAG,))
    assignments = np.empty(n, np.int64)
    if stratified:
        position = 0
        for cls in (0, 1):
            members = np.flatnonzero(y == cls)
            if members.size == 0:
                continue
            if members.size < k:
                raise ConfigError(
                    f"class {cls} has {members.size} members, fewer than k={k}"
                )
            members = members.tolist()
            rng.shuffle(members)
            for idx in members:
                assignments[idx] = position % k
                position += 1
    else:
        order = list(range(n))
        rng.shuffle(order)
        for position, idx in enumerate(order):
            assignments[idx] = position % k
    return FoldPlan(k=k, assignments=assignments, seed=seed, stratified=stratified)


@dataclass
class Scaler:
    """Per-feature min-max map to [0, 1], fit on training data only.

    Values outside the training range map outside [0, 1] (no clamping);
    a constant training column maps everything to 0.5.
    """

    mins: np.ndarray
    ranges: np.ndarray  # 0 marks a degenerate (constant) column

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for j in range(x.shape[1]):
            if self.ranges[j] > 0:
                out[:, j] = (x[:, j] - self.mins[j]) / self.ranges[j]
            else:
                out[:, j] = 0.5
        return out

    def to_json(self) -> dict:
        return {"mins": self.mins.tolist(), "ranges": self.ranges.tolist()}

    @staticmethod
    def from_json(obj) -> "Scaler":
        return Scaler(np.array(obj["mins"], float), np.array(obj["ranges"], float))


def fit_scaler(x: np.ndarray) -> Scaler:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 0:
        raise ConfigError("cannot fit a scaler on an empty slice")
    mins = x.min(axis=0)
    ranges = x.max(axis=0) - mins
    return Scaler(mins=mins, ranges=ranges)


def apply_scaler(scaler: Scaler, x: np.ndarray) -> np.ndarray:
    return scaler.transform(x)


def majority_class(labels) -> tuple:
    """(label, fraction); ties break toward label 0."""
    if isinstance(labels, Dataset):
        labels = labels.y
    y = np.asarray(labels)
    if y.size == 0:
        raise ConfigError("majority_class needs a non-empty sample")
    c1 = int(np.sum(y == 1))
    c0 = y.size - c1
    if c1 > c0:
        return 1, c1 / y.size
    return 0, c0 / y.size
