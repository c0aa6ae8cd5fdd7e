"""Shared pieces for the classifier implementations.

Each algorithm module exposes an ALGOS table mapping the algorithm name to
an AlgoDef; the package root assembles the dispatch registry from those.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class AlgoDef:
    fit: Callable  # (params: dict, train: Dataset, stream: RngStream) -> (payload, scaler|None)
    predict_dist: Callable  # (payload, scaler, X (n,d)) -> (n, 2) float
    encode: Callable  # payload -> JSON-ready dict
    decode: Callable  # dict -> payload
    defaults: dict


def one_hot_dist(labels: np.ndarray) -> np.ndarray:
    out = np.zeros((labels.shape[0], 2))
    out[np.arange(labels.shape[0]), labels.astype(int)] = 1.0
    return out


def counts_to_dist(c0, c1) -> np.ndarray:
    tot = c0 + c1
    if tot <= 0:
        return np.array([0.5, 0.5])
    return np.array([c0 / tot, c1 / tot])


def majority_label(c0, c1) -> int:
    """Ties break toward label 0 (global rule)."""
    return 1 if c1 > c0 else 0
