"""Sewer-gas hazard classification benchmark toolkit.

Synthesizes a five-gas sensor-array dataset with cross-sensitivity and
climate effects, trains 12 base classifiers and 9 ensemble methods from
scratch, and compares them with repeated stratified 10-fold cross-validation
plus pairwise two-sample Kolmogorov-Smirnov dominance analysis.
"""

import os

# the workqueue layer tolerates the process pools the bench runs under
# (GNU OpenMP aborts when a threaded parent forks); must be set before
# numba initializes
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"

from sewerbench.errors import (
    SewerbenchError,
    ConfigError,
    DataFormatError,
    FitError,
)

__all__ = [
    "SewerbenchError",
    "ConfigError",
    "DataFormatError",
    "FitError",
    "__version__",
]
