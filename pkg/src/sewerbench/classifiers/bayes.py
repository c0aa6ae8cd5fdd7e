"""Gaussian naive Bayes with Laplace-smoothed priors."""

from __future__ import annotations

import numpy as np

from sewerbench.classifiers.base import AlgoDef

_VAR_FLOOR = 1e-6


def nb_train(x: np.ndarray, y: np.ndarray) -> dict:
    """Per-class feature means/variances; a class absent from y falls back
    to the global moments so the smoothed prior decides alone."""
    n, d = x.shape
    g_mean = x.mean(axis=0)
    g_var = np.maximum(x.var(axis=0), _VAR_FLOOR)
    priors = np.empty(2)
    means = np.empty((2, d))
    variances = np.empty((2, d))
    for cls in (0, 1):
        mask = y == cls
        n_c = int(np.sum(mask))
        priors[cls] = (n_c + 1.0) / (n + 2.0)
        if n_c == 0:
            means[cls] = g_mean
            variances[cls] = g_var
        else:
            means[cls] = x[mask].mean(axis=0)
            variances[cls] = np.maximum(x[mask].var(axis=0), _VAR_FLOOR)
    return {"priors": priors, "means": means, "vars": variances}


def nb_posterior(payload: dict, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    log_post = np.empty((x.shape[0], 2))
    for cls in (0, 1):
        var = payload["vars"][cls]
        diff = x - payload["means"][cls]
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * var) + diff * diff / var, axis=1)
        log_post[:, cls] = np.log(payload["priors"][cls]) + ll
    log_post -= log_post.max(axis=1, keepdims=True)
    p = np.exp(log_post)
    return p / p.sum(axis=1, keepdims=True)


def _fit(params, train, stream):
    return nb_train(train.x, train.y), None


def _predict(payload, scaler, x):
    return nb_posterior(payload, x)


def encode_nb(payload):
    return {
        "priors": payload["priors"].tolist(),
        "means": payload["means"].tolist(),
        "vars": payload["vars"].tolist(),
    }


def decode_nb(obj):
    return {
        "priors": np.array(obj["priors"], float),
        "means": np.array(obj["means"], float),
        "vars": np.array(obj["vars"], float),
    }


ALGOS = {
    "NAIVE_BAYES": AlgoDef(
        fit=_fit,
        predict_dist=_predict,
        encode=encode_nb,
        decode=decode_nb,
        defaults={},
    )
}
