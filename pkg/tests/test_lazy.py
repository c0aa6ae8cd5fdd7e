"""IBK, K*, LWL against hand computations and direct-summation oracles."""

import numpy as np
import pytest

from sewerbench.classifiers import ClassifierSpec, fit
from sewerbench.dataset import Dataset
from sewerbench.errors import ConfigError


def _ds(x, y):
    x = np.atleast_2d(np.asarray(x, float))
    names = tuple(f"f{i}" for i in range(x.shape[1]))
    return Dataset(names, x, np.asarray(y))


# --- IBK ---------------------------------------------------------------------


def test_ibk_memorizes_training_points():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 3))
    y = rng.integers(0, 2, size=30)
    model = fit(ClassifierSpec("IBK"), _ds(x, y))
    assert np.all(model.predict_batch(x) == y)


def test_ibk_tie_breaks_to_earliest_index():
    # query scaled midway between the first two points; the third is farther
    x = np.array([[0.0], [1.0], [2.0]])
    y = np.array([1, 0, 1])
    model = fit(ClassifierSpec("IBK"), _ds(x, y))
    assert model.predict(np.array([0.5])) == 1  # tie with index 0 wins


def test_ibk_rejects_k_other_than_one():
    with pytest.raises(ConfigError):
        fit(ClassifierSpec("IBK", {"k": 3}), _ds(np.zeros((5, 1)), np.zeros(5, int)))


def test_ibk_distribution_is_one_hot():
    x = np.array([[0.0], [10.0]])
    model = fit(ClassifierSpec("IBK"), _ds(x, np.array([0, 1])))
    d = model.predict_dist(np.array([1.0]))
    assert (d.p_safe, d.p_unsafe) == (1.0, 0.0)


# --- K* ----------------------------------------------------------------------


def _kstar_oracle(model, queries):
    """Direct per-instance, per-attribute product summation."""
    xs = model.payload["x"]
    y = model.payload["y"]
    inv = model.payload["inv_scale"]
    q = model.scaler.transform(np.atleast_2d(queries))
    out = []
    for row in q:
        s = [0.0, 0.0]
        for i in range(xs.shape[0]):
            p = 1.0
            for a in range(xs.shape[1]):
                p *= np.exp(-abs(row[a] - xs[i, a]) * inv[a])
            s[y[i]] += p
        tot = s[0] + s[1]
        out.append([s[0] / tot, s[1] / tot])
    return np.array(out)


def test_kstar_matches_direct_summation_oracle():
    rng = np.random.default_rng(42)
    for _ in range(25):
        x = np.sort(rng.uniform(0, 10, size=5)).reshape(-1, 1)
        y = rng.integers(0, 2, size=5)
        model = fit(ClassifierSpec("KSTAR"), _ds(x, y))
        queries = rng.uniform(-1, 11, size=(8, 1))
        got = model.predict_dist_batch(queries)
        want = _kstar_oracle(model, queries)
        assert np.max(np.abs(got - want)) <= 1e-9


def test_kstar_equidistant_neighbors_split_evenly():
    x = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    model = fit(ClassifierSpec("KSTAR"), _ds(x, y))
    d = model.predict_dist(np.array([0.5]))
    assert d.p_safe == pytest.approx(0.5, abs=1e-9)


def test_kstar_small_blend_concentrates_on_exact_match():
    x = np.linspace(0, 1, 9).reshape(-1, 1)
    y = np.array([1, 0, 0, 0, 0, 0, 0, 0, 0])
    model = fit(ClassifierSpec("KSTAR", {"blend": 0.01}), _ds(x, y))
    d = model.predict_dist(x[0])
    assert d.p_unsafe > 0.99


def test_kstar_skips_constant_attribute():
    x = np.column_stack([np.linspace(0, 1, 10), np.full(10, 3.0)])
    y = (np.linspace(0, 1, 10) > 0.5).astype(int)
    model = fit(ClassifierSpec("KSTAR"), _ds(x, y))
    assert model.payload["inv_scale"][1] == 0.0
    assert np.mean(model.predict_batch(x) == y) == 1.0


def test_kstar_blend_validation():
    with pytest.raises(ConfigError):
        fit(ClassifierSpec("KSTAR", {"blend": 0.0}),
            _ds(np.zeros((5, 1)), np.zeros(5, int)))


# --- LWL ---------------------------------------------------------------------


def test_lwl_hand_four_point_case():
    # scaled x = [0, 1/3, 2/3, 1]; query at 0: weights (1, 2/3, 1/3, 0),
    # best weighted stump splits at 1/2 with zero weighted error
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(ClassifierSpec("LWL"), _ds(x, y))
    d0 = model.predict_dist(np.array([0.0]))
    assert (d0.p_safe, d0.p_unsafe) == (1.0, 0.0)
    d3 = model.predict_dist(np.array([3.0]))
    assert (d3.p_safe, d3.p_unsafe) == (0.0, 1.0)
    assert model.predict(np.array([0.0])) == 0
    assert model.predict(np.array([3.0])) == 1


def test_lwl_single_training_point():
    model = fit(ClassifierSpec("LWL"), _ds(np.array([[1.0, 2.0]]), np.array([1])))
    assert model.predict(np.array([50.0, -3.0])) == 1


def test_lwl_identical_training_points_plain_majority():
    x = np.zeros((5, 2))
    y = np.array([0, 0, 0, 1, 1])
    model = fit(ClassifierSpec("LWL"), _ds(x, y))
    d = model.predict_dist(np.zeros(2))
    assert d.p_safe == pytest.approx(0.6)
    assert model.predict(np.zeros(2)) == 0


def test_lwl_weighted_stump_beats_global_on_local_structure():
    # two regions with opposite thresholds; a global stump cannot get both
    x = np.concatenate([np.linspace(0, 1, 20), np.linspace(10, 11, 20)]).reshape(-1, 1)
    y = np.concatenate([(x[:20, 0] > 0.5), (x[20:, 0] < 10.5)]).astype(int)
    model = fit(ClassifierSpec("LWL"), _ds(x, y))
    acc = np.mean(model.predict_batch(x) == y)
    assert acc >= 0.9
