"""CSV round trips, fold plans, scaler, majority rule."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sewerbench.dataset import (
    CSV_HEADER,
    Dataset,
    FEATURE_NAMES,
    fit_scaler,
    majority_class,
    make_folds,
    read_csv,
    write_csv,
)
from sewerbench.errors import ConfigError, DataFormatError
from sewerbench.gasdata import fast_config, synthesize_dataset


def _toy_dataset(n=20, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 7))
    y = rng.integers(0, 2, size=n)
    return Dataset(FEATURE_NAMES, x, y)


def test_csv_three_rows_by_hand(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(
        CSV_HEADER + "\n"
        "65.0,20.0,0.8,6.9,5.9,3.4,3.9,0\n"
        "65.0,20.0,1.3,7.5,5.5,3.5,2.1,0\n"
        "75.0,50.0,4.9,2.4,0.3,0.9,0.4,1\n"
    )
    ds = read_csv(p)
    assert len(ds) == 3
    assert ds.y.tolist() == [0, 0, 1]
    assert ds.x[2, 0] == 75.0


def test_csv_round_trip_exact(tmp_path):
    ds = synthesize_dataset(fast_config())
    p = tmp_path / "synth.csv"
    write_csv(ds, p)
    back = read_csv(p)
    assert np.array_equal(ds.x, back.x)
    assert np.array_equal(ds.y, back.y)


def test_csv_bad_class_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(CSV_HEADER + "\n" + "65,20,1,1,1,1,1,2\n")
    with pytest.raises(DataFormatError) as exc:
        read_csv(p)
    assert exc.value.line == 2


def test_csv_wrong_arity_and_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(CSV_HEADER + "\n" + "65,20,1,1,1,1,0\n")
    with pytest.raises(DataFormatError) as exc:
        read_csv(p)
    assert exc.value.line == 2
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(DataFormatError) as exc:
        read_csv(p)
    assert exc.value.line == 1


def test_folds_singleton_when_k_equals_n():
    y = np.array([0, 1] * 5)
    plan = make_folds(y, k=10, seed=1, stratified=False)
    sizes = [len(plan.test_indices(f)) for f in range(10)]
    assert sizes == [1] * 10


def test_folds_deterministic_and_partition():
    ds = synthesize_dataset(fast_config())
    a = make_folds(ds, 10, seed=42)
    b = make_folds(ds, 10, seed=42)
    assert np.array_equal(a.assignments, b.assignments)
    # partition: each instance in exactly one test fold
    seen = np.zeros(len(ds), int)
    for f in range(10):
        seen[a.test_indices(f)] += 1
    assert np.all(seen == 1)


def test_folds_stratified_fraction_within_one_instance():
    ds = synthesize_dataset(fast_config())
    plan = make_folds(ds, 10, seed=7, stratified=True)
    target = 781.0 / 1024.0
    for f in range(10):
        test = plan.test_indices(f)
        frac = float(np.mean(ds.y[test] == 1))
        assert abs(frac - target) <= 1.0 / len(test)


def test_folds_sizes_within_one():
    y = np.array([0] * 23 + [1] * 44)
    plan = make_folds(y, 10, seed=3)
    sizes = sorted(len(plan.test_indices(f)) for f in range(10))
    assert sizes[-1] - sizes[0] <= 1
    for cls in (0, 1):
        counts = sorted(
            int(np.sum(y[plan.test_indices(f)] == cls)) for f in range(10)
        )
        assert counts[-1] - counts[0] <= 1


def test_folds_errors():
    with pytest.raises(ConfigError):
        make_folds(np.array([0, 1, 0]), k=5, seed=0)
    with pytest.raises(ConfigError):
        make_folds(np.array([0, 1] * 3), k=1, seed=0)
    with pytest.raises(ConfigError):
        make_folds(np.array([0] * 30 + [1] * 2), k=5, seed=0, stratified=True)


def test_scaler_midpoint_and_constant_column():
    x = np.array([[20.0, 5.0], [50.0, 5.0]])
    sc = fit_scaler(x)
    out = sc.transform(np.array([[35.0, 5.0]]))
    assert out[0, 0] == pytest.approx(0.5)
    assert out[0, 1] == pytest.approx(0.5)  # constant column -> 0.5


def test_scaler_no_clamping_outside_train_range():
    sc = fit_scaler(np.array([[0.0], [10.0]]))
    assert sc.transform(np.array([[20.0]]))[0, 0] == pytest.approx(2.0)
    assert sc.transform(np.array([[-5.0]]))[0, 0] == pytest.approx(-0.5)


def test_scaler_ignores_test_instances():
    train = np.array([[1.0], [3.0]])
    sc1 = fit_scaler(train)
    sc2 = fit_scaler(train)
    # feeding different "test" data can't change parameters (pure function)
    sc1.transform(np.array([[100.0]]))
    assert np.array_equal(sc1.mins, sc2.mins)
    assert np.array_equal(sc1.ranges, sc2.ranges)


def test_scaler_empty_slice_rejected():
    with pytest.raises(ConfigError):
        fit_scaler(np.empty((0, 3)))


@settings(max_examples=50, deadline=None)
@given(
    vals=st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40),
    probe=st.floats(-1e6, 1e6),
)
def test_scaler_affine_property(vals, probe):
    col = np.array(vals).reshape(-1, 1)
    sc = fit_scaler(col)
    out = float(sc.transform(np.array([[probe]]))[0, 0])
    lo, hi = col.min(), col.max()
    if hi > lo:
        assert out == pytest.approx((probe - lo) / (hi - lo), rel=1e-9, abs=1e-12)
    else:
        assert out == 0.5


def test_majority_class():
    assert majority_class(np.array([0] * 7 + [1] * 3)) == (0, 0.7)
    assert majority_class(np.array([0] * 5 + [1] * 5)) == (0, 0.5)
    num = majority_class(synthesize_dataset(fast_config()))
    assert num[0] == 1
    assert num[1] == pytest.approx(781.0 / 1024.0)
    with pytest.raises(ConfigError):
        majority_class(np.array([]))
