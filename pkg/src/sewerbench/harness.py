"""Benchmark orchestration: dataset acquisition, the 21-classifier roster,
parallel repeated-CV execution, result tables, model export, and the
detection pipeline (sensor row in, safe/unsafe status out).

Cells (repeat, fold) are independent jobs; within a cell the 12 base
models are fitted once and shared with the ensembles that combine them
(vote members and the multi-scheme winner refit are exact cache hits
because model identity is (spec, seed path, data)). Reduction happens in
(repeat, fold) order, so artifacts are byte-identical for any job count.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sewerbench import __version__
from sewerbench.classifiers import (
    ClassifierSpec,
    FitContext,
    Model,
    dump_model,
    model_from_envelope,
)
from sewerbench.dataset import (
    CSV_HEADER,
    Dataset,
    FEATURE_NAMES,
    make_folds,
    read_csv,
    write_csv,
)
from sewerbench.ensembles import (
    EnsembleModel,
    EnsembleSpec,
    dump_ensemble,
    ensemble_from_envelope,
    fit_any,
)
from sewerbench.errors import ConfigError, DataFormatError, FitError
from sewerbench.gasdata import (
    GasSpec,
    SensorSpec,
    SynthConfig,
    default_config,
    fast_config,
    synthesize_dataset,
)
from sewerbench.stats import (
    EvalSample,
    accuracy,
    build_ks_matrix,
    build_rank_table,
    eval_samples_from_json,
    eval_samples_to_json,
    fold_seed,
    ks_two_sample,
    render_accuracy_table_csv,
    render_accuracy_table_md,
    render_ks_matrix_csv,
    render_ks_matrix_md,
    render_rank_table_csv,
    render_rank_table_md,
)

# ---------------------------------------------------------------------------
# roster
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RosterEntry:
    classifier_id: str
    category: str
    spec: object  # ClassifierSpec | EnsembleSpec


def _base_specs() -> dict:
    """The 12 base classifiers with their benchmark hyperparameters."""
    return {
        "MLP": ClassifierSpec("MLP", {}, (1,)),
        "RBF": ClassifierSpec("RBF", {}, (2,)),
        "SVM": ClassifierSpec("SVM", {}, (3,)),
        "LMT": ClassifierSpec("LMT", {}, (4,)),
        "REPTree": ClassifierSpec("REP_TREE", {}, (5,)),
        "NBTree": ClassifierSpec("NB_TREE", {}, (6,)),
        "IBK": ClassifierSpec("IBK", {}, (7,)),
        "KStar": ClassifierSpec("KSTAR", {}, (8,)),
        "LWL": ClassifierSpec("LWL", {}, (9,)),
        "PART": ClassifierSpec("PART", {}, (10,)),
        "DT": ClassifierSpec("DT", {}, (11,)),
        "ZeroR": ClassifierSpec("ZERO_R", {}, (12,)),
    }


def default_roster() -> list:
    """12 base classifiers (F1-F4) plus 9 ensembles (E1, E2).

    E2 ensembles combine exactly the 12 base specs, so inside one bench
    cell their members coincide with the already-fitted base models.
    """
    base = _base_specs()
    members = tuple(base.values())
    entries = [
        RosterEntry("SVM", "F1", base["SVM"]),
        RosterEntry("MLP", "F1", base["MLP"]),
        RosterEntry("RBF", "F1", base["RBF"]),
        RosterEntry("LMT", "F2", base["LMT"]),
        RosterEntry("REPTree", "F2", base["REPTree"]),
        RosterEntry("NBTree", "F2", base["NBTree"]),
        RosterEntry("IBK", "F3", base["IBK"]),
        RosterEntry("KStar", "F3", base["KStar"]),
        RosterEntry("LWL", "F3", base["LWL"]),
        RosterEntry("PART", "F4", base["PART"]),
        RosterEntry("DT", "F4", base["DT"]),
        RosterEntry("ZeroR", "F4", base["ZeroR"]),
        RosterEntry("Bagging", "E1", EnsembleSpec("BAGGING", 10, seed_path=(21,))),
        RosterEntry("AdaBoost", "E1", EnsembleSpec("ADABOOST_M1", 10, seed_path=(22,))),
        RosterEntry("RandomSUB", "E1", EnsembleSpec("RANDOM_SUBSPACE", 10, seed_path=(23,))),
        RosterEntry("RandomCOM", "E1", EnsembleSpec("RANDOM_COMMITTEE", 10, seed_path=(24,))),
        RosterEntry("RotationFRST", "E1", EnsembleSpec("ROTATION_FOREST", 10, seed_path=(25,))),
        RosterEntry("EnsembleSEL", "E1", EnsembleSpec("ENSEMBLE_SELECTION", 10, seed_path=(26,))),
        RosterEntry("Vote", "E2", EnsembleSpec("VOTE", 12, members=members, seed_path=(27,))),
        RosterEntry("Multi", "E2", EnsembleSpec("MULTI_SCHEME", 12, members=members, seed_path=(28,))),
        RosterEntry("WPE", "E2", EnsembleSpec("WPE", 12, members=members, seed_path=(29,))),
    ]
    return entries


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class BenchConfig:
    synth: SynthConfig | None = None  # used when dataset_path is None
    dataset_path: str | None = None
    roster_ids: tuple = ()  # empty = full default roster
    k: int = 10
    repeats: int = 10
    root_seed: int = 42
    jobs: int | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        known = {e.classifier_id for e in default_roster()}
        unknown = set(self.roster_ids) - known
        if unknown:
            raise ConfigError(f"unknown roster ids {sorted(unknown)}")

    def roster(self) -> list:
        entries = default_roster()
        if self.roster_ids:
            entries = [e for e in entries if e.classifier_id in self.roster_ids]
        if not entries:
            raise ConfigError("empty roster")
        return entries

    def resolve_jobs(self) -> int:
        env = os.environ.get("SEWERBENCH_JOBS")
        if env:
            return max(1, int(env))
        if self.jobs:
            return max(1, int(self.jobs))
        return max(1, os.cpu_count() or 1)

    def load_dataset(self) -> Dataset:
        if self.dataset_path is not None:
            return read_csv(self.dataset_path)
        return synthesize_dataset(self.synth or default_config())

    def canonical(self) -> dict:
        return {
            "synth": synth_config_to_json(self.synth) if self.synth else None,
            "dataset_path": self.dataset_path,
            "roster_ids": list(self.roster_ids),
            "k": self.k,
            "repeats": self.repeats,
            "root_seed": self.root_seed,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def synth_config_to_json(cfg: SynthConfig) -> dict:
    return {
        "seed": cfg.seed,
        "label_noise_rate": cfg.label_noise_rate,
        "levels_above_limit": cfg.levels_above_limit,
        "humidity_grid": list(cfg.humidity_grid),
        "temperature_grid": list(cfg.temperature_grid),
        "gases": [
            {"name": g.name, "levels": list(g.levels),
             "safety_upper": g.safety_upper, "safety_lower": g.safety_lower}
            for g in cfg.gas_specs
        ],
        "sensors": [
            {"target_gas": s.target_gas, "r0": s.r0,
             "range_min": s.range_min, "range_max": s.range_max,
             "gain": s.gain, "cross_gain": dict(s.cross_gain),
             "humidity_coeff": s.humidity_coeff,
             "temperature_coeff": s.temperature_coeff,
             "noise_sigma": s.noise_sigma}
            for s in cfg.sensor_specs
        ],
    }


def synth_config_from_json(obj: dict) -> SynthConfig:
    """Partial configs inherit the defaults (gases, sensors, grids)."""
    base = default_config(
        seed=obj.get("seed", 42),
        humidity_grid=obj.get("humidity_grid", (60.0, 65.0, 70.0, 75.0)),
        temperature_grid=obj.get("temperature_grid", (20.0, 30.0, 40.0, 50.0)),
        label_noise_rate=obj.get("label_noise_rate", 0.0),
    )
    gases = base.gas_specs
    sensors = base.sensor_specs
    if "gases" in obj:
        gases = tuple(
            GasSpec(g["name"], tuple(g["levels"]), g["safety_upper"], g["safety_lower"])
            for g in obj["gases"]
        )
    if "sensors" in obj:
        sensors = tuple(
            SensorSpec(
                s["target_gas"], s["r0"], s["range_min"], s["range_max"], s["gain"],
                dict(s["cross_gain"]), s["humidity_coeff"], s["temperature_coeff"],
                s["noise_sigma"],
            )
            for s in obj["sensors"]
        )
    return SynthConfig(
        gases, sensors, base.humidity_grid, base.temperature_grid,
        seed=base.seed, label_noise_rate=base.label_noise_rate,
        levels_above_limit=obj.get("levels_above_limit", 1),
    )


def bench_config_from_json(obj: dict) -> BenchConfig:
    synth = None
    dataset_path = None
    ds = obj.get("dataset")
    if isinstance(ds, str):
        dataset_path = ds
    elif isinstance(ds, dict):
        synth = synth_config_from_json(ds.get("synth", ds))
    return BenchConfig(
        synth=synth,
        dataset_path=dataset_path,
        roster_ids=tuple(obj.get("roster_ids", ())),
        k=obj.get("k", 10),
        repeats=obj.get("repeats", 10),
        root_seed=obj.get("root_seed", 42),
        jobs=obj.get("jobs"),
    )


# ---------------------------------------------------------------------------
# bench execution
# ---------------------------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker(x, y, names, roster_ids, root_seed, k, numba_threads):
    import numba

    numba.set_num_threads(max(1, numba_threads))
    _WORKER_STATE["dataset"] = Dataset(names, x, y)
    _WORKER_STATE["roster"] = [
        e for e in default_roster() if e.classifier_id in roster_ids
    ]
    _WORKER_STATE["root_seed"] = root_seed
    _WORKER_STATE["k"] = k


def _run_cell_worker(cell):
    r, f = cell
    return run_bench_cell(
        _WORKER_STATE["dataset"],
        _WORKER_STATE["roster"],
        _WORKER_STATE["root_seed"],
        _WORKER_STATE["k"],
        r,
        f,
    )


def run_bench_cell(dataset, roster, root_seed, k, repeat, fold):
    """Fit and score every roster entry on one (repeat, fold) cell.

    Base models are fitted first into the cell cache; member-combining
    ensembles then reuse them. Returns {classifier_id: (train_acc,
    test_acc, wall_seconds)} or raises FitError naming the failing entry.
    """
    plan = make_folds(dataset.y, k, seed=fold_seed(root_seed, repeat))
    tr = plan.train_indices(fold)
    te = plan.test_indices(fold)
    train = dataset.subset(tr)
    # hoisted query arrays: member-combining ensembles re-predict the same
    # objects, so base-model distributions are memoized for the cell
    x_tr, y_tr = train.x, train.y
    x_te, y_te = dataset.x[te], dataset.y[te]
    ctx = FitContext(root_seed, (repeat, fold), cache={})
    results = {}
    for entry in roster:
        start = time.perf_counter()
        try:
            model = fit_any(entry.spec, train, ctx)
            if isinstance(model, Model):
                model.enable_dist_cache()
            tr_acc = accuracy(model.predict_batch(x_tr), y_tr)
            te_acc = accuracy(model.predict_batch(x_te), y_te)
        except Exception as exc:
            raise FitError(
                f"{entry.classifier_id}: repeat {repeat} fold {fold}: {exc}"
            ) from exc
        results[entry.classifier_id] = (tr_acc, te_acc, time.perf_counter() - start)
    return results


def run_bench(config: BenchConfig, dataset: Dataset | None = None, progress=None):
    """Full repeated-CV sweep over the roster.

    Returns (samples, wall_times, cell_failures). Deterministic reduction:
    cells are keyed by (repeat, fold) regardless of completion order.
    """
    if dataset is None:
        dataset = config.load_dataset()
    roster = config.roster()
    cells = [(r, f) for r in range(config.repeats) for f in range(config.k)]
    jobs = min(config.resolve_jobs(), len(cells))
    cell_results = {}
    failures = []
    if jobs <= 1:
        for cell in cells:
            try:
                cell_results[cell] = run_bench_cell(
                    dataset, roster, config.root_seed, config.k, *cell
                )
            except FitError as exc:
                failures.append(str(exc))
                break
            if progress:
                progress(len(cell_results), len(cells))
    else:
        roster_ids = [e.classifier_id for e in roster]
        numba_threads = max(1, (os.cpu_count() or 1) // jobs)
        # spawn: forking a process whose threading layer already started is
        # not safe; the numba on-disk cache keeps worker startup cheap
        with ProcessPoolExecutor(
            max_workers=jobs,
            mp_context=multiprocessing.get_context("spawn"),
            initializer=_init_worker,
            initargs=(dataset.x, dataset.y, dataset.feature_names,
                      roster_ids, config.root_seed, config.k, numba_threads),
        ) as pool:
            futures = {cell: pool.submit(_run_cell_worker, cell) for cell in cells}
            done = 0
            for cell in cells:
                try:
                    cell_results[cell] = futures[cell].result()
                except FitError as exc:
                    failures.append(str(exc))
                    break
                except Exception as exc:  # worker crash
                    failures.append(f"cell {cell}: {exc}")
                    break
                done += 1
                if progress:
                    progress(done, len(cells))
    samples = []
    wall_times = {}
    if not failures:
        for entry in roster:
            train_accs = []
            test_accs = []
            total = 0.0
            for cell in cells:
                tr_acc, te_acc, wall = cell_results[cell][entry.classifier_id]
                train_accs.append(tr_acc)
                test_accs.append(te_acc)
                total += wall
            samples.append(
                EvalSample(entry.classifier_id, entry.category, train_accs, test_accs)
            )
            wall_times[entry.classifier_id] = total
    return samples, wall_times, failures


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(config: SynthConfig, out_path) -> int:
    dataset = synthesize_dataset(config)
    write_csv(dataset, out_path)
    print(f"wrote {len(dataset)} instances to {out_path}")
    return 0


def cmd_bench(config: BenchConfig, out_dir, progress=None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    dataset = config.load_dataset()
    samples, wall_times, failures = run_bench(config, dataset, progress=progress)
    manifest = {
        "config": config.canonical(),
        "config_hash": config.config_hash(),
        "root_seed": config.root_seed,
        "jobs": config.resolve_jobs(),
        "dataset_rows": len(dataset),
        "unsafe_fraction": float(np.mean(dataset.y == 1)),
        "version": __version__,
        "wall_times_s": {k: round(v, 3) for k, v in wall_times.items()},
        "total_wall_s": round(time.perf_counter() - started, 3),
        "failures": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    if failures:
        print("bench failed:")
        for f in failures:
            print(f"  {f}")
        return 3
    (out / "eval.json").write_text(eval_samples_to_json(samples))
    (out / "table3.md").write_text(render_accuracy_table_md(samples))
    (out / "table3.csv").write_text(render_accuracy_table_csv(samples))
    rank = build_rank_table(samples)
    (out / "table4.md").write_text(render_rank_table_md(rank))
    (out / "table4.csv").write_text(render_rank_table_csv(rank))
    matrix = build_ks_matrix(samples)
    (out / "table5.md").write_text(render_ks_matrix_md(matrix))
    (out / "table5.csv").write_text(render_ks_matrix_csv(matrix))
    print(f"bench complete: {len(samples)} classifiers x "
          f"{config.repeats}x{config.k} cells -> {out}")
    return 0


def load_any_model(text: str):
    obj = json.loads(text)
    if obj.get("format") == "sewerbench-ensemble":
        return ensemble_from_envelope(obj)
    return model_from_envelope(obj)


def count_parameters(obj) -> int:
    """Numeric leaves in an envelope payload (the model's parameter count)."""
    if isinstance(obj, bool):
        return 0
    if isinstance(obj, (int, float)):
        return 1
    if isinstance(obj, dict):
        return sum(count_parameters(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return sum(count_parameters(v) for v in obj)
    return 0


def cmd_export(config: BenchConfig, classifier_id: str, out_path) -> int:
    roster = {e.classifier_id: e for e in default_roster()}
    if classifier_id not in roster:
        raise ConfigError(f"unknown classifier {classifier_id!r}")
    dataset = config.load_dataset()
    entry = roster[classifier_id]
    ctx = FitContext(config.root_seed, ())
    model = fit_any(entry.spec, dataset, ctx)
    if isinstance(model, EnsembleModel):
        text = dump_ensemble(model)
        payload = json.loads(text)["payload"]
    else:
        text = dump_model(model)
        payload = json.loads(text)["payload"]
    Path(out_path).write_text(text)
    n_params = count_parameters(payload)
    print(f"exported {classifier_id}: {n_params} parameters, "
          f"{len(text.encode())} bytes payload envelope -> {out_path}")
    return 0


@dataclass
class DetectRow:
    index: int
    status: str  # "safe" | "unsafe" | "error"
    message: str


@dataclass
class DetectReport:
    rows: list = field(default_factory=list)
    n_safe: int = 0
    n_unsafe: int = 0
    n_errors: int = 0
    accuracy: float | None = None

    def lines(self):
        out = [r.message for r in self.rows]
        summary = f"summary: safe={self.n_safe} unsafe={self.n_unsafe} errors={self.n_errors}"
        if self.accuracy is not None:
            summary += f" accuracy={self.accuracy:.4f}"
        out.append(summary)
        return out


_STATUS_TEXT = {
    0: "safe -> GREEN LIGHT",
    1: "unsafe -> RED LIGHT + BUZZER",
}

_HEADER_NO_CLASS = ",".join(FEATURE_NAMES)


def run_detect(model, lines) -> DetectReport:
    """Classify feature rows in arrival order; malformed rows report an
    error and processing continues."""
    report = DetectReport()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        return report
    header = lines[0].strip()
    if header == CSV_HEADER:
        has_class = True
    elif header == _HEADER_NO_CLASS:
        has_class = False
    else:
        raise DataFormatError(
            f"bad header; expected {CSV_HEADER!r} or {_HEADER_NO_CLASS!r}", line=1
        )
    expected = 8 if has_class else 7
    hits = 0
    labeled = 0
    for i, raw in enumerate(lines[1:], start=1):
        parts = raw.split(",")
        if len(parts) != expected:
            report.rows.append(DetectRow(
                i, "error",
                f"#{i}: error (expected {expected} columns, got {len(parts)})",
            ))
            report.n_errors += 1
            continue
        try:
            feats = np.array([float(p) for p in parts[:7]])
        except ValueError:
            report.rows.append(DetectRow(i, "error", f"#{i}: error (bad numeric value)"))
            report.n_errors += 1
            continue
        pred = model.predict(feats)
        status = "unsafe" if pred == 1 else "safe"
        report.rows.append(DetectRow(i, status, f"#{i}: {_STATUS_TEXT[pred]}"))
        if pred == 1:
            report.n_unsafe += 1
        else:
            report.n_safe += 1
        if has_class:
            cls = parts[7].strip()
            if cls in ("0", "1"):
                labeled += 1
                hits += int(pred == int(cls))
    if labeled:
        report.accuracy = hits / labeled
    return report


def cmd_detect(model_path, input_path) -> int:
    model = load_any_model(Path(model_path).read_text())
    lines = Path(input_path).read_text().splitlines()
    report = run_detect(model, lines)
    for line in report.lines():
        print(line)
    return 0


def cmd_ks(eval_json_path, id_a: str, id_b: str) -> int:
    samples = {s.classifier_id: s for s in
               eval_samples_from_json(Path(eval_json_path).read_text())}
    for cid in (id_a, id_b):
        if cid not in samples:
            raise ConfigError(f"classifier {cid!r} not present in {eval_json_path}")
    out = ks_two_sample(samples[id_a].test_accuracies, samples[id_b].test_accuracies)
    print(f"{id_a} {out.symbol()} {id_b}  "
          f"(D={out.d_statistic:.6f}, critical={out.critical_value:.6f}, "
          f"alpha={out.alpha})")
    return 0


def fast_bench_config(root_seed: int = 42) -> BenchConfig:
    """CI profile: 2,048-row grid, 3 repeats."""
    return BenchConfig(synth=fast_config(), repeats=3, root_seed=root_seed)


def full_bench_config(root_seed: int = 42) -> BenchConfig:
    return BenchConfig(synth=default_config(), repeats=10, root_seed=root_seed)
