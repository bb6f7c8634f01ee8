"""Run matrices of (algorithm x function x run) from a JSON config.

Layout of an output directory::

    config.json                      the validated config, as run
    runs/<function>/<algorithm>/<run>.json      one record per finished cell
    runs/<function>/<algorithm>/<run>.csv       BO trace (bo mode only)
    metrics.csv, aggregate.json      regression modes
    regret.json                      bo mode
    failures.json                    cells that raised, with the message

Every file is written to a temporary name and renamed into place, so an
interrupted run leaves only complete files and a rerun skips them.
"""

from __future__ import annotations

import json
import os
import re
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import jsonschema

from .algorithms import Recipe, fit_estimator
from .bo import BoConfig, BoState, aggregate_regrets, run_bo
from .metrics import MetricsReport, evaluate
from .rng import derive_seed
from .testbed import functions as tf
from .testbed.irradiance import load_irradiance
from .testbed.sampling import regression_sets

WORKERS_ENV = "NOMU_WORKERS"
GRID_1D = 201
GRID_2D = 41
DEFAULT_N_TRAIN = {"regression-1d": 8, "regression-2d": 16}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def config_schema() -> dict:
    return json.loads(resources.files("nomu").joinpath("config.schema.json").read_text())


_BO_KEY = re.compile(r"^([A-Za-z]+)(\d+)D$")


def parse_function(mode: str, name: str) -> tf.TestFunction:
    if mode == "regression-1d":
        if name not in tf.BATTERY_1D:
            raise KeyError(name)
        return tf.get(name, 1)
    if mode == "regression-2d":
        if name not in tf.BATTERY_2D:
            raise KeyError(name)
        return tf.get(name, 2)
    m = _BO_KEY.match(name)
    if not m or m.group(1) not in tf.BATTERY_HIGH_D:
        raise KeyError(name)
    return tf.bo_function(m.group(1), int(m.group(2)))


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(str(path), "config file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}") from None
        return cls.from_dict(raw, path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        validator = jsonschema.Draft202012Validator(config_schema())
        errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            raise ConfigError(e.json_path, e.message)
        mode = raw["mode"]
        if mode == "irradiance":
            if "irradiance" not in raw:
                raise ConfigError("$.irradiance", "required in irradiance mode")
        else:
            fns = raw.get("functions", [])
            if not fns:
                raise ConfigError("$.functions", "must list at least one function")
            for i, name in enumerate(fns):
                try:
                    parse_function(mode, name)
                except KeyError:
                    raise ConfigError(f"$.functions[{i}]", f"unknown function {name!r} for mode {mode}") from None
        if mode != "bo" and "RAND" in raw["algorithms"]:
            raise ConfigError("$.algorithms", "RAND only exists in bo mode")
        cfg = cls(raw, Path(base_dir))
        try:
            cfg.bo_configs()
        except ValueError as exc:
            raise ConfigError("$.bo", str(exc)) from None
        return cfg

    @property
    def mode(self) -> str:
        return self.raw["mode"]

    @property
    def algorithms(self) -> list[str]:
        return list(self.raw["algorithms"])

    @property
    def functions(self) -> list[str]:
        return ["irradiance"] if self.mode == "irradiance" else list(self.raw["functions"])

    @property
    def runs(self) -> int:
        return int(self.raw["runs"])

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def output_dir(self, override: str | Path | None = None) -> Path:
        if override is not None:
            return Path(override)
        return self.base_dir / self.raw.get("output", "results")

    def recipe(self, algorithm: str) -> Recipe:
        task = {"bo": "bo", "irradiance": "irradiance"}.get(self.mode, "regression")
        scale = self.raw.get("scale", "full")
        base = Recipe.desk(task) if scale == "desk" else Recipe.full(task)
        base = base.with_overrides(**self.raw.get("recipe", {}))
        return base.with_overrides(**self.raw.get("overrides", {}).get(algorithm, {}))

    def bo_configs(self) -> list[BoConfig]:
        if self.mode != "bo":
            return []
        b = dict(self.raw.get("bo", {}))
        targets = b.pop("mw_targets", [0.05, 0.5])
        return [BoConfig(mw_target=float(t), **b) for t in targets]

    def cells(self) -> list[tuple]:
        """``(function, algorithm, mw_target or None, run)`` in a fixed order."""
        targets = [c.mw_target for c in self.bo_configs()] or [None]
        return [(fn, alg, mw, r) for fn in self.functions for alg in self.algorithms
                for mw in targets for r in range(self.runs)]


def data_seed(master: int, function: str, run: int) -> int:
    """Shared by every algorithm in one run, so that comparisons are paired."""
    return derive_seed(master, "data", function, run)


def cell_seed(master: int, algorithm: str, function: str, run: int) -> int:
    return derive_seed(master, algorithm, function, run)


def cell_path(out: Path, function: str, algorithm: str, mw, run: int, ext: str = ".json") -> Path:
    # appended rather than with_suffix: the MW tag itself contains a dot
    tag = f"run{run:04d}" if mw is None else f"mw{mw!r}-run{run:04d}"
    return out / "runs" / function / algorithm / (tag + ext)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _regression_data(cfg: ExperimentConfig, function: str, run: int):
    ds = data_seed(cfg.seed, function, run)
    if cfg.mode == "irradiance":
        spec = cfg.raw["irradiance"]
        return None, *load_irradiance(cfg.base_dir / spec["path"], [tuple(i) for i in spec["intervals"]], ds)
    f = parse_function(cfg.mode, function)
    n_train = cfg.raw.get("n_train", DEFAULT_N_TRAIN[cfg.mode])
    return f, *regression_sets(f, ds, n_train, cfg.raw.get("n_val", 100))


def _plot_payload(est, f, train, dim: int) -> dict:
    """Predictions on a fixed grid, stored so that plots need no refit."""
    if dim == 1:
        g = np.linspace(-1.0, 1.0, GRID_1D)[:, None]
    else:
        a = np.linspace(-1.0, 1.0, GRID_2D)
        g = np.stack(np.meshgrid(a, a, indexing="ij"), axis=-1).reshape(-1, 2)
    mean, sigma = est.predict(g)
    out = {"grid": g.tolist(), "mean": mean.tolist(), "sigma": sigma.tolist(),
           "train_x": train.x.tolist(), "train_y": train.y.tolist()}
    if f is not None:
        out["truth"] = f(g).tolist()
    return out


def run_cell(cfg: ExperimentConfig, out: Path, cell: tuple) -> None:
    function, algorithm, mw, run = cell
    seed = cell_seed(cfg.seed, algorithm, function, run)
    record = {"function": function, "algorithm": algorithm, "run": run, "seed": seed}
    if cfg.mode == "bo":
        bo_cfg = next(c for c in cfg.bo_configs() if c.mw_target == mw)
        f = parse_function("bo", function)
        state = run_bo(f, algorithm, bo_cfg, seed, cfg.recipe(algorithm),
                       data_seed=data_seed(cfg.seed, function, run))
        atomic_write(cell_path(out, *cell, ".csv"), state.to_csv())
        record.update(mw_target=mw, final_regret=state.final_regret, c0=state.c0,
                      regret=state.regret_trace.tolist(), config=bo_cfg.to_dict())
    else:
        f, train, val = _regression_data(cfg, function, run)
        est = fit_estimator(algorithm, train, seed, cfg.recipe(algorithm))
        record.update(metrics=evaluate(est, val))
        mean, sigma = est.predict(val.x)
        record["validation"] = {"y": val.y.tolist(), "mean": mean.tolist(), "sigma": sigma.tolist()}
        if train.dim <= 2:
            record["plot"] = _plot_payload(est, f, train, train.dim)
    atomic_write(cell_path(out, *cell), _dump(record))


def _run_cell_safe(args) -> tuple[tuple, str | None]:
    cfg, out, cell = args
    try:
        run_cell(cfg, out, cell)
        return cell, None
    except Exception as exc:  # recorded, the matrix continues
        return cell, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass
class RunSummary:
    out: Path
    done: int
    skipped: int
    failures: dict

    @property
    def ok(self) -> bool:
        return not self.failures


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, workers: int | None = None,
                   progress=None) -> RunSummary:
    """Execute missing cells, then rebuild the aggregates from every per-run file."""
    out = cfg.output_dir(out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "config.json", _dump(cfg.raw))
    todo, skipped = [], 0
    for cell in cfg.cells():
        if cell_path(out, *cell).exists():
            skipped += 1
        else:
            todo.append(cell)
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, out, c) for c in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell_safe, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_cell_safe(job))
            if progress:
                progress(job[2], results[-1][1])
    failures = {"/".join(str(p) for p in c if p is not None): err for c, err in results if err}
    if failures:
        atomic_write(out / "failures.json", _dump(failures))
    elif (out / "failures.json").exists():
        (out / "failures.json").unlink()
    write_aggregates(out)
    return RunSummary(out, len(todo) - len(failures), skipped, failures)


def load_records(out: Path) -> list[dict]:
    files = sorted((out / "runs").glob("*/*/*.json"))
    return [json.loads(p.read_text()) for p in files]


def metrics_report(records: list[dict]) -> MetricsReport:
    rep = MetricsReport()
    for r in records:
        for measure in ("auc", "mnlpd"):
            rep.add(r["algorithm"], r["function"], r["run"], measure, r["metrics"][measure])
    return rep


def regret_aggregate(records: list[dict]) -> dict:
    groups: dict = {}
    for r in records:
        groups.setdefault((r["function"], r["algorithm"], r["mw_target"]), []).append(r["final_regret"])
    return aggregate_regrets(groups)


def write_aggregates(out: Path) -> dict:
    """Recompute aggregates from the per-run files; returns the paths written."""
    cfg = json.loads((out / "config.json").read_text())
    records = load_records(out)
    if cfg["mode"] == "bo":
        atomic_write(out / "regret.json", _dump(regret_aggregate(records)))
        return {"regret": out / "regret.json"}
    rep = metrics_report(records)
    atomic_write(out / "metrics.csv", rep.to_csv())
    atomic_write(out / "aggregate.json", rep.to_json() + "\n")
    return {"metrics": out / "metrics.csv", "aggregate": out / "aggregate.json"}


def report_text(out: str | Path) -> str:
    """Human-readable summary of an output directory."""
    out = Path(out)
    if not (out / "config.json").exists():
        raise FileNotFoundError(f"{out / 'config.json'}: not an experiment directory")
    cfg = json.loads((out / "config.json").read_text())
    write_aggregates(out)
    lines = [f"mode {cfg['mode']}, {len(load_records(out))} finished runs"]
    if cfg["mode"] == "bo":
        agg = json.loads((out / "regret.json").read_text())
        for fn, by_alg in agg.items():
            for alg, by_mw in by_alg.items():
                if alg == "dim":
                    continue
                for mw, v in by_mw.items():
                    lines.append(f"{fn:14s} {alg:5s} MW {mw:5s} final regret {v['mean']:.3e} "
                                 f"+/- {v['ci']:.1e} (n={v['n']})")
    else:
        agg = json.loads((out / "aggregate.json").read_text())
        for fn, by_meas in agg.items():
            for meas, by_alg in by_meas.items():
                for alg, v in sorted(by_alg.items(), key=lambda kv: kv[1]["median"]):
                    lines.append(f"{fn:14s} {meas:5s} {alg:5s} median {v['median']:.4g} "
                                 f"[{v['lo']:.4g}, {v['hi']:.4g}] rank {v['rank']}")
    if (out / "failures.json").exists():
        fails = json.loads((out / "failures.json").read_text())
        lines.append(f"{len(fails)} failed cells, see failures.json")
    return "\n".join(lines)


def read_trace(path: Path) -> list[dict]:
    return BoState.read_csv(path.read_text())
