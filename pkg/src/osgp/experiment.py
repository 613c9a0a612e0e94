"""Run configuration, batch execution, log files and cross-run aggregation."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from . import problems
from .engine import ConfigError, GenerationLog, OsParams, RunLog, run
from .genops import CrossoverKind
from .interp import Dataset

log = logging.getLogger(__name__)

CSV_HEADER = ("generation", "evaluations", "best_quality", "avg_tree_size", "selection_pressure")
QUANTITIES = ("best_quality", "avg_tree_size", "selection_pressure")


class ConfigParseError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``max_evaluations`` of None means the problem's default budget;
    ``data_seed`` of None means "use ``seed``" for data generation and
    shuffling. ``data`` names a CSV file: the series for Mackey-Glass, the
    table for classification (without it a synthetic stand-in is used).
    """

    problem: str = "poly10"
    data: str | None = None
    target_column: str = "class"
    target_map: dict[str, float] | None = None
    exclude_columns: list[str] = field(default_factory=list)
    sample_count: int = 400
    poly10_samples: int = 100
    mg_train_count: int = 928
    mg_lags: list[int] = field(default_factory=lambda: list(problems.MG_LAGS))
    population_size: int = 1000
    mutation_rate: float = 0.15
    crossover: str = "standard"
    max_selection_pressure: float = 200.0
    max_evaluations: int | None = None
    init_min_size: int = 3
    init_max_size: int = 50
    seed: int = 0
    data_seed: int | None = None
    output_dir: str = "."

    def validate(self) -> RunConfig:
        if self.problem not in problems.PROBLEM_NAMES:
            raise ConfigError("problem", f"{self.problem!r} not one of {', '.join(problems.PROBLEM_NAMES)}")
        if self.data and not Path(self.data).is_file():
            raise ConfigError("data", f"file not found: {self.data}")
        for name in ("sample_count", "poly10_samples", "mg_train_count"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if not self.mg_lags or min(self.mg_lags) < 1:
            raise ConfigError("mg_lags", "lags must be positive integers")
        self.params  # OsParams validates the search parameters
        return self

    @property
    def params(self) -> OsParams:
        budget = self.max_evaluations
        if budget is None:
            budget = problems.DEFAULT_MAX_EVALUATIONS.get(self.problem, 1_000_000)
        return OsParams(
            population_size=self.population_size,
            mutation_rate=self.mutation_rate,
            crossover=self.crossover,
            max_selection_pressure=self.max_selection_pressure,
            max_evaluations=budget,
            init_min_size=self.init_min_size,
            init_max_size=self.init_max_size,
        )

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value: Any) -> Any:
    """Type-check one config value against the RunConfig field."""
    if value is None:
        if name in ("data", "target_map", "max_evaluations", "data_seed"):
            return None
        raise ConfigError(name, "must not be empty")
    if name in ("problem", "data", "target_column", "crossover", "output_dir"):
        return str(value)
    if name in ("mutation_rate", "max_selection_pressure"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if name == "target_map":
        if not isinstance(value, dict):
            raise ConfigError(name, "expected a mapping of label -> number")
        return {str(k): float(v) for k, v in value.items()}
    if name in ("exclude_columns", "mg_lags"):
        if not isinstance(value, list):
            raise ConfigError(name, "expected a list")
        return [int(v) for v in value] if name == "mg_lags" else [str(v) for v in value]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return value


def config_from_mapping(raw: dict, *, extra: Sequence[str] = ()) -> tuple[RunConfig, dict]:
    """Build a validated RunConfig; keys listed in ``extra`` are returned separately."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping of key: value pairs")
    values, rest = {}, {}
    for key, value in raw.items():
        if key in extra:
            rest[key] = value
        elif key in _FIELDS:
            values[key] = _coerce(key, value)
        else:
            raise ConfigError(str(key), "unknown setting")
    if "crossover" in values:
        try:
            values["crossover"] = CrossoverKind.parse(values["crossover"]).value
        except ValueError as e:
            raise ConfigError("crossover", str(e)) from None
    return RunConfig(**values).validate(), rest


def _load_yaml(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigParseError(path, None, str(e)) from None
    try:
        return yaml.safe_load(text) or {}
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark or e.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ConfigParseError(path, line, e.problem or str(e)) from None


def parse_config(path: str | Path) -> RunConfig:
    """Read a YAML ``key: value`` run configuration; unset keys take the defaults."""
    cfg, _ = config_from_mapping(_load_yaml(path))
    return cfg


def render_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=False)


# ---------------------------------------------------------------------------
# running


def build_dataset(cfg: RunConfig) -> Dataset:
    seed = cfg.seed if cfg.data_seed is None else cfg.data_seed
    rng = np.random.default_rng(seed)
    if cfg.problem == "poly10":
        if cfg.data:
            ds, _ = problems.load_classification_csv(cfg.data, "y")
            return ds
        return problems.gen_poly10(rng, cfg.poly10_samples)
    if cfg.problem == "mackey_glass":
        lags = cfg.mg_lags
        if cfg.data:
            series = problems.load_series_csv(cfg.data)
        else:
            series = problems.gen_mackey_glass(cfg.mg_train_count + max(lags))
        return problems.lag_embed(series, lags, cfg.mg_train_count)
    if cfg.data:
        ds, skipped = problems.load_classification_csv(
            cfg.data, cfg.target_column, cfg.target_map, None, cfg.exclude_columns)
        if skipped:
            log.warning("%s: skipped %d rows with unparseable cells", cfg.data, skipped)
    else:
        # synthetic stand-in; fixed data, shuffled per run like a real file
        ds = problems.gen_classification(np.random.default_rng(0))
    return problems.head(problems.shuffle_dataset(ds, rng), cfg.sample_count)


def execute(cfg: RunConfig, on_generation=None) -> RunLog:
    ds = build_dataset(cfg)
    spec = problems.make_problem(cfg.problem, ds)
    result = run(cfg.params, spec.prims, ds, cfg.seed, problem=cfg.problem,
                 on_generation=on_generation)
    result.params = dataclasses.asdict(cfg)
    return result


def log_stem(problem: str, kind: str, seed: int) -> str:
    return f"{problem}_{kind}_{seed}"


def write_log_csv(generations: Iterable[GenerationLog], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for g in generations:
            w.writerow([g.generation, g.evaluations, repr(float(g.best_quality)),
                        repr(float(g.avg_tree_size)), repr(float(g.selection_pressure))])


def read_log_csv(path: str | Path) -> list[GenerationLog]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [GenerationLog(int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]))
                for r in reader if r]


def emit_logs(result: RunLog, directory: str | Path) -> Path:
    """Write ``<problem>_<kind>_<seed>.csv`` plus a JSON run summary next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kind = result.params.get("crossover", "unknown")
    stem = log_stem(result.problem, kind, result.seed)
    path = directory / f"{stem}.csv"
    write_log_csv(result.generations, path)
    summary = {
        "termination": result.termination,
        "best_quality": result.best_quality,
        "best_tree": result.best_tree,
        "evaluations": result.evaluations,
        "generations": len(result.generations) - 1,
        "wall_time": round(result.wall_time, 3),
        "seed": result.seed,
        "config": result.params,
    }
    (directory / f"{stem}.summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# batches


@dataclass
class BatchSpec:
    base: RunConfig
    kinds: list[str] = field(default_factory=lambda: [k.value for k in CrossoverKind])
    repetitions: int = 20
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        try:
            self.kinds = [CrossoverKind.parse(k).value for k in self.kinds]
        except ValueError as e:
            raise ConfigError("kinds", str(e)) from None
        if not self.kinds:
            raise ConfigError("kinds", "at least one crossover kind is needed")

    def configs(self) -> list[RunConfig]:
        """One config per run, ordered by (kind, run index); seed = base seed + run index."""
        return [self.base.replace(crossover=k, seed=self.base.seed + r)
                for k in self.kinds for r in range(self.repetitions)]


def parse_batch(path: str | Path) -> BatchSpec:
    """A run config plus ``kinds``, ``repetitions`` and ``workers`` keys."""
    base, rest = config_from_mapping(_load_yaml(path), extra=("kinds", "repetitions", "workers"))
    return BatchSpec(base, **rest)


@dataclass
class BatchResult:
    config: RunConfig
    log: RunLog | None
    csv_path: Path | None
    error: str | None = None


def _run_one(cfg: RunConfig) -> BatchResult:
    try:
        result = execute(cfg)
        return BatchResult(cfg, result, emit_logs(result, cfg.output_dir))
    except Exception as e:  # one failed run must not abort the batch
        log.exception("run %s/%s failed", cfg.crossover, cfg.seed)
        return BatchResult(cfg, None, None, f"{type(e).__name__}: {e}")


def batch(spec: BatchSpec) -> tuple[list[BatchResult], list[dict]]:
    configs = spec.configs()
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_one, configs))
    else:
        results = [_run_one(c) for c in configs]
    rows = summarize(results, spec.kinds)
    out = Path(spec.base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary(rows, out / f"{spec.base.problem}_summary.csv")
    return results, rows


SUMMARY_HEADER = ("kind", "runs", "failed", "best_final_quality", "median_final_quality",
                  "worst_final_quality", "median_final_avg_tree_size",
                  "median_final_selection_pressure")


def summarize(results: Sequence[BatchResult], kinds: Sequence[str]) -> list[dict]:
    """Per-kind statistics of the last logged generation, computed from the CSV files."""
    rows = []
    for kind in kinds:
        mine = [r for r in results if r.config.crossover == kind]
        finals = [read_log_csv(r.csv_path)[-1] for r in mine if r.csv_path is not None]
        row = {"kind": kind, "runs": len(mine), "failed": sum(r.error is not None for r in mine)}
        if finals:
            q = [g.best_quality for g in finals]
            row.update(
                best_final_quality=min(q),
                median_final_quality=statistics.median(q),
                worst_final_quality=max(q),
                median_final_avg_tree_size=statistics.median(g.avg_tree_size for g in finals),
                median_final_selection_pressure=statistics.median(
                    g.selection_pressure for g in finals),
            )
        rows.append(row)
    return rows


def write_summary(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_HEADER, lineterminator="\n", restval="")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


# ---------------------------------------------------------------------------
# aggregation


def aggregate(paths: Sequence[str | Path], quantity: str, step: int = 1000,
              until: str = "longest") -> list[dict]:
    """Resample one logged quantity of several runs onto a shared evaluations grid.

    The grid starts at the latest first-generation evaluation count and ends
    at the final count of the longest run (``until="shortest"``: of the
    shortest run), plus that end point itself. Values are linearly
    interpolated; runs that stopped earlier carry their last value. Each
    grid point gets the min, median and max across runs.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {', '.join(QUANTITIES)}")
    if step < 1:
        raise ValueError("step must be >= 1")
    runs = []
    for p in paths:
        try:
            gens = read_log_csv(p)
        except (OSError, ValueError, IndexError) as e:
            log.warning("skipping %s: %s", p, e)
            continue
        if gens:
            runs.append((np.array([g.evaluations for g in gens], dtype=np.float64),
                         np.array([getattr(g, quantity) for g in gens], dtype=np.float64)))
    if not runs:
        raise ValueError("no valid log files to aggregate")
    start = max(x[0] for x, _ in runs)
    finals = [x[-1] for x, _ in runs]
    end = max(finals) if until == "longest" else min(finals)
    end = max(end, start)
    grid = np.arange(start, end + 1, step, dtype=np.float64)
    if grid[-1] != end:
        grid = np.append(grid, end)
    values = np.vstack([np.interp(grid, x, y) for x, y in runs])
    return [
        {"evaluations": int(e), "min": float(lo), "median": float(med), "max": float(hi),
         "runs": len(runs)}
        for e, lo, med, hi in zip(grid, values.min(axis=0), np.median(values, axis=0),
                                  values.max(axis=0))
    ]


def write_aggregate(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("evaluations", "min", "median", "max", "runs"))
        for r in rows:
            w.writerow((r["evaluations"], repr(r["min"]), repr(r["median"]), repr(r["max"]),
                        r["runs"]))
