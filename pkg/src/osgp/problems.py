"""Benchmark datasets: Poly-10, Mackey-Glass and a CSV classification task."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .interp import Dataset
from .trees import ConstantSampler, PrimitiveSet

log = logging.getLogger(__name__)

ARITHMETIC = ("ADD", "SUB", "MUL", "DIV")
EXTENDED = (
    "ADD", "MUL", "SUB", "DIV", "LOG", "EXP", "SIGNUM", "SIN", "COS", "TAN",
    "IF-THEN-ELSE", "LESS-THAN", "GREATER-THAN", "EQUAL", "NOT", "AND", "OR", "XOR",
)
MG_LAGS = (128, 64, 32, 16, 8, 4, 2, 1)
PROBLEM_NAMES = ("poly10", "mackey_glass", "classification")
DEFAULT_MAX_EVALUATIONS = {"poly10": 1_000_000, "mackey_glass": 5_000_000,
                           "classification": 2_000_000}


class SeriesTooShortError(ValueError):
    pass


class TooFewRowsError(ValueError):
    pass


class MissingTargetColumnError(KeyError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    prims: PrimitiveSet
    max_evaluations: int


# ---------------------------------------------------------------------------
# Poly-10


def poly10_target(x: np.ndarray) -> np.ndarray:
    """y = x1x2 + x3x4 + x5x6 + x1x7x9 + x3x6x10 for rows of ``x`` (10 columns)."""
    x = np.asarray(x, dtype=np.float64)
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = x.T
    return x1 * x2 + x3 * x4 + x5 * x6 + x1 * x7 * x9 + x3 * x6 * x10


def gen_poly10(rng: np.random.Generator, n: int = 100) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    x = rng.uniform(-1.0, 1.0, size=(n, 10))
    data = np.column_stack([x, poly10_target(x)])
    return Dataset(tuple(f"x{i}" for i in range(1, 11)) + ("y",), data, target=10)


# ---------------------------------------------------------------------------
# Mackey-Glass


def _mg_rate(x: float, xd: float, a: float, b: float, n: float) -> float:
    return a * xd / (1.0 + xd ** n) - b * x


def gen_mackey_glass(count: int, tau: float = 17, history: float = 1.2, step: float = 0.1,
                     transient: int = 100, sample_every: float = 1.0,
                     a: float = 0.2, b: float = 0.1, n: float = 10) -> np.ndarray:
    """Integrate the Mackey-Glass delay equation with fixed-step RK4.

    The delayed state at half steps is the mean of the two neighbouring
    grid values. ``x(t) = history`` for ``t <= 0``. The first ``transient``
    samples are dropped.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    delay = int(round(tau / step))
    if not math.isclose(delay * step, tau, abs_tol=1e-9):
        raise ValueError("tau must be a multiple of the step")
    stride = int(round(sample_every / step))
    total_steps = (count + transient) * stride
    x = np.empty(total_steps + 1)
    x[0] = history
    out = np.empty(count)
    h = step

    def past(k: int) -> float:
        return x[k] if k >= 0 else history

    for k in range(total_steps):
        xk = x[k]
        if delay == 0:
            k1 = _mg_rate(xk, xk, a, b, n)
            y = xk + 0.5 * h * k1
            k2 = _mg_rate(y, y, a, b, n)
            y = xk + 0.5 * h * k2
            k3 = _mg_rate(y, y, a, b, n)
            y = xk + h * k3
            k4 = _mg_rate(y, y, a, b, n)
        else:
            d0 = past(k - delay)
            d1 = past(k - delay + 1)
            dm = 0.5 * (d0 + d1)
            k1 = _mg_rate(xk, d0, a, b, n)
            k2 = _mg_rate(xk + 0.5 * h * k1, dm, a, b, n)
            k3 = _mg_rate(xk + 0.5 * h * k2, dm, a, b, n)
            k4 = _mg_rate(xk + h * k3, d1, a, b, n)
        x[k + 1] = xk + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    for s in range(count):
        out[s] = x[(transient + s + 1) * stride]
    return out


def lag_embed(series: Sequence[float], lags: Sequence[int] = MG_LAGS, count: int = 928) -> Dataset:
    """Rows ``(x(t - lag) for lag in lags) + (x(t),)`` for ``t = max(lags) ... max(lags) + count - 1``."""
    series = np.asarray(series, dtype=np.float64)
    if not lags or min(lags) < 1:
        raise ValueError("lags must be positive integers")
    start = max(lags)
    if start + count > len(series):
        raise SeriesTooShortError(
            f"{count} rows with max lag {start} need {start + count} samples, got {len(series)}")
    t = np.arange(start, start + count)
    cols = [series[t - lag] for lag in lags] + [series[t]]
    return Dataset(tuple(f"x{lag}" for lag in lags) + ("y",), np.column_stack(cols),
                   target=len(lags))


def load_series_csv(path: str | Path, column: int = 0) -> np.ndarray:
    """Read one numeric column of a CSV as a series; a header line is skipped."""
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                values.append(float(row[column]))
            except ValueError:
                if lineno == 1:
                    continue
                raise
    return np.asarray(values)


# ---------------------------------------------------------------------------
# classification


def load_classification_csv(path: str | Path, target_column: str,
                            target_map: Mapping[str, float] | None = None,
                            sample_count: int | None = None,
                            exclude_columns: Sequence[str] = ()) -> tuple[Dataset, int]:
    """Load a headed numeric CSV for classification.

    Every column other than the target and ``exclude_columns`` becomes an
    input. Target cells go through ``target_map`` (keys compared as
    stripped strings) or are parsed as floats. Rows with any unparseable
    cell are skipped. Returns the dataset and the number of skipped rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TooFewRowsError(f"{path} is empty") from None
        if target_column not in header:
            raise MissingTargetColumnError(f"no column {target_column!r} in {header}")
        missing = set(exclude_columns) - set(header)
        if missing:
            raise MissingTargetColumnError(f"excluded columns not in header: {sorted(missing)}")
        t_idx = header.index(target_column)
        in_idx = [j for j, h in enumerate(header) if j != t_idx and h not in exclude_columns]
        tmap = {str(k).strip(): float(v) for k, v in (target_map or {}).items()}

        rows, skipped = [], 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != len(header):
                    raise ValueError("ragged row")
                cell = row[t_idx].strip()
                y = tmap[cell] if tmap else float(cell)
                xs = [float(row[j]) for j in in_idx]
                if not all(math.isfinite(v) for v in xs + [y]):
                    raise ValueError("non-finite cell")
            except (ValueError, KeyError):
                skipped += 1
                continue
            rows.append(xs + [y])
            if sample_count is not None and len(rows) == sample_count:
                break

    if skipped:
        log.info("skipped %d unparseable rows in %s", skipped, path)
    if sample_count is not None and len(rows) < sample_count:
        raise TooFewRowsError(f"{path}: {len(rows)} usable rows, {sample_count} requested")
    if not rows:
        raise TooFewRowsError(f"{path}: no usable rows")
    names = tuple(f"x{k}" for k in range(1, len(in_idx) + 1)) + ("y",)
    return Dataset(names, np.array(rows), target=len(in_idx)), skipped


def shuffle_dataset(ds: Dataset, rng: np.random.Generator) -> Dataset:
    return Dataset(ds.columns, ds.data[rng.permutation(ds.n_rows)], ds.target)


def head(ds: Dataset, n: int) -> Dataset:
    if n > ds.n_rows:
        raise TooFewRowsError(f"{ds.n_rows} rows available, {n} requested")
    return Dataset(ds.columns, ds.data[:n], ds.target)


def gen_classification(rng: np.random.Generator, n: int = 569, features: int = 10) -> Dataset:
    """Synthetic two-class stand-in for the breast-cancer data.

    Integer features in 1..10; class 4 rows have larger feature values on
    average. Targets are coded 2 and 4.
    """
    labels = rng.random(n) < 0.35
    centre = np.where(labels, 7.0, 2.5)[:, None]
    x = np.clip(np.rint(rng.normal(centre, 2.0, size=(n, features))), 1, 10)
    y = np.where(labels, 4.0, 2.0)
    names = tuple(f"x{k}" for k in range(1, features + 1)) + ("class",)
    return Dataset(names, np.column_stack([x, y]), target=features)


def write_csv(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.columns)
        for row in ds.data:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# problem definitions


def variables_for(ds: Dataset) -> tuple[list[str], list[int]]:
    cols = ds.input_columns
    return [ds.columns[j] for j in cols], cols


def make_problem(name: str, ds: Dataset) -> ProblemSpec:
    """Primitive set and evaluation budget of a named benchmark, bound to ``ds``'s columns."""
    names, cols = variables_for(ds)
    if name == "poly10":
        prims = PrimitiveSet.build(ARITHMETIC, names, None, cols)
    elif name == "mackey_glass":
        prims = PrimitiveSet.build(ARITHMETIC, names, ConstantSampler(1, 127, integer=True), cols)
    elif name == "classification":
        prims = PrimitiveSet.build(EXTENDED, names, ConstantSampler(-20.0, 20.0), cols)
    else:
        raise ValueError(f"unknown problem {name!r}; valid: {', '.join(PROBLEM_NAMES)}")
    return ProblemSpec(name, prims, DEFAULT_MAX_EVALUATIONS[name])

