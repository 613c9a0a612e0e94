"""Tree evaluation and mean-squared-error fitness.

Two evaluation routes exist. :func:`eval_tree_reference` is a plain
recursive interpreter built on :func:`apply_primitive` and defines the
semantics. :func:`eval_tree` and :func:`fitness` run a compiled stack
machine over the prefix encoding; they must agree with the reference.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .trees import OPCODE_ARITY, ExpressionTree, Kind, Symbol

WORST = math.inf


class ArityMismatchError(ValueError):
    pass


class UnknownVariableError(IndexError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row-major numeric table; column ``target`` holds the value to predict."""

    columns: tuple[str, ...]
    data: np.ndarray
    target: int

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("dataset must be two-dimensional")
        if len(self.columns) != data.shape[1]:
            raise ValueError(f"{len(self.columns)} column names for {data.shape[1]} columns")
        if not 0 <= self.target < data.shape[1]:
            raise ValueError(f"target column {self.target} out of range")
        if not np.all(np.isfinite(data)):
            raise ValueError("dataset contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "data", data)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def targets(self) -> np.ndarray:
        return self.data[:, self.target]

    @functools.cached_property
    def columns_major(self) -> np.ndarray:
        return np.ascontiguousarray(self.data.T)

    @functools.cached_property
    def targets_contiguous(self) -> np.ndarray:
        return np.ascontiguousarray(self.data[:, self.target])

    @property
    def input_columns(self) -> list[int]:
        return [j for j in range(self.width) if j != self.target]

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.columns == other.columns
                and self.target == other.target and np.array_equal(self.data, other.data))


def _truthy(x: float) -> bool:
    return x > 0


def apply_primitive(sym: Symbol, args: Sequence[float]) -> float:
    """Apply a function symbol to real arguments.

    A non-finite argument always yields NaN so that overflow anywhere in a
    tree reaches the root. Relational and boolean primitives return 1.0 or
    0.0; truthiness is ``value > 0``.
    """
    if len(args) != sym.arity:
        raise ArityMismatchError(f"{sym.name} takes {sym.arity} arguments, got {len(args)}")
    if sym.kind is not Kind.FUNCTION:
        raise ValueError(f"{sym.name} is a terminal")
    if not all(math.isfinite(a) for a in args):
        return math.nan
    name = sym.name
    a = args[0]
    if name == "ADD":
        return a + args[1]
    if name == "SUB":
        return a - args[1]
    if name == "MUL":
        return a * args[1]
    if name == "DIV":
        return 1.0 if args[1] == 0 else a / args[1]
    if name == "LOG":
        return 0.0 if a == 0 else math.log(abs(a))
    if name == "EXP":
        try:
            return math.exp(a)
        except OverflowError:
            return math.inf
    if name == "SIGNUM":
        return float((a > 0) - (a < 0))
    if name == "SIN":
        return math.sin(a)
    if name == "COS":
        return math.cos(a)
    if name == "TAN":
        return math.tan(a)
    if name == "IF-THEN-ELSE":
        return args[1] if _truthy(a) else args[2]
    if name == "LESS-THAN":
        return float(a < args[1])
    if name == "GREATER-THAN":
        return float(a > args[1])
    if name == "EQUAL":
        return float(a == args[1])
    if name == "NOT":
        return float(not _truthy(a))
    if name == "AND":
        return float(_truthy(a) and _truthy(args[1]))
    if name == "OR":
        return float(_truthy(a) or _truthy(args[1]))
    if name == "XOR":
        return float(_truthy(a) != _truthy(args[1]))
    raise ValueError(f"no semantics for {name}")


def _check_columns(tree: ExpressionTree, ds: Dataset) -> None:
    for s in tree.nodes:
        if s.kind is Kind.VARIABLE and s.index >= ds.width:
            raise UnknownVariableError(
                f"variable {s.name} reads column {s.index} of a {ds.width}-column dataset")


def eval_tree_reference(tree: ExpressionTree, ds: Dataset) -> np.ndarray:
    """Row-by-row recursive evaluation. Slow; used as the semantic oracle."""
    _check_columns(tree, ds)
    nodes = tree.nodes
    ends = tree.ends

    def ev(i: int, row) -> float:
        s = nodes[i]
        if s.kind is Kind.CONSTANT:
            return s.value
        if s.kind is Kind.VARIABLE:
            return float(row[s.index])
        args = []
        j = i + 1
        for _ in range(s.arity):
            args.append(ev(j, row))
            j = ends[j]
        return apply_primitive(s, args)

    return np.array([ev(0, row) for row in ds.data], dtype=np.float64)


def compile_tree(tree: ExpressionTree) -> tuple[np.ndarray, np.ndarray]:
    """Opcode and argument arrays for the stack machine (cached on the tree)."""
    return tree.code


_ARITY = OPCODE_ARITY


@njit(cache=True)
def _stack_depth(ops, arity):
    sp = 0
    deepest = 0
    for i in range(ops.shape[0] - 1, -1, -1):
        sp += 1 - arity[ops[i]]
        if sp > deepest:
            deepest = sp
    return deepest


@njit(cache=True)
def _run_program(ops, args, arity, cols):
    """Evaluate a prefix program over all rows; ``cols`` is column-major (m x rows).

    Values are kept as one stack slot per pending subtree, each slot a full
    row vector. ADD/SUB/MUL/LOG/SIN/COS/TAN turn non-finite input into
    non-finite output by IEEE rules; the other primitives check explicitly.
    """
    rows = cols.shape[1]
    st = np.empty((_stack_depth(ops, arity), rows))
    sp = 0
    for i in range(ops.shape[0] - 1, -1, -1):
        op = ops[i]
        if op == 0:
            v = args[i]
            for r in range(rows):
                st[sp, r] = v
            sp += 1
            continue
        if op == 1:
            c = int(args[i])
            for r in range(rows):
                st[sp, r] = cols[c, r]
            sp += 1
            continue
        k = arity[op]
        x = sp - 1
        y = sp - 2
        z = sp - 3
        d = sp - k
        if op == 2:
            for r in range(rows):
                st[d, r] = st[x, r] + st[y, r]
        elif op == 3:
            for r in range(rows):
                st[d, r] = st[x, r] - st[y, r]
        elif op == 4:
            for r in range(rows):
                st[d, r] = st[x, r] * st[y, r]
        elif op == 5:
            for r in range(rows):
                a = st[x, r]
                b = st[y, r]
                if not (np.isfinite(a) and np.isfinite(b)):
                    st[d, r] = np.nan
                elif b == 0.0:
                    st[d, r] = 1.0
                else:
                    st[d, r] = a / b
        elif op == 6:
            for r in range(rows):
                a = st[x, r]
                st[d, r] = 0.0 if a == 0.0 else np.log(np.abs(a))
        elif op == 7:
            for r in range(rows):
                a = st[x, r]
                st[d, r] = np.exp(a) if np.isfinite(a) else np.nan
        elif op == 8:
            for r in range(rows):
                a = st[x, r]
                if not np.isfinite(a):
                    st[d, r] = np.nan
                else:
                    st[d, r] = 1.0 if a > 0 else (-1.0 if a < 0 else 0.0)
        elif op == 9:
            for r in range(rows):
                st[d, r] = np.sin(st[x, r])
        elif op == 10:
            for r in range(rows):
                st[d, r] = np.cos(st[x, r])
        elif op == 11:
            for r in range(rows):
                st[d, r] = np.tan(st[x, r])
        elif op == 12:
            for r in range(rows):
                a = st[x, r]
                b = st[y, r]
                c = st[z, r]
                if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
                    st[d, r] = np.nan
                else:
                    st[d, r] = b if a > 0 else c
        elif op == 16:
            for r in range(rows):
                a = st[x, r]
                if not np.isfinite(a):
                    st[d, r] = np.nan
                else:
                    st[d, r] = 1.0 if a <= 0 else 0.0
        else:
            for r in range(rows):
                a = st[x, r]
                b = st[y, r]
                if not (np.isfinite(a) and np.isfinite(b)):
                    st[d, r] = np.nan
                elif op == 13:
                    st[d, r] = 1.0 if a < b else 0.0
                elif op == 14:
                    st[d, r] = 1.0 if a > b else 0.0
                elif op == 15:
                    st[d, r] = 1.0 if a == b else 0.0
                elif op == 17:
                    st[d, r] = 1.0 if (a > 0 and b > 0) else 0.0
                elif op == 18:
                    st[d, r] = 1.0 if (a > 0 or b > 0) else 0.0
                else:
                    st[d, r] = 1.0 if ((a > 0) != (b > 0)) else 0.0
        sp = d + 1
    return st[0].copy()


@njit(cache=True)
def _mse_program(ops, args, arity, cols, target):
    pred = _run_program(ops, args, arity, cols)
    acc = 0.0
    for r in range(pred.shape[0]):
        if not np.isfinite(pred[r]):
            return np.inf
        e = pred[r] - target[r]
        acc += e * e
    return acc / pred.shape[0]


def eval_tree(tree: ExpressionTree, ds: Dataset) -> np.ndarray:
    _check_columns(tree, ds)
    ops, args = compile_tree(tree)
    return _run_program(ops, args, _ARITY, ds.columns_major)


def mse(predictions, targets) -> float:
    """Mean squared error; :data:`WORST` if any prediction is non-finite."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mse of empty input")
    if not np.all(np.isfinite(p)):
        return WORST
    q = float(np.mean((p - t) ** 2))
    return q if math.isfinite(q) else WORST


def fitness(tree: ExpressionTree, ds: Dataset) -> float:
    """MSE of ``tree`` against the dataset targets.

    Hot path: variable columns are not range-checked here; callers
    validate the primitive set against the dataset once up front.
    """
    ops, args = compile_tree(tree)
    q = float(_mse_program(ops, args, _ARITY, ds.columns_major, ds.targets_contiguous))
    return q if math.isfinite(q) else WORST
