"""Symbols, primitive sets and prefix-encoded expression trees.

Trees are stored as a flat tuple of symbols in prefix (Polish) order. A
subtree is always a contiguous slice of that tuple, which makes subtree
replacement a pair of slice concatenations. Node coordinates are paths of
child indices from the root; they are translated to prefix indices on
demand.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numba import njit

NodeCoord = tuple[int, ...]


class InvalidCoordinateError(IndexError):
    """Raised when a coordinate path does not address a node of a tree."""


class TreeParseError(ValueError):
    pass


class Kind(enum.Enum):
    FUNCTION = "function"
    VARIABLE = "variable"
    CONSTANT = "constant"


# name -> (arity, opcode). Opcodes 0 and 1 are reserved for constants and
# variables; the evaluator dispatches on these numbers.
OP_CONST = 0
OP_VAR = 1
PRIMITIVES: dict[str, tuple[int, int]] = {
    "ADD": (2, 2),
    "SUB": (2, 3),
    "MUL": (2, 4),
    "DIV": (2, 5),
    "LOG": (1, 6),
    "EXP": (1, 7),
    "SIGNUM": (1, 8),
    "SIN": (1, 9),
    "COS": (1, 10),
    "TAN": (1, 11),
    "IF-THEN-ELSE": (3, 12),
    "LESS-THAN": (2, 13),
    "GREATER-THAN": (2, 14),
    "EQUAL": (2, 15),
    "NOT": (1, 16),
    "AND": (2, 17),
    "OR": (2, 18),
    "XOR": (2, 19),
}

OPCODE_ARITY = np.zeros(max(op for _, op in PRIMITIVES.values()) + 1, dtype=np.int64)
for _arity, _op in PRIMITIVES.values():
    OPCODE_ARITY[_op] = _arity


@dataclass(frozen=True, slots=True)
class Symbol:
    name: str
    arity: int
    kind: Kind
    index: int | None = None
    value: float | None = None
    opcode: int = field(default=-1, compare=False, repr=False)
    arg: float = field(default=0.0, compare=False, repr=False)

    def __post_init__(self):
        if self.kind is Kind.FUNCTION:
            if self.arity < 1:
                raise ValueError(f"function {self.name!r} needs arity >= 1")
            if self.name not in PRIMITIVES:
                raise ValueError(f"unknown primitive {self.name!r}")
            if PRIMITIVES[self.name][0] != self.arity:
                raise ValueError(f"{self.name} has arity {PRIMITIVES[self.name][0]}")
            object.__setattr__(self, "opcode", PRIMITIVES[self.name][1])
        elif self.arity != 0:
            raise ValueError(f"terminal {self.name!r} must have arity 0")
        elif self.kind is Kind.VARIABLE:
            if self.index is None or self.index < 0:
                raise ValueError("variable needs a non-negative column index")
            object.__setattr__(self, "opcode", OP_VAR)
            object.__setattr__(self, "arg", float(self.index))
        else:
            if self.value is None:
                raise ValueError("constant needs a value")
            object.__setattr__(self, "opcode", OP_CONST)
            object.__setattr__(self, "arg", float(self.value))

    @classmethod
    def function(cls, name: str) -> Symbol:
        return cls(name, PRIMITIVES[name][0], Kind.FUNCTION)

    @classmethod
    def variable(cls, name: str, index: int) -> Symbol:
        return cls(name, 0, Kind.VARIABLE, index=index)

    @classmethod
    def constant(cls, value: float) -> Symbol:
        value = float(value)
        name = str(int(value)) if value.is_integer() else repr(value)
        return cls(name, 0, Kind.CONSTANT, value=value)

    @property
    def is_terminal(self) -> bool:
        return self.arity == 0


@dataclass(frozen=True)
class ConstantSampler:
    """Draws constant leaves from an integer range or a real interval (both inclusive)."""

    lo: float
    hi: float
    integer: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"constant bounds not ordered: {self.lo} > {self.hi}")

    def sample(self, rng: random.Random) -> Symbol:
        if self.integer:
            return Symbol.constant(rng.randint(int(self.lo), int(self.hi)))
        return Symbol.constant(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class PrimitiveSet:
    """Function and terminal alphabet of a problem.

    Terminal draws pick uniformly among the variables plus one extra slot
    for "a fresh constant" when a constant sampler is present.
    """

    functions: tuple[Symbol, ...]
    variables: tuple[Symbol, ...]
    constants: ConstantSampler | None = None

    def __post_init__(self):
        if not self.functions:
            raise ValueError("primitive set needs at least one function")
        if not self.variables and self.constants is None:
            raise ValueError("primitive set needs at least one terminal")
        names = [s.name for s in self.functions + self.variables]
        if len(set(names)) != len(names):
            raise ValueError("symbol names must be unique")
        if any(s.kind is not Kind.FUNCTION for s in self.functions):
            raise ValueError("functions must have kind FUNCTION")
        if any(s.kind is not Kind.VARIABLE for s in self.variables):
            raise ValueError("variables must have kind VARIABLE")
        by_arity: dict[int, tuple[Symbol, ...]] = {}
        for s in self.functions:
            by_arity[s.arity] = by_arity.get(s.arity, ()) + (s,)
        object.__setattr__(self, "_by_arity", by_arity)

    @classmethod
    def build(cls, function_names: Sequence[str], variable_names: Sequence[str],
              constants: ConstantSampler | None = None,
              variable_indices: Sequence[int] | None = None) -> PrimitiveSet:
        if variable_indices is None:
            variable_indices = range(len(variable_names))
        return cls(
            tuple(Symbol.function(n) for n in function_names),
            tuple(Symbol.variable(n, i) for n, i in zip(variable_names, variable_indices)),
            constants,
        )

    @property
    def max_arity(self) -> int:
        return max(s.arity for s in self.functions)

    def functions_of_arity(self, arity: int) -> tuple[Symbol, ...]:
        return self._by_arity.get(arity, ())

    def random_function(self, rng: random.Random) -> Symbol:
        return self.functions[rng.randrange(len(self.functions))]

    def random_terminal(self, rng: random.Random) -> Symbol:
        n = len(self.variables) + (self.constants is not None)
        k = rng.randrange(n)
        if k < len(self.variables):
            return self.variables[k]
        return self.constants.sample(rng)

    def lookup(self, name: str) -> Symbol:
        for s in self.functions + self.variables:
            if s.name == name:
                return s
        raise KeyError(name)


class ExpressionTree:
    """Immutable tree of symbols in prefix order.

    Derived per-node arrays are computed lazily and cached: ``code`` holds
    opcodes and leaf arguments for the evaluator, ``ends[i]`` is one past
    the last prefix index of the subtree rooted at ``i``. Operators that
    build a tree from parents carry these caches over by slicing.
    """

    __slots__ = ("nodes", "_code", "_ends", "_internal", "_leaves", "__weakref__")

    def __init__(self, nodes: Sequence[Symbol], *, validate: bool = True):
        self.nodes: tuple[Symbol, ...] = tuple(nodes)
        self._code: tuple[np.ndarray, np.ndarray] | None = None
        self._ends: np.ndarray | None = None
        self._internal: np.ndarray | None = None
        self._leaves: np.ndarray | None = None
        if validate and not is_well_formed(self.nodes):
            raise ValueError("node sequence is not a complete prefix tree")

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpressionTree) and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash(self.nodes)

    def __repr__(self) -> str:
        return f"ExpressionTree({render(self)!r})"

    def __str__(self) -> str:
        return render(self)

    @property
    def root(self) -> Symbol:
        return self.nodes[0]

    @property
    def code(self) -> tuple[np.ndarray, np.ndarray]:
        """``(opcodes, args)``: args is the column index or constant value of leaves."""
        if self._code is None:
            n = len(self.nodes)
            ops = np.fromiter((s.opcode for s in self.nodes), dtype=np.int64, count=n)
            args = np.fromiter((s.arg for s in self.nodes), dtype=np.float64, count=n)
            self._code = (ops, args)
        return self._code

    @property
    def arity_array(self) -> np.ndarray:
        return OPCODE_ARITY[self.code[0]]

    @property
    def ends(self) -> np.ndarray:
        if self._ends is None:
            self._ends = _subtree_ends(self.code[0], OPCODE_ARITY)
        return self._ends

    @property
    def internal_indices(self) -> np.ndarray:
        """Prefix indices of all function nodes."""
        if self._internal is None:
            self._internal = np.flatnonzero(self.arity_array)
        return self._internal

    @property
    def leaf_indices(self) -> np.ndarray:
        if self._leaves is None:
            self._leaves = np.flatnonzero(self.arity_array == 0)
        return self._leaves

    def arities(self) -> list[int]:
        return [s.arity for s in self.nodes]

    def children_of(self, i: int) -> list[int]:
        """Prefix indices of the children of node ``i``."""
        ends = self.ends
        out = []
        j = i + 1
        for _ in range(self.nodes[i].arity):
            out.append(j)
            j = int(ends[j])
        return out

    def index_of(self, coord: NodeCoord) -> int:
        i = 0
        ends = self.ends
        for depth, k in enumerate(coord):
            arity = self.nodes[i].arity
            if not 0 <= k < arity:
                raise InvalidCoordinateError(
                    f"child {k} requested at depth {depth} of a node with arity {arity}")
            i += 1
            for _ in range(k):
                i = int(ends[i])
        return i

    def coord_of(self, index: int) -> NodeCoord:
        if not 0 <= index < len(self.nodes):
            raise InvalidCoordinateError(f"prefix index {index} out of range")
        path = []
        i = 0
        ends = self.ends
        while i != index:
            j = i + 1
            k = 0
            while ends[j] <= index:
                j = int(ends[j])
                k += 1
            path.append(k)
            i = j
        return tuple(path)

    def coords(self) -> list[NodeCoord]:
        """Coordinates of every node, in prefix order."""
        out: list[NodeCoord] = []
        stack: list[list[int]] = []  # [arity, current child]
        path: list[int] = []
        for s in self.nodes:
            out.append(tuple(path))
            if s.arity:
                stack.append([s.arity, 0])
                path.append(0)
            else:
                while stack:
                    frame = stack[-1]
                    frame[1] += 1
                    if frame[1] < frame[0]:
                        path[-1] = frame[1]
                        break
                    stack.pop()
                    path.pop()
        return out

    def subtree(self, i: int) -> ExpressionTree:
        e = int(self.ends[i])
        t = ExpressionTree(self.nodes[i:e], validate=False)
        t._code = tuple(a[i:e] for a in self.code)
        return t

    def splice(self, i: int, donor: ExpressionTree, j: int = 0) -> ExpressionTree:
        """Replace the subtree at prefix index ``i`` by the subtree of ``donor`` at ``j``."""
        e = int(self.ends[i])
        f = int(donor.ends[j])
        t = ExpressionTree(self.nodes[:i] + donor.nodes[j:f] + self.nodes[e:], validate=False)
        t._code = tuple(np.concatenate((a[:i], b[j:f], a[e:]))
                        for a, b in zip(self.code, donor.code))
        return t

    def with_symbol(self, i: int, symbol: Symbol) -> ExpressionTree:
        if symbol.arity != self.nodes[i].arity:
            raise ValueError("replacement symbol must keep the arity")
        t = ExpressionTree(self.nodes[:i] + (symbol,) + self.nodes[i + 1:], validate=False)
        t._ends = self._ends
        t._internal = self._internal
        t._leaves = self._leaves
        ops, args = (a.copy() for a in self.code)
        ops[i] = symbol.opcode
        args[i] = symbol.arg
        t._code = (ops, args)
        return t


@njit(cache=True)
def _subtree_ends(ops, opcode_arity):
    n = ops.shape[0]
    ends = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    sp = 0
    for i in range(n - 1, -1, -1):
        a = opcode_arity[ops[i]]
        if a == 0:
            e = i + 1
        else:
            sp -= a
            e = stack[sp]  # end of the last child
        ends[i] = e
        stack[sp] = e
        sp += 1
    return ends


def is_well_formed(nodes: Sequence[Symbol]) -> bool:
    """True iff ``nodes`` is exactly one complete prefix tree."""
    open_slots = 1
    for s in nodes:
        if open_slots == 0:
            return False
        open_slots += s.arity - 1
    return open_slots == 0 and len(nodes) > 0


def node_at(tree: ExpressionTree, coord: NodeCoord) -> NodeView:
    return NodeView(tree, tree.index_of(coord))


def subtree_size(tree: ExpressionTree, coord: NodeCoord) -> int:
    i = tree.index_of(coord)
    return int(tree.ends[i]) - i


def replace_subtree(tree: ExpressionTree, coord: NodeCoord, sub: ExpressionTree) -> ExpressionTree:
    return tree.splice(tree.index_of(coord), sub)


def shape_signature(tree: ExpressionTree) -> tuple[int, ...]:
    # prefix order plus arities determines the shape uniquely
    return tuple(s.arity for s in tree.nodes)


def random_node(tree: ExpressionTree, rng: random.Random, internal_bias: float = 0.9) -> NodeCoord:
    return tree.coord_of(random_node_index(tree, rng, internal_bias))


def random_node_index(tree: ExpressionTree, rng: random.Random, internal_bias: float = 0.9) -> int:
    """Koza-style point choice, returned as a prefix index."""
    if len(tree.nodes) == 1:
        return 0
    pool = tree.internal_indices if rng.random() < internal_bias else tree.leaf_indices
    return int(pool[rng.randrange(len(pool))])


class NodeView:
    """Read-only handle to one node of a tree."""

    __slots__ = ("tree", "index")

    def __init__(self, tree: ExpressionTree, index: int):
        self.tree = tree
        self.index = index

    @property
    def symbol(self) -> Symbol:
        return self.tree.nodes[self.index]

    @property
    def arity(self) -> int:
        return self.symbol.arity

    @property
    def size(self) -> int:
        return int(self.tree.ends[self.index]) - self.index

    @property
    def children(self) -> list[NodeView]:
        return [NodeView(self.tree, j) for j in self.tree.children_of(self.index)]

    def subtree(self) -> ExpressionTree:
        return self.tree.subtree(self.index)

    def __repr__(self) -> str:
        return f"NodeView({self.symbol.name}, size={self.size})"


def render(tree: ExpressionTree) -> str:
    """Parenthesized prefix rendering, e.g. ``(ADD x1 (MUL x2 3.5))``."""
    parts: list[str] = []
    pending: list[int] = []
    for s in tree.nodes:
        if s.arity:
            parts.append("(" + s.name)
            pending.append(s.arity)
            continue
        parts.append(s.name)
        while pending:
            pending[-1] -= 1
            if pending[-1]:
                break
            pending.pop()
            parts[-1] += ")"
    return " ".join(parts)


def _tokens(text: str) -> Iterator[str]:
    for tok in text.replace("(", " ( ").replace(")", " ) ").split():
        yield tok


def parse(text: str, prims: PrimitiveSet | None = None) -> ExpressionTree:
    """Inverse of :func:`render`.

    Names are resolved against ``prims`` when given; otherwise any known
    primitive name is a function, numbers are constants, and ``x<k>`` is
    the variable with column ``k - 1``.
    """
    nodes: list[Symbol] = []
    toks = list(_tokens(text))
    pos = 0

    def resolve(tok: str) -> Symbol:
        if prims is not None:
            try:
                return prims.lookup(tok)
            except KeyError:
                pass
        if tok in PRIMITIVES:
            return Symbol.function(tok)
        try:
            return Symbol.constant(float(tok))
        except ValueError:
            pass
        if tok.startswith("x") and tok[1:].isdigit():
            return Symbol.variable(tok, int(tok[1:]) - 1)
        raise TreeParseError(f"unknown symbol {tok!r}")

    def expr():
        nonlocal pos
        if pos >= len(toks):
            raise TreeParseError("unexpected end of input")
        tok = toks[pos]
        pos += 1
        if tok == "(":
            if pos >= len(toks):
                raise TreeParseError("unexpected end of input")
            sym = resolve(toks[pos])
            pos += 1
            nodes.append(sym)
            for _ in range(sym.arity):
                expr()
            if pos >= len(toks) or toks[pos] != ")":
                raise TreeParseError(f"expected ')' after {sym.arity} arguments of {sym.name}")
            pos += 1
        elif tok == ")":
            raise TreeParseError("unexpected ')'")
        else:
            sym = resolve(tok)
            if sym.arity:
                raise TreeParseError(f"function {sym.name} used without arguments")
            nodes.append(sym)

    expr()
    if pos != len(toks):
        raise TreeParseError("trailing tokens")
    return ExpressionTree(nodes)
