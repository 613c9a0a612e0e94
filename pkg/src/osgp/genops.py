"""Tree creation and variation operators.

All operators take parents by value and return a fresh tree; parents are
never modified. Random choices go through a :class:`random.Random`
instance so a seeded stream makes every operator a pure function.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .trees import (
    ExpressionTree,
    NodeCoord,
    PrimitiveSet,
    Symbol,
    random_node_index,
)

INTERNAL_BIAS = 0.9


class CrossoverKind(str, enum.Enum):
    STANDARD = "standard"
    ONEPOINT = "onepoint"
    UNIFORM = "uniform"
    SIZEFAIR = "sizefair"
    HOMOLOGOUS = "homologous"
    MIXED = "mixed"

    @classmethod
    def parse(cls, name: str) -> CrossoverKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown crossover {name!r}; valid kinds: {valid}") from None


# ---------------------------------------------------------------------------
# initialization and mutation


def ptc2(rng: random.Random, target_size: int, prims: PrimitiveSet) -> ExpressionTree:
    """Probabilistic tree creation 2.

    Expands uniformly-chosen open slots with random functions until the
    node count plus open slots reaches ``target_size``, then closes every
    open slot with a terminal. The result has between ``target_size`` and
    ``target_size + max_arity - 1`` nodes.
    """
    target_size = max(1, int(target_size))
    if target_size == 1:
        return ExpressionTree([prims.random_terminal(rng)], validate=False)

    def new_node(sym: Symbol) -> list:
        return [sym, [None] * sym.arity]

    root = new_node(prims.random_function(rng))
    slots = [(root[1], k) for k in range(root[0].arity)]
    count = 1
    while count + len(slots) < target_size:
        k = rng.randrange(len(slots))
        slots[k], slots[-1] = slots[-1], slots[k]
        children, pos = slots.pop()
        node = new_node(prims.random_function(rng))
        children[pos] = node
        count += 1
        slots.extend((node[1], q) for q in range(node[0].arity))
    for children, pos in slots:
        children[pos] = [prims.random_terminal(rng), []]

    nodes = []
    stack = [root]
    while stack:
        sym, children = stack.pop()
        nodes.append(sym)
        stack.extend(reversed(children))
    return ExpressionTree(nodes, validate=False)


def single_point_mutation(tree: ExpressionTree, rng: random.Random, prims: PrimitiveSet,
                          branch: str | None = None) -> ExpressionTree:
    """Exchange one function symbol (same arity) or one terminal symbol.

    ``branch`` forces "function" or "terminal"; by default each is chosen
    with probability 0.5. The shape of the tree never changes. When the
    chosen class offers no alternative the other class is tried; if neither
    does, the input tree itself is returned (callers can test identity).
    """
    nodes = tree.nodes
    functions = tree.internal_indices
    terminals = tree.leaf_indices
    if branch is None:
        branch = "function" if rng.random() < 0.5 else "terminal"
    order = ["function", "terminal"] if branch == "function" else ["terminal", "function"]

    for cls in order:
        if cls == "function":
            if not len(functions):
                continue
            i = int(functions[rng.randrange(len(functions))])
            alts = [f for f in prims.functions_of_arity(nodes[i].arity) if f != nodes[i]]
            if alts:
                return tree.with_symbol(i, alts[rng.randrange(len(alts))])
        else:
            i = int(terminals[rng.randrange(len(terminals))])
            variables = [v for v in prims.variables if v != nodes[i]]
            n_opts = len(variables) + (prims.constants is not None)
            if n_opts:
                k = rng.randrange(n_opts)
                sym = variables[k] if k < len(variables) else prims.constants.sample(rng)
                return tree.with_symbol(i, sym)
    return tree


# ---------------------------------------------------------------------------
# common region


@dataclass
class CommonRegion:
    """Position-paired nodes of two trees reachable while arities match.

    ``index_pairs`` holds ``(prefix index in a, prefix index in b, interior)``
    in prefix order of ``a``.
    """

    a: ExpressionTree
    b: ExpressionTree
    index_pairs: list[tuple[int, int, bool]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.index_pairs)

    @property
    def pairs(self) -> list[tuple[NodeCoord, NodeCoord, bool]]:
        ca, cb = self.a.coords(), self.b.coords()
        return [(ca[i], cb[j], interior) for i, j, interior in self.index_pairs]


def common_region(a: ExpressionTree, b: ExpressionTree) -> CommonRegion:
    region = CommonRegion(a, b)
    stack = [(0, 0)]
    while stack:
        i, j = stack.pop()
        arity = a.nodes[i].arity
        interior = arity >= 1 and arity == b.nodes[j].arity
        region.index_pairs.append((i, j, interior))
        if interior:
            stack.extend(reversed(list(zip(a.children_of(i), b.children_of(j)))))
    return region


# ---------------------------------------------------------------------------
# crossovers


def crossover_standard(p1: ExpressionTree, p2: ExpressionTree, rng: random.Random,
                       internal_bias: float = INTERNAL_BIAS) -> ExpressionTree:
    i = random_node_index(p1, rng, internal_bias)
    j = random_node_index(p2, rng, internal_bias)
    return p1.splice(i, p2, j)


def crossover_onepoint(p1: ExpressionTree, p2: ExpressionTree, rng: random.Random) -> ExpressionTree:
    pairs = common_region(p1, p2).index_pairs
    i, j, _ = pairs[rng.randrange(len(pairs))]
    return p1.splice(i, p2, j)


def crossover_uniform(p1: ExpressionTree, p2: ExpressionTree, rng: random.Random,
                      swap_prob: float = 0.5) -> ExpressionTree:
    """Per common-region position, take p2's material with probability ``swap_prob``.

    Interior positions exchange only the symbol; boundary positions
    exchange the whole subtree.
    """
    n1, n2 = p1.nodes, p2.nodes
    e1, e2 = p1.ends, p2.ends
    out: list[Symbol] = []
    stack = [(0, 0)]
    while stack:
        i, j = stack.pop()
        take = rng.random() < swap_prob
        arity = n1[i].arity
        if arity and arity == n2[j].arity:
            out.append(n2[j] if take else n1[i])
            stack.extend(reversed(list(zip(p1.children_of(i), p2.children_of(j)))))
        elif take:
            out.extend(n2[j:e2[j]])
        else:
            out.extend(n1[i:e1[i]])
    return ExpressionTree(out, validate=False)


def _size_groups(p2: ExpressionTree, l: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prefix indices of p2's subtrees smaller than, equal to, and larger than ``l`` (up to 2l+1)."""
    sizes = p2.ends - np.arange(len(p2))
    return (np.flatnonzero(sizes < l), np.flatnonzero(sizes == l),
            np.flatnonzero((sizes > l) & (sizes <= 2 * l + 1)))


def _choose_group(rng: random.Random, p2: ExpressionTree, l: int) -> np.ndarray:
    """Pick the candidate group of p2 so that the expected size change is zero.

    With both smaller and larger candidates available, the equal-size group
    gets probability ``|equal| / N`` and the rest is split between smaller
    and larger in inverse proportion to their mean size differences. When
    only one side exists no zero-mean mix is possible: equal-size
    candidates are used if there are any, otherwise the candidates closest
    in size to ``l``.
    """
    minus, zero, plus = _size_groups(p2, l)
    ends = p2.ends
    if len(minus) and len(plus):
        n = len(minus) + len(zero) + len(plus)
        p_zero = len(zero) / n
        mean_dec = l - float(np.mean(ends[minus] - minus))
        mean_inc = float(np.mean(ends[plus] - plus)) - l
        p_plus = (1.0 - p_zero) * mean_dec / (mean_inc + mean_dec)
        u = rng.random()
        if u < p_zero:
            return zero
        return plus if u < p_zero + p_plus else minus
    if len(zero):
        return zero
    side = minus if len(minus) else plus
    assert len(side), "leaves always qualify"
    gap = np.abs(ends[side] - side - l)
    return side[gap == gap.min()]


def crossover_sizefair(p1: ExpressionTree, p2: ExpressionTree, rng: random.Random,
                       internal_bias: float = INTERNAL_BIAS) -> ExpressionTree:
    i = random_node_index(p1, rng, internal_bias)
    group = _choose_group(rng, p2, int(p1.ends[i]) - i)
    return p1.splice(i, p2, int(group[rng.randrange(len(group))]))


def path_distance(c1: NodeCoord, c2: NodeCoord) -> int:
    """Total length of the two path suffixes after their common prefix."""
    k = 0
    for x, y in zip(c1, c2):
        if x != y:
            break
        k += 1
    return len(c1) + len(c2) - 2 * k


def crossover_homologous(p1: ExpressionTree, p2: ExpressionTree, rng: random.Random,
                         internal_bias: float = INTERNAL_BIAS) -> ExpressionTree:
    i = random_node_index(p1, rng, internal_bias)
    group = _choose_group(rng, p2, int(p1.ends[i]) - i)
    target = p1.coord_of(i)
    coords = p2.coords()
    best: list[int] = []
    best_d = None
    for j in group.tolist():
        d = path_distance(target, coords[j])
        if best_d is None or d < best_d:
            best, best_d = [j], d
        elif d == best_d:
            best.append(j)
    j = best[0] if len(best) == 1 else best[rng.randrange(len(best))]
    return p1.splice(i, p2, j)


CONCRETE_KINDS = (
    CrossoverKind.STANDARD,
    CrossoverKind.ONEPOINT,
    CrossoverKind.UNIFORM,
    CrossoverKind.SIZEFAIR,
    CrossoverKind.HOMOLOGOUS,
)


def crossover_mixed(p1: ExpressionTree, p2: ExpressionTree, rng: random.Random,
                    record: list | None = None) -> ExpressionTree:
    """Delegate to one of the five concrete operators drawn uniformly.

    The drawn kind is appended to ``record`` when one is given.
    """
    kind = CONCRETE_KINDS[rng.randrange(len(CONCRETE_KINDS))]
    if record is not None:
        record.append(kind)
    return CROSSOVERS[kind](p1, p2, rng)


CROSSOVERS: dict[CrossoverKind, Callable[..., ExpressionTree]] = {
    CrossoverKind.STANDARD: crossover_standard,
    CrossoverKind.ONEPOINT: crossover_onepoint,
    CrossoverKind.UNIFORM: crossover_uniform,
    CrossoverKind.SIZEFAIR: crossover_sizefair,
    CrossoverKind.HOMOLOGOUS: crossover_homologous,
    CrossoverKind.MIXED: crossover_mixed,
}


def crossover(kind: CrossoverKind | str, p1: ExpressionTree, p2: ExpressionTree,
              rng: random.Random) -> ExpressionTree:
    return CROSSOVERS[CrossoverKind.parse(kind)](p1, p2, rng)
