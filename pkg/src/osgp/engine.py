"""Generational GP with strict offspring selection.

Each generation keeps the best individual and then fills the remaining
slots with children that are strictly better than the better of their
two parents. The number of evaluations spent on filling, divided by the
population size, is the generation's selection pressure; a generation
whose pressure exceeds the configured maximum ends the run.
"""

from __future__ import annotations

import bisect
import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

from .genops import CrossoverKind, crossover, ptc2, single_point_mutation
from .interp import Dataset, fitness
from .trees import ExpressionTree, PrimitiveSet, render

log = logging.getLogger(__name__)

PRESSURE = "max_selection_pressure"
BUDGET = "max_evaluations"


class EmptyPopulationError(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid parameter; ``field`` names the offending setting."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Individual:
    tree: ExpressionTree
    quality: float
    # quality of the better parent; None for initial and elite members
    parent_quality: float | None = None

    @property
    def size(self) -> int:
        return len(self.tree)


class Population:
    """Fixed-size generation. Member 0 of every generation after the first is the elite."""

    def __init__(self, members: list[Individual], generation: int = 0):
        if not members:
            raise EmptyPopulationError("population is empty")
        self.members = members
        self.generation = generation
        self._cum_weights: list[float] | None = None

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i: int) -> Individual:
        return self.members[i]

    @property
    def best_index(self) -> int:
        # min() keeps the first of equal keys, so ties go to the lowest index
        return min(range(len(self.members)), key=lambda i: self.members[i].quality)

    @property
    def best(self) -> Individual:
        return self.members[self.best_index]

    @property
    def average_tree_size(self) -> float:
        return sum(len(m.tree) for m in self.members) / len(self.members)

    def selection_weights(self) -> list[float]:
        """Linear weights ``worst_finite - quality``; non-finite members weigh 0."""
        finite = [m.quality for m in self.members if math.isfinite(m.quality)]
        if not finite:
            return [0.0] * len(self.members)
        worst = max(finite)
        return [worst - m.quality if math.isfinite(m.quality) else 0.0 for m in self.members]

    def cumulative_weights(self) -> list[float]:
        if self._cum_weights is None:
            acc, out = 0.0, []
            for w in self.selection_weights():
                acc += w
                out.append(acc)
            self._cum_weights = out
        return self._cum_weights


@dataclass(frozen=True)
class OsParams:
    population_size: int = 1000
    mutation_rate: float = 0.15
    crossover: CrossoverKind = CrossoverKind.STANDARD
    max_selection_pressure: float = 200.0
    max_evaluations: int = 1_000_000
    init_min_size: int = 3
    init_max_size: int = 50
    elitism_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "crossover", _parse_kind(self.crossover))
        if self.population_size < 2:
            raise ConfigError("population_size", "must be >= 2")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate", f"{self.mutation_rate} is not a probability")
        if not self.max_selection_pressure > 1.0:
            raise ConfigError("max_selection_pressure", "must be > 1")
        if self.max_evaluations < 1:
            raise ConfigError("max_evaluations", "must be positive")
        if not 1 <= self.init_min_size <= self.init_max_size:
            raise ConfigError("init_min_size", "need 1 <= init_min_size <= init_max_size")
        if self.elitism_count != 1:
            raise ConfigError("elitism_count", "only 1-elitism is supported")


def _parse_kind(kind) -> CrossoverKind:
    try:
        return CrossoverKind.parse(kind)
    except ValueError as e:
        raise ConfigError("crossover", str(e)) from None


@dataclass(frozen=True)
class GenerationLog:
    generation: int
    evaluations: int
    best_quality: float
    avg_tree_size: float
    selection_pressure: float


@dataclass
class RunLog:
    generations: list[GenerationLog]
    best_tree: str
    best_quality: float
    seed: int
    termination: str
    params: dict = field(default_factory=dict)
    problem: str = "custom"
    wall_time: float = 0.0

    @property
    def evaluations(self) -> int:
        return self.generations[-1].evaluations


def proportional_select(pop: Population, rng: random.Random) -> int:
    cum = pop.cumulative_weights()
    total = cum[-1]
    if total <= 0.0:
        return rng.randrange(len(pop))
    return min(bisect.bisect_right(cum, rng.random() * total), len(pop) - 1)


def select_parents(pop: Population, rng: random.Random) -> tuple[int, int]:
    """First parent fitness-proportional, second uniform at random."""
    if len(pop) < 2:
        raise EmptyPopulationError("parent selection needs at least 2 members")
    return proportional_select(pop, rng), rng.randrange(len(pop))


def try_create_offspring(pop: Population, params: OsParams, prims: PrimitiveSet,
                         ds: Dataset, rng: random.Random) -> tuple[Individual, bool]:
    """One crossover (+ optional mutation) and one evaluation."""
    i, j = select_parents(pop, rng)
    a, b = pop.members[i], pop.members[j]
    child = crossover(params.crossover, a.tree, b.tree, rng)
    if rng.random() < params.mutation_rate:
        child = single_point_mutation(child, rng, prims)
    q = fitness(child, ds)
    better_parent = min(a.quality, b.quality)
    return Individual(child, q, better_parent), q < better_parent


def run_generation(pop: Population, params: OsParams, prims: PrimitiveSet, ds: Dataset,
                   rng: random.Random, evaluations: int = 0
                   ) -> tuple[Population, GenerationLog, str | None]:
    """Fill the next generation by strict offspring selection.

    ``evaluations`` is the cumulative count before this generation. On
    termination the partial generation is dropped and ``pop`` is returned
    together with a log row that still accounts for the spent evaluations.
    """
    n = params.population_size
    members = [pop.best]
    spent = 0
    terminated = None
    while len(members) < n:
        if evaluations + spent >= params.max_evaluations:
            terminated = BUDGET
            break
        child, ok = try_create_offspring(pop, params, prims, ds, rng)
        spent += 1
        if ok:
            members.append(child)
        if len(members) < n and spent / n > params.max_selection_pressure:
            terminated = PRESSURE
            break
    out = pop if terminated else Population(members, pop.generation + 1)
    entry = GenerationLog(
        generation=pop.generation + 1,
        evaluations=evaluations + spent,
        best_quality=out.best.quality,
        avg_tree_size=out.average_tree_size,
        selection_pressure=spent / n,
    )
    return out, entry, terminated


def initialize(params: OsParams, prims: PrimitiveSet, ds: Dataset, rng: random.Random) -> Population:
    members = []
    for _ in range(params.population_size):
        tree = ptc2(rng, rng.randint(params.init_min_size, params.init_max_size), prims)
        members.append(Individual(tree, fitness(tree, ds)))
    return Population(members, 0)


def run(params: OsParams, prims: PrimitiveSet, ds: Dataset, seed: int, *,
        problem: str = "custom",
        on_generation: Callable[[Population], None] | None = None) -> RunLog:
    """Evolve until the selection-pressure cap or the evaluation budget is hit.

    Initial evaluations count toward the budget. ``on_generation`` sees
    every completed population, starting with generation 0.
    """
    started = time.perf_counter()
    rng = random.Random(seed)
    pop = initialize(params, prims, ds, rng)
    n = params.population_size
    evaluations = n
    logs = [GenerationLog(0, evaluations, pop.best.quality, pop.average_tree_size, evaluations / n)]
    if on_generation:
        on_generation(pop)

    termination = BUDGET
    while evaluations < params.max_evaluations:
        pop, entry, terminated = run_generation(pop, params, prims, ds, rng, evaluations)
        logs.append(entry)
        evaluations = entry.evaluations
        if terminated:
            termination = terminated
            break
        if on_generation:
            on_generation(pop)
        log.debug("gen %d evals %d best %.6g size %.1f pressure %.2f", entry.generation,
                  entry.evaluations, entry.best_quality, entry.avg_tree_size,
                  entry.selection_pressure)

    best = pop.best
    echo = asdict(params)
    echo["crossover"] = params.crossover.value
    return RunLog(
        generations=logs,
        best_tree=render(best.tree),
        best_quality=best.quality,
        seed=seed,
        termination=termination,
        params=echo,
        problem=problem,
        wall_time=time.perf_counter() - started,
    )
