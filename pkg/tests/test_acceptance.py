"""Acceptance criteria.

Each test prints one ``CRITERION n: PASS|FAIL`` line (collected in the
terminal summary) and then asserts. The desk-scale Poly-10 runs are shared
through module fixtures; together they take several minutes on one core.
"""

import math
import random
import statistics
import time
from collections import Counter

import numpy as np
import pytest

from osgp import engine, experiment, problems
from osgp.engine import PRESSURE
from osgp.experiment import BatchSpec, RunConfig, batch, emit_logs, execute, read_log_csv
from osgp.genops import (
    CONCRETE_KINDS, common_region, crossover_mixed, crossover_sizefair, crossover_uniform, ptc2,
)
from osgp.interp import fitness
from osgp.trees import PrimitiveSet, node_at, random_node_index, shape_signature

import conftest
from conftest import random_trees

POP = 100
SEEDS = (1, 2, 3, 4, 5)


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def desk_config(kind, seed, budget, out):
    return RunConfig(problem="poly10", population_size=POP, crossover=kind, seed=seed,
                     max_evaluations=budget, output_dir=str(out)).validate()


class Audit:
    """Records every offspring's parents independently of the engine's bookkeeping."""

    def __init__(self, monkeypatch):
        self.parents: dict[int, float] = {}
        self.pending: tuple[float, float] | None = None
        self.checked = 0
        self.violations = 0
        self.refit_mismatch = 0
        real_select, real_try = engine.select_parents, engine.try_create_offspring

        def select(pop, rng):
            i, j = real_select(pop, rng)
            self.pending = (pop.members[i].quality, pop.members[j].quality)
            return i, j

        def attempt(pop, params, prims, ds, rng):
            child, ok = real_try(pop, params, prims, ds, rng)
            self.parents[id(child)] = min(self.pending)
            return child, ok

        monkeypatch.setattr(engine, "select_parents", select)
        monkeypatch.setattr(engine, "try_create_offspring", attempt)

    def on_generation(self, ds):
        def check(pop):
            if pop.generation == 0:
                return
            for m in pop.members[1:]:
                self.checked += 1
                if not m.quality < self.parents[id(m)]:
                    self.violations += 1
                # spot-check cached qualities against a fresh evaluation
                if self.checked % 10 == 0 and fitness(type(m.tree)(m.tree.nodes), ds) != m.quality:
                    self.refit_mismatch += 1
            self.parents.clear()
        return check


class Tracker:
    """Per-run population statistics gathered through the generation callback."""

    def __init__(self):
        self.gen0_size = None
        self.gen1_shapes = None
        self.last = None

    def __call__(self, pop):
        if pop.generation == 0:
            self.gen0_size = pop.average_tree_size
        if pop.generation == 1:
            self.gen1_shapes = len({shape_signature(m.tree) for m in pop.members})
        self.last = pop

    @property
    def final_shapes(self):
        return len({shape_signature(m.tree) for m in self.last.members})


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Poly-10, pop 100, 200 000 evaluations, seeds 1-5, standard and one-point."""
    out = tmp_path_factory.mktemp("desk")
    runs = {}
    for kind in ("standard", "onepoint"):
        started = time.perf_counter()
        runs[kind] = []
        for seed in SEEDS:
            tracker = Tracker()
            cfg = desk_config(kind, seed, 200_000, out)
            log = execute(cfg, on_generation=tracker)
            runs[kind].append((log, tracker, emit_logs(log, out)))
        runs[kind + "_time"] = time.perf_counter() - started
    return runs


def test_criterion_01_strict_offspring_selection(tmp_path, monkeypatch):
    audit = Audit(monkeypatch)
    started = time.perf_counter()
    for seed in (1, 2, 3):
        cfg = desk_config("standard", seed, 100_000, tmp_path)
        ds = experiment.build_dataset(cfg)
        execute(cfg, on_generation=audit.on_generation(ds))
    elapsed = time.perf_counter() - started
    ok = (audit.checked > 0 and audit.violations == 0 and audit.refit_mismatch == 0
          and elapsed < 120)
    report(1, ok, f"{audit.checked} accepted members audited, {audit.violations} not strictly "
                  f"better than their better parent, {audit.refit_mismatch} quality mismatches "
                  f"on re-evaluation, {elapsed:.0f}s (limit 120s)")


def test_criterion_02_selection_pressure_definition(desk_runs):
    rows = bad = 0
    for kind in ("standard", "onepoint"):
        for _, _, path in desk_runs[kind]:
            gens = read_log_csv(path)
            prev = 0
            for g in gens:
                spent = g.evaluations - prev
                prev = g.evaluations
                rows += 1
                if g.selection_pressure != spent / POP or round(g.selection_pressure * POP) != spent:
                    bad += 1
    report(2, rows > 0 and bad == 0,
           f"{rows} logged generations, {bad} where pressure x population != evaluations")


def test_criterion_03_poly10_quality_trend(desk_runs):
    ratios = []
    for log, _, _ in desk_runs["standard"]:
        ratios.append(log.generations[0].best_quality / log.generations[-1].best_quality)
    hits = sum(r >= 100 for r in ratios)
    elapsed = desk_runs["standard_time"]
    report(3, hits >= 4 and elapsed < 300,
           f"best-MSE reduction per seed {[round(r, 1) for r in ratios]}, {hits}/5 seeds >= 100x "
           f"(need 4), {elapsed:.0f}s (limit 300s)")


def test_criterion_04_size_growth_contrast(desk_runs):
    def sizes(kind):
        gen0 = statistics.median(t.gen0_size for _, t, _ in desk_runs[kind])
        final = statistics.median(log.generations[-1].avg_tree_size for log, _, _ in desk_runs[kind])
        return gen0, final
    s0, s1 = sizes("standard")
    o0, o1 = sizes("onepoint")
    elapsed = desk_runs["standard_time"] + desk_runs["onepoint_time"]
    ok = s1 >= 3 * s0 and o1 <= 2 * o0 and elapsed < 600
    report(4, ok, f"standard median avg size {s0:.1f} -> {s1:.1f} ({s1 / s0:.1f}x, need >= 3x); "
                  f"onepoint {o0:.1f} -> {o1:.1f} ({o1 / o0:.2f}x, need <= 2x); "
                  f"{elapsed:.0f}s (limit 600s)")


def test_criterion_05_shape_freeze(desk_runs):
    details, ok = [], True
    for log, tracker, _ in desk_runs["onepoint"]:
        run_ok = tracker.final_shapes < tracker.gen1_shapes and log.termination == PRESSURE
        ok &= run_ok
        details.append(f"{tracker.gen1_shapes}->{tracker.final_shapes} shapes/{log.termination}")
    report(5, ok, "; ".join(details))


def test_criterion_06_sizefair_statistics():
    prims = PrimitiveSet.build(problems.ARITHMETIC, [f"x{i}" for i in range(1, 11)])
    rng = random.Random(2024)
    pool = []
    while len(pool) < 2000:
        t = ptc2(rng, rng.randint(20, 50), prims)
        if 20 <= len(t) <= 50:
            pool.append(t)
    started = time.perf_counter()
    n, bound_ok, changes = 100_000, 0, 0
    for _ in range(n):
        p1, p2 = rng.choice(pool), rng.choice(pool)
        state = rng.getstate()
        child = crossover_sizefair(p1, p2, rng)
        # replay the crossover point draw to recover l
        replay = random.Random()
        replay.setstate(state)
        i = random_node_index(p1, replay, 0.9)
        l = int(p1.ends[i]) - i
        inserted = len(child) - len(p1) + l
        bound_ok += 1 <= inserted <= 2 * l + 1
        changes += len(child) - len(p1)
    elapsed = time.perf_counter() - started
    mean = changes / n
    report(6, bound_ok == n and -0.5 <= mean <= 0.5 and elapsed < 60,
           f"size bound held in {bound_ok}/{n}, mean size change {mean:+.3f} (need [-0.5, 0.5]), "
           f"{elapsed:.0f}s (limit 60s)")


def _brute_region(a, b, path=()):
    na, nb = node_at(a, path), node_at(b, path)
    interior = na.arity >= 1 and na.arity == nb.arity
    out = [(path, path, interior)]
    if interior:
        for k in range(na.arity):
            out += _brute_region(a, b, path + (k,))
    return out


def test_criterion_07_common_region_oracle():
    prims = PrimitiveSet.build(problems.EXTENDED, ["x1", "x2", "x3"])
    trees = random_trees(prims, 500, 1, 40, seed=77)
    rng = random.Random(77)
    same = 0
    for _ in range(1000):
        a, b = rng.choice(trees), rng.choice(trees)
        same += common_region(a, b).pairs == _brute_region(a, b)
    report(7, same == 1000, f"{same}/1000 random pairs match the recursive oracle exactly")


def test_criterion_08_uniform_extremes():
    prims = PrimitiveSet.build(problems.EXTENDED, ["x1", "x2", "x3"])
    trees = random_trees(prims, 500, 1, 40, seed=88)
    rng = random.Random(88)
    keep = take = 0
    for _ in range(1000):
        p1, p2 = rng.choice(trees), rng.choice(trees)
        keep += crossover_uniform(p1, p2, rng, swap_prob=0.0) == p1
        take += crossover_uniform(p1, p2, rng, swap_prob=1.0) == p2
    report(8, keep == take == 1000, f"all-keep -> p1 in {keep}/1000, all-take -> p2 in {take}/1000")


def test_criterion_09_determinism(tmp_path):
    base = RunConfig(problem="poly10", population_size=50, max_evaluations=5000, seed=11)
    single = []
    for rep in ("a", "b"):
        log = execute(base.replace(crossover="mixed"))
        single.append(emit_logs(log, tmp_path / rep).read_bytes())
    outputs = []
    for workers, rep in ((1, "serial"), (2, "parallel"), (2, "parallel2")):
        spec = BatchSpec(base.replace(output_dir=str(tmp_path / rep)),
                         kinds=["standard", "mixed"], repetitions=2, workers=workers)
        results, _ = batch(spec)
        outputs.append({r.csv_path.name: r.csv_path.read_bytes() for r in results})
    ok = (single[0] == single[1] and outputs[0] == outputs[1] == outputs[2]
          and outputs[0]["poly10_mixed_11.csv"] == single[0])
    report(9, ok, "repeated run CSVs identical; serial, parallel and repeated parallel batches "
                  f"identical over {len(outputs[0])} files")


def test_criterion_10_benchmark_generators():
    ds = problems.gen_poly10(np.random.default_rng(10), 10_000)
    x = ds.data[:, :10]
    expected = (x[:, 0] * x[:, 1] + x[:, 2] * x[:, 3] + x[:, 4] * x[:, 5]
                + x[:, 0] * x[:, 6] * x[:, 8] + x[:, 2] * x[:, 5] * x[:, 9])
    poly_ok = bool(np.array_equal(expected, ds.targets))
    s = problems.gen_mackey_glass(2000)
    mg_ok = bool(np.all(np.isfinite(s)) and s.min() > 0 and s.max() < 2 and s.var() > 0)
    emb = problems.lag_embed(s)
    t = np.arange(128, 128 + 928)
    lag_ok = emb.data.shape == (928, 9) and all(
        np.array_equal(emb.data[:, j], s[t - lag]) for j, lag in enumerate(problems.MG_LAGS)
    ) and np.array_equal(emb.targets, s[t])
    report(10, poly_ok and mg_ok and lag_ok,
           f"poly10 identity exact: {poly_ok}; Mackey-Glass range ({s.min():.3f}, {s.max():.3f}), "
           f"variance {s.var():.4f}; lag embedding {emb.data.shape} with lags "
           f"{list(problems.MG_LAGS)}: {lag_ok}")


def test_criterion_11_mixed_dispatch():
    prims = PrimitiveSet.build(problems.ARITHMETIC, ["x1", "x2", "x3"])
    trees = random_trees(prims, 200, 1, 30, seed=111)
    rng = random.Random(111)
    record = []
    for _ in range(50_000):
        crossover_mixed(rng.choice(trees), rng.choice(trees), rng, record)
    counts = Counter(record)
    freqs = {k.value: counts[k] / 50_000 for k in CONCRETE_KINDS}
    ok = len(record) == 50_000 and all(math.fabs(f - 0.2) <= 0.01 for f in freqs.values())
    report(11, ok, ", ".join(f"{k} {f:.4f}" for k, f in freqs.items()))
