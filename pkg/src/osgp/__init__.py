"""Genetic programming with strict offspring selection."""

from .engine import ConfigError, GenerationLog, OsParams, Population, RunLog, run
from .genops import CrossoverKind, common_region, crossover
from .interp import Dataset, eval_tree, fitness
from .trees import ExpressionTree, PrimitiveSet, Symbol, parse, render

__all__ = [
    "ConfigError", "CrossoverKind", "Dataset", "ExpressionTree", "GenerationLog", "OsParams",
    "Population", "PrimitiveSet", "RunLog", "Symbol", "common_region", "crossover", "eval_tree",
    "fitness", "parse", "render", "run",
]
