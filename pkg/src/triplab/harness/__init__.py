"""Experiment harness: declarative configs, seeded runs, plot-ready output."""

from .config import BudgetSpec, DataSpec, ExperimentSpec, budget, load_spec
from .runner import run_experiment

__all__ = [
    "BudgetSpec",
    "DataSpec",
    "ExperimentSpec",
    "budget",
    "load_spec",
    "run_experiment",
]
