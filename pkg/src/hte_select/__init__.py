"""Validation criteria for selecting CATE estimators, benchmarked on a knob-driven simulation."""

from __future__ import annotations

from .core import Dataset, Method, Strategy, derive_rng, derive_seed
from .criteria import CriterionSpec, ValidationContext, default_criteria, select_best
from .dgp import DgpConfig, InputRepr, generate_dataset, load_covariates, synth_table
from .harness import CellResult, ExperimentPlan, aggregate, congeniality_stats, run_cell, run_plan
from .meta_learners import CateEstimator, cross_fit_nuisances, fit_cate_estimator

__version__ = "0.1.0"

__all__ = [
    "CateEstimator", "CellResult", "CriterionSpec", "Dataset", "DgpConfig", "ExperimentPlan",
    "InputRepr", "Method", "Strategy", "ValidationContext", "aggregate", "congeniality_stats",
    "cross_fit_nuisances", "default_criteria", "derive_rng", "derive_seed", "fit_cate_estimator",
    "generate_dataset", "load_covariates", "run_cell", "run_plan", "select_best", "synth_table",
]
