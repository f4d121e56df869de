"""Hyperparameter optimization: configuration spaces, SMBO and the CV objective."""

from __future__ import annotations

import numpy as np

from .objective import FeatureCache, cv_objective, stratified_folds
from .smbo import Budget, expected_improvement, history_to_csv, random_search, smbo_optimize
from .space import (ALL_FAMILIES, CLASSIFIERS, ConfigurationSpace, Parameter, PipelineConfig, PipelineFamily,
                    TrialRecord, default_space)


def sample_config(space: ConfigurationSpace, rng: np.random.Generator) -> PipelineConfig:
    """Uniform random pipeline configuration with the Savitzky-Golay order repaired."""
    return PipelineConfig.from_dict(space.sample(rng))


__all__ = [
    "ALL_FAMILIES", "CLASSIFIERS", "Budget", "ConfigurationSpace", "FeatureCache", "Parameter", "PipelineConfig",
    "PipelineFamily", "TrialRecord", "cv_objective", "default_space", "expected_improvement", "history_to_csv",
    "random_search", "sample_config", "smbo_optimize", "stratified_folds",
]
