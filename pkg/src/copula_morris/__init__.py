"""Dependence-aware Morris screening with copulas."""

from .copula import (
    CdfAccuracyError,
    CornerDistribution,
    DependenceError,
    DependenceModel,
    GaussianCopula,
    IndependenceCopula,
    build_dependence_model,
    corner_distribution,
)
from .effects import EffectSample, SensitivityReport, elementary_effects, measures
from .grid import ElementaryPath, GridConfig, build_path, count_paths, morris_step
from .sampler import SamplingPlan, build_plan, lhsd_blocks, rank_stats, sample_start_corner

__version__ = "0.1.0"
