"""Honest distributional random forests for conditional treatment effects."""

from .data import CAUSAL_WEIGHTED_MMD, PLAIN_MMD, Dataset, ForestConfig
from .forest import (
    CausalDRFModel,
    WeightBundle,
    aggregate_weights,
    draw_half_sample,
    fit,
)
from .inference import (
    TestResult,
    WitnessBand,
    confidence_band,
    h0_test,
    resample_stats,
    test_statistic,
    witness_eval,
)
from .kernel import (
    FourierFeatures,
    KernelMatrix,
    KernelSpec,
    fourier_embed,
    gaussian_kernel,
    kernel_matrix,
    median_heuristic,
    sample_fourier_features,
)
from .model_io import DataSchema, load_csv, load_model, save_model
from .simulation import (
    StudyReport,
    arm_laws,
    effect,
    eta,
    fit_two_drf,
    mae,
    motivational_example,
    propensity,
    run_study,
    simulate_dataset,
    true_witness,
    two_drf_weights,
)
from .tree import Tree, best_split, build_tree, group_split_weights, split_criterion, tree_weights

__all__ = [
    "CAUSAL_WEIGHTED_MMD",
    "PLAIN_MMD",
    "CausalDRFModel",
    "DataSchema",
    "Dataset",
    "ForestConfig",
    "FourierFeatures",
    "KernelMatrix",
    "KernelSpec",
    "StudyReport",
    "TestResult",
    "Tree",
    "WeightBundle",
    "WitnessBand",
    "aggregate_weights",
    "arm_laws",
    "best_split",
    "build_tree",
    "confidence_band",
    "draw_half_sample",
    "effect",
    "eta",
    "fit",
    "fit_two_drf",
    "fourier_embed",
    "gaussian_kernel",
    "group_split_weights",
    "h0_test",
    "kernel_matrix",
    "load_csv",
    "load_model",
    "mae",
    "median_heuristic",
    "motivational_example",
    "propensity",
    "resample_stats",
    "run_study",
    "sample_fourier_features",
    "save_model",
    "simulate_dataset",
    "split_criterion",
    "test_statistic",
    "tree_weights",
    "true_witness",
    "two_drf_weights",
    "witness_eval",
]

__version__ = "0.1.0"
