"""Witness evaluation, the distributional H0 test, and simultaneous bands.

The squared RKHS norm of the estimated conditional treatment embedding is the
quadratic form w^T K w in the aggregate weights; the B per-group deviations
(w_b - w)^T K (w_b - w) are resampling draws whose empirical (1-alpha)
quantile q calibrates both the test (reject when w^T K w > q) and the
constant-width confidence band tau_hat(y) +/- sqrt(q * C), with
C = sup_y k(y, y) (1 for the Gaussian kernel).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .forest import CausalDRFModel, WeightBundle, aggregate_weights
from .kernel import KernelMatrix, KernelSpec, kernel_cross

DEFAULT_GRID_SIZE = 201


@dataclass
class TestResult:
    statistic: float
    quantile_q: float
    resample_values: np.ndarray
    alpha: float
    reject: bool


@dataclass
class WitnessBand:
    grid: np.ndarray  # (g, d)
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    half_width: float
    test: TestResult


def witness_eval(
    weights: np.ndarray,
    Y_train: np.ndarray,
    spec: KernelSpec,
    grid: np.ndarray,
) -> np.ndarray:
    """Witness values sum_i w_i k(Y_i, y) at each grid point."""
    weights = np.asarray(weights, dtype=np.float64).ravel()
    Y_train = np.atleast_2d(np.asarray(Y_train, dtype=np.float64))
    if weights.shape[0] != Y_train.shape[0]:
        raise DimensionMismatch(
            f"{weights.shape[0]} weights for {Y_train.shape[0]} training outcomes"
        )
    grid = _as_grid(grid, spec.outcome_dim)
    support = np.flatnonzero(weights)
    if support.size == 0:
        return np.zeros(grid.shape[0])
    return kernel_cross(grid, Y_train[support], spec) @ weights[support]


def test_statistic(w: np.ndarray, K: KernelMatrix) -> float:
    """w^T K w, clamped to be nonnegative."""
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape[0] != K.values.shape[0]:
        raise DimensionMismatch(
            f"{w.shape[0]} weights for a {K.values.shape[0]}-row kernel matrix"
        )
    return max(0.0, float(w @ K.values @ w))


def resample_stats(bundle: WeightBundle, K: KernelMatrix) -> np.ndarray:
    """Quadratic form of each group's deviation from the aggregate weights."""
    diffs = bundle.group_w - bundle.aggregate_w[None, :]
    if diffs.shape[1] != K.values.shape[0]:
        raise DimensionMismatch(
            f"{diffs.shape[1]} weights for a {K.values.shape[0]}-row kernel matrix"
        )
    vals = np.einsum("bi,ij,bj->b", diffs, K.values, diffs)
    return np.maximum(vals, 0.0)


def empirical_quantile(values: np.ndarray, alpha: float) -> float:
    """ceil((1-alpha)*B)-th order statistic of the resampled values."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    rank = math.ceil((1.0 - alpha) * values.shape[0])
    rank = min(max(rank, 1), values.shape[0])
    return float(values[rank - 1])


def _support_kernel(bundle: WeightBundle, Y_train: np.ndarray, spec: KernelSpec):
    """Kernel matrix restricted to rows any weight vector touches."""
    touched = np.flatnonzero(
        (bundle.aggregate_w != 0) | (bundle.group_w != 0).any(axis=0)
    )
    sub = kernel_cross(Y_train[touched], Y_train[touched], spec)
    sub = 0.5 * (sub + sub.T)
    np.fill_diagonal(sub, 1.0)
    return touched, KernelMatrix(values=sub, spec=spec)


def h0_test_from_bundle(
    bundle: WeightBundle, Y_train: np.ndarray, spec: KernelSpec, alpha: float
) -> TestResult:
    """Test of equal conditional outcome laws from precomputed weights."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    B = bundle.group_w.shape[0]
    if B * alpha < 1.0:
        warnings.warn(
            f"alpha={alpha} with only {B} groups cannot resolve the "
            f"(1-alpha) quantile; the max draw is used",
            stacklevel=2,
        )
    touched, K = _support_kernel(bundle, Y_train, spec)
    sub_bundle = WeightBundle(
        aggregate_w=bundle.aggregate_w[touched],
        group_w=bundle.group_w[:, touched],
        query_point=bundle.query_point,
    )
    stat = test_statistic(sub_bundle.aggregate_w, K)
    draws = resample_stats(sub_bundle, K)
    q = empirical_quantile(draws, alpha)
    return TestResult(
        statistic=stat,
        quantile_q=q,
        resample_values=draws,
        alpha=alpha,
        reject=stat > q,
    )


def h0_test(model: CausalDRFModel, x: np.ndarray, alpha: float | None = None) -> TestResult:
    """Reject equality of the conditional treatment/control laws at ``x``
    when the squared RKHS norm of the estimate exceeds the resampled
    (1-alpha) quantile."""
    alpha = model.config.significance_alpha if alpha is None else alpha
    bundle = aggregate_weights(model, x)
    return h0_test_from_bundle(bundle, model.dataset.Y, model.kernel_spec, alpha)


def default_grid(Y_train: np.ndarray, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Equally spaced grid spanning [min, max] of a univariate outcome."""
    Y_train = np.atleast_2d(np.asarray(Y_train, dtype=np.float64))
    if Y_train.shape[1] != 1:
        raise ValueError("default grids exist only for univariate outcomes; pass a grid")
    return np.linspace(Y_train.min(), Y_train.max(), grid_size)[:, None]


def _as_grid(grid: np.ndarray, d: int) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[1] != d:
        raise DimensionMismatch(f"grid points have dim {grid.shape[1]}, expected {d}")
    return grid


def band_from_bundle(
    bundle: WeightBundle,
    Y_train: np.ndarray,
    spec: KernelSpec,
    grid: np.ndarray,
    alpha: float,
) -> WitnessBand:
    """Simultaneous band from precomputed weights (shared by both methods)."""
    grid = _as_grid(grid, spec.outcome_dim)
    test = h0_test_from_bundle(bundle, Y_train, spec, alpha)
    estimate = witness_eval(bundle.aggregate_w, Y_train, spec, grid)
    half = math.sqrt(test.quantile_q * spec.sup_bound)
    return WitnessBand(
        grid=grid,
        estimate=estimate,
        lower=estimate - half,
        upper=estimate + half,
        half_width=half,
        test=test,
    )


def confidence_band(
    model: CausalDRFModel,
    x: np.ndarray,
    grid: np.ndarray | None = None,
    alpha: float | None = None,
) -> WitnessBand:
    """Simultaneous (1-alpha) confidence band for the witness function at ``x``."""
    alpha = model.config.significance_alpha if alpha is None else alpha
    if grid is None:
        grid = default_grid(model.dataset.Y)
    bundle = aggregate_weights(model, x)
    return band_from_bundle(bundle, model.dataset.Y, model.kernel_spec, grid, alpha)
