"""Simulation laboratory: benchmark and toy data-generating processes,
Monte Carlo ground-truth witness functions, and the MAE / simultaneous
coverage study comparing the causal forest against two separately fitted
plain forests.

Benchmark regimes (ids "1".."4", p = 5, X ~ Unif(0,1)^5):

    Y | W, X ~ N(2 X_3 - 1 + (W - 0.5) t(X), 1)

with propensity e(X) = 0.5 (regimes 1, 3) or 0.25 (1 + beta_{2,4}(X_3))
(regimes 2, 4) and effect t(X) = 0 (regimes 1, 2) or eta(X_1) eta(X_2)
(regimes 3, 4), eta(x) = 1 + (1 + exp(-20 (x - 1/3)))^-1.

Toy regimes (ids "m1".."m4", p = 5, X ~ Unif(2,3)^5, P(W=1) = 0.5) vary only
the conditional outcome laws: control is always N(0,1) while treatment is
N(0,1), N(x_1,1), N(0,1/x_1^2), or N(x_1, x_1^2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .data import PLAIN_MMD, Dataset, ForestConfig
from .errors import LengthMismatch
from .forest import WeightBundle, aggregate_weights, fit, num_threads
from .inference import band_from_bundle
from .kernel import KernelSpec, kernel_cross, median_heuristic

BENCHMARK_REGIMES = ("1", "2", "3", "4")
TOY_REGIMES = ("m1", "m2", "m3", "m4")
BENCHMARK_TEST_POINT = np.array([0.7, 0.3, 0.5, 0.68, 0.43])
TOY_TEST_POINT = np.full(5, 2.5)
TRUE_WITNESS_DRAWS = 8000
NUM_COVARIATES = 5

METHOD_CAUSAL = "causal_drf"
METHOD_TWO_DRF = "two_drf"


def eta(x):
    """Effect factor 1 + logistic(20 (x - 1/3)); eta(1/3) = 1.5."""
    return 1.0 + 1.0 / (1.0 + np.exp(-20.0 * (x - 1.0 / 3.0)))


def beta24_density(x):
    """Beta(2, 4) density 20 x (1 - x)^3 on [0, 1]."""
    return 20.0 * x * (1.0 - x) ** 3


def _check_regime(regime: str) -> str:
    if regime not in BENCHMARK_REGIMES + TOY_REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    return regime


def propensity(regime: str, X: np.ndarray) -> np.ndarray:
    """P(W=1 | X) under the given regime."""
    _check_regime(regime)
    if regime in ("2", "4"):
        return 0.25 * (1.0 + beta24_density(X[:, 2]))
    return np.full(X.shape[0], 0.5)


def effect(regime: str, X: np.ndarray) -> np.ndarray:
    """Conditional treatment effect t(X) of the benchmark regimes."""
    _check_regime(regime)
    if regime in ("3", "4"):
        return eta(X[:, 0]) * eta(X[:, 1])
    return np.zeros(X.shape[0])


def arm_laws(regime: str, x: np.ndarray) -> tuple[tuple[float, float], tuple[float, float]]:
    """((mu0, sd0), (mu1, sd1)) of the conditional outcome laws at ``x``."""
    _check_regime(regime)
    x = np.asarray(x, dtype=np.float64).ravel()
    if regime in BENCHMARK_REGIMES:
        base = 2.0 * x[2] - 1.0
        t = float(effect(regime, x[None, :])[0])
        return (base - 0.5 * t, 1.0), (base + 0.5 * t, 1.0)
    x1 = x[0]
    control = (0.0, 1.0)
    if regime == "m1":
        return control, (0.0, 1.0)
    if regime == "m2":
        return control, (x1, 1.0)
    if regime == "m3":
        return control, (0.0, 1.0 / x1)
    return control, (x1, x1)  # m4


def test_point(regime: str) -> np.ndarray:
    """The study's default query point for the regime."""
    _check_regime(regime)
    return (BENCHMARK_TEST_POINT if regime in BENCHMARK_REGIMES else TOY_TEST_POINT).copy()


def simulate_dataset(regime: str, n: int, rng: np.random.Generator) -> Dataset:
    """Draw n i.i.d. observations from the regime."""
    _check_regime(regime)
    if regime in BENCHMARK_REGIMES:
        X = rng.uniform(0.0, 1.0, size=(n, NUM_COVARIATES))
    else:
        X = rng.uniform(2.0, 3.0, size=(n, NUM_COVARIATES))
    W = (rng.uniform(size=n) < propensity(regime, X)).astype(np.int8)
    if regime in BENCHMARK_REGIMES:
        mean = 2.0 * X[:, 2] - 1.0 + (W - 0.5) * effect(regime, X)
        Y = mean + rng.standard_normal(n)
    else:
        mu = np.zeros(n)
        sd = np.ones(n)
        treated = W == 1
        (mu0, sd0), _ = arm_laws(regime, X[0])
        mu[:] = mu0
        sd[:] = sd0
        x1 = X[treated, 0]
        if regime == "m2":
            mu[treated] = x1
        elif regime == "m3":
            sd[treated] = 1.0 / x1
        elif regime == "m4":
            mu[treated] = x1
            sd[treated] = x1
        Y = mu + sd * rng.standard_normal(n)
    return Dataset(X=X, W=W, Y=Y[:, None])


def draw_conditional(
    regime: str, x: np.ndarray, arm: int, m: int, rng: np.random.Generator
) -> np.ndarray:
    """m outcome draws from the regime's conditional law at ``x`` for one arm."""
    laws = arm_laws(regime, x)
    mu, sd = laws[arm]
    return mu + sd * rng.standard_normal(m)


def true_witness(
    regime: str,
    x: np.ndarray,
    grid: np.ndarray,
    spec: KernelSpec,
    m: int = TRUE_WITNESS_DRAWS,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Monte Carlo witness (1/m) sum k(Y^1_j, y) - (1/m) sum k(Y^0_j, y)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[:, None]
    y1 = draw_conditional(regime, x, 1, m, rng)[:, None]
    y0 = draw_conditional(regime, x, 0, m, rng)[:, None]
    return kernel_cross(grid, y1, spec).mean(axis=1) - kernel_cross(grid, y0, spec).mean(axis=1)


def mae(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute pointwise difference over the evaluation grid."""
    estimate = np.asarray(estimate, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if estimate.shape[0] != truth.shape[0]:
        raise LengthMismatch(
            f"estimate has {estimate.shape[0]} points, truth {truth.shape[0]}"
        )
    return float(np.mean(np.abs(estimate - truth)))


def motivational_example(example: int, n: int, rng: np.random.Generator):
    """Toy dataset plus its conditional arm laws at x = (2.5, ..., 2.5).

    Returns (Dataset, ((mu0, sd0), (mu1, sd1))).
    """
    regime = f"m{example}"
    ds = simulate_dataset(regime, n, rng)
    return ds, arm_laws(regime, TOY_TEST_POINT)


def fit_two_drf(dataset: Dataset, config: ForestConfig, n_jobs: int | None = None):
    """Fit one plain-MMD forest per treatment arm (the two-forest baseline).

    Both forests share the pooled median-heuristic kernel.  Query the result
    with :func:`two_drf_weights`.
    """
    sigma = median_heuristic(dataset.Y, seed=config.seed)
    spec = KernelSpec(bandwidth_sigma=sigma, outcome_dim=dataset.d)
    models = []
    for arm in (0, 1):
        idx = np.flatnonzero(dataset.W == arm)
        sub = Dataset(X=dataset.X[idx], W=dataset.W[idx], Y=dataset.Y[idx])
        arm_config = replace(config, split_mode=PLAIN_MMD, seed=config.seed + arm + 1)
        model = fit(sub, arm_config, n_jobs=n_jobs, kernel_spec=spec)
        models.append((idx, model))
    return spec, models


def two_drf_weights(models, n: int, x: np.ndarray) -> WeightBundle:
    """Difference of the two arms' plain-forest weights, scattered to n rows.

    Group b pairs the bth half-sample of each arm, so the per-group vectors
    mirror the causal forest's resampling draws.
    """
    bundles = []
    for idx, model in models:
        b = aggregate_weights(model, x)
        bundles.append((idx, b))
    B = bundles[0][1].group_w.shape[0]
    group_w = np.zeros((B, n))
    aggregate = np.zeros(n)
    for sign, (idx, b) in zip((-1.0, 1.0), bundles):
        aggregate[idx] += sign * b.aggregate_w
        group_w[:, idx] += sign * b.group_w
    return WeightBundle(aggregate_w=aggregate, group_w=group_w, query_point=np.asarray(x))


@dataclass
class StudyReport:
    regime: str
    n: int
    n_sims: int
    method: str
    mae_mean: float
    coverage_rate: float
    coverage_se: float
    mae_values: np.ndarray
    coverage_flags: np.ndarray
    reject_flags: np.ndarray
    runtime_seconds: float
    seed: int


def _replication(regime, n, method, config, master_seed, r, alpha):
    ds_rng = np.random.default_rng([master_seed, r, 0])
    dataset = simulate_dataset(regime, n, ds_rng)
    fit_seed = int(np.random.SeedSequence([master_seed, r, 1]).generate_state(1)[0])
    x = test_point(regime)
    if method == METHOD_CAUSAL:
        model = fit(dataset, config.with_seed(fit_seed), n_jobs=1)
        spec = model.kernel_spec
        bundle = aggregate_weights(model, x)
    elif method == METHOD_TWO_DRF:
        spec, models = fit_two_drf(dataset, config.with_seed(fit_seed), n_jobs=1)
        bundle = two_drf_weights(models, n, x)
    else:
        raise ValueError(f"unknown method {method!r}")
    truth_rng = np.random.default_rng([master_seed, r, 2])
    y1 = draw_conditional(regime, x, 1, TRUE_WITNESS_DRAWS, truth_rng)
    y0 = draw_conditional(regime, x, 0, TRUE_WITNESS_DRAWS, truth_rng)
    pooled = np.concatenate([y0, y1])
    grid = np.linspace(pooled.min(), pooled.max(), 201)[:, None]
    truth = (
        kernel_cross(grid, y1[:, None], spec).mean(axis=1)
        - kernel_cross(grid, y0[:, None], spec).mean(axis=1)
    )
    band = band_from_bundle(bundle, dataset.Y, spec, grid, alpha)
    covered = bool(np.all((band.lower <= truth) & (truth <= band.upper)))
    return mae(band.estimate, truth), covered, band.test.reject


def run_study(
    regime: str,
    n: int,
    n_sims: int,
    method: str,
    config: ForestConfig,
    master_seed: int = 0,
    alpha: float = 0.05,
    n_jobs: int | None = None,
) -> StudyReport:
    """Monte Carlo study of witness MAE and simultaneous band coverage.

    Each replication simulates a dataset, fits the requested method, and
    evaluates the witness estimate with its (1-alpha) band at the regime's
    test point on a 201-point grid spanning the pooled ground-truth draws.
    Replication r depends only on (master_seed, r), so results are
    reproducible and independent of the worker count.
    """
    _check_regime(regime)
    start = time.monotonic()
    jobs = n_jobs if n_jobs is not None else num_threads()
    if jobs > 1 and n_sims > 1:
        rows = Parallel(n_jobs=jobs)(
            delayed(_replication)(regime, n, method, config, master_seed, r, alpha)
            for r in range(n_sims)
        )
    else:
        rows = [
            _replication(regime, n, method, config, master_seed, r, alpha)
            for r in range(n_sims)
        ]
    maes = np.array([row[0] for row in rows])
    covered = np.array([row[1] for row in rows], dtype=bool)
    rejects = np.array([row[2] for row in rows], dtype=bool)
    rate = float(covered.mean())
    return StudyReport(
        regime=regime,
        n=n,
        n_sims=n_sims,
        method=method,
        mae_mean=float(maes.mean()),
        coverage_rate=rate,
        coverage_se=float(np.sqrt(rate * (1.0 - rate) / n_sims)),
        mae_values=maes,
        coverage_flags=covered,
        reject_flags=rejects,
        runtime_seconds=time.monotonic() - start,
        seed=master_seed,
    )
