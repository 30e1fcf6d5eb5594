"""Half-sampled honest forest: fitting and weight aggregation.

The forest consists of B groups; group b is fitted on a Bernoulli(1/2)
half-sample S_b of the training rows, with each of its L trees grown on a
without-replacement subsample of size ceil(|S_b|^beta) from S_b.  Querying a
point yields the per-group weight vectors (the resampling draws behind the
test and the confidence band) and their average, the point-estimate weights.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .data import CAUSAL_WEIGHTED_MMD, Dataset, ForestConfig
from .errors import InsufficientData
from .kernel import KernelSpec, median_heuristic
from .tree import Tree, build_tree, tree_weights

_MAX_REDRAWS = 100


def num_threads() -> int:
    """Worker count: CAUSAL_DRF_THREADS if set, else hardware concurrency."""
    env = os.environ.get("CAUSAL_DRF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def draw_half_sample(
    n: int,
    rng: np.random.Generator,
    W: np.ndarray | None = None,
    min_per_arm: int = 0,
) -> np.ndarray:
    """Index set from n i.i.d. Bernoulli(1/2) membership draws.

    When ``W`` is given the draw is repeated (at most 100 times) until both
    treatment arms have at least ``min_per_arm`` members.
    """
    for _ in range(_MAX_REDRAWS):
        idx = np.flatnonzero(rng.integers(0, 2, size=n) == 1)
        if idx.size < 2:
            continue
        if W is None or min_per_arm == 0:
            return idx
        n1 = int(W[idx].sum())
        if n1 >= min_per_arm and idx.size - n1 >= min_per_arm:
            return idx
    raise InsufficientData(
        f"no half-sample with >= {min_per_arm} rows per treatment arm "
        f"after {_MAX_REDRAWS} draws"
    )


@dataclass
class WeightBundle:
    """Aggregate and per-group weight vectors at one query point."""

    aggregate_w: np.ndarray
    group_w: np.ndarray  # (B, n)
    query_point: np.ndarray


@dataclass
class CausalDRFModel:
    """B fitted subforests plus the training data they index into."""

    dataset: Dataset
    config: ForestConfig
    kernel_spec: KernelSpec
    half_samples: list  # B index arrays
    groups: list  # B lists of Tree

    @property
    def num_groups(self) -> int:
        return len(self.groups)


def _tree_rng(seed: int, b: int, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, 29, b, t])


def _fit_group(dataset: Dataset, spec: KernelSpec, config: ForestConfig, b: int):
    causal = config.split_mode == CAUSAL_WEIGHTED_MMD
    kappa = config.min_leaf_per_group
    hs_rng = np.random.default_rng([config.seed, 17, b])
    half = draw_half_sample(
        dataset.n, hs_rng, W=dataset.W if causal else None,
        min_per_arm=2 * kappa if causal else 0,
    )
    s_n = config.subsample_size(half.size)
    trees = []
    for t in range(config.trees_per_group):
        rng = _tree_rng(config.seed, b, t)
        tree = None
        for _ in range(_MAX_REDRAWS):
            sub = half[rng.choice(half.size, size=s_n, replace=False)]
            try:
                tree = build_tree(sub, dataset, spec, config, rng)
                break
            except InsufficientData:
                # Unlucky subsample or honesty partition; redraw.
                continue
        if tree is None:
            raise InsufficientData(
                f"group {b}, tree {t}: no subsample satisfied the kappa floor "
                f"after {_MAX_REDRAWS} draws"
            )
        trees.append(tree)
    return half, trees


def fit(
    dataset: Dataset,
    config: ForestConfig,
    n_jobs: int | None = None,
    kernel_spec: KernelSpec | None = None,
) -> CausalDRFModel:
    """Fit the half-sampled forest; the returned model is immutable.

    The kernel bandwidth is the median heuristic on the full (pooled)
    training outcomes.  Groups are fitted independently, each from an RNG
    stream derived only from (seed, group, tree), so the result does not
    depend on the worker count.
    """
    config.validate(dataset.p)
    if config.split_mode == CAUSAL_WEIGHTED_MMD:
        n0, n1 = dataset.arm_counts()
        if min(n0, n1) < 4 * config.min_leaf_per_group:
            raise InsufficientData(
                f"need >= 4*kappa = {4 * config.min_leaf_per_group} rows per "
                f"treatment arm, got {n0} control / {n1} treated"
            )
    if kernel_spec is None:
        sigma = median_heuristic(dataset.Y, seed=config.seed)
        kernel_spec = KernelSpec(bandwidth_sigma=sigma, outcome_dim=dataset.d)
    spec = kernel_spec

    jobs = n_jobs if n_jobs is not None else num_threads()
    if jobs > 1:
        results = Parallel(n_jobs=jobs)(
            delayed(_fit_group)(dataset, spec, config, b)
            for b in range(config.num_groups)
        )
    else:
        results = [
            _fit_group(dataset, spec, config, b) for b in range(config.num_groups)
        ]
    half_samples = [half for half, _ in results]
    groups = [trees for _, trees in results]
    return CausalDRFModel(
        dataset=dataset,
        config=config,
        kernel_spec=spec,
        half_samples=half_samples,
        groups=groups,
    )


def group_weights(model: CausalDRFModel, trees: list, x: np.ndarray) -> np.ndarray:
    """Dense weight vector of one group: mean of its trees' sparse weights."""
    w = np.zeros(model.dataset.n)
    mode = model.config.split_mode
    for tree in trees:
        members, values = tree_weights(tree, x, model.dataset.W, mode)
        np.add.at(w, members, values)
    w /= len(trees)
    return w


def aggregate_weights(model: CausalDRFModel, x: np.ndarray) -> WeightBundle:
    """Per-group weight vectors at ``x`` and their average.

    The average over groups of per-group tree means equals the flat mean
    over all B*L trees, i.e. the N-tree weight representation of the
    estimator.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.dataset.p:
        raise ValueError(f"query point has {x.shape[0]} coordinates, expected {model.dataset.p}")
    gw = np.stack([group_weights(model, trees, x) for trees in model.groups])
    return WeightBundle(aggregate_w=gw.mean(axis=0), group_w=gw, query_point=x)
