"""Dataset container and forest hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientData, InvalidConfig

CAUSAL_WEIGHTED_MMD = "causal_weighted_mmd"
PLAIN_MMD = "plain_mmd"


@dataclass(frozen=True)
class Dataset:
    """Covariates X (n x p), binary treatment W (n,), outcomes Y (n x d)."""

    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        W = np.asarray(self.W, dtype=np.int8).ravel()
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if not (X.shape[0] == W.shape[0] == Y.shape[0]):
            raise ValueError(
                f"X, W, Y row counts differ: {X.shape[0]}, {W.shape[0]}, {Y.shape[0]}"
            )
        if not np.isfinite(X).all() or not np.isfinite(Y).all():
            raise ValueError("X and Y must not contain NaN or infinite values")
        if not np.isin(W, (0, 1)).all():
            raise ValueError("W must contain only 0 and 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    def arm_counts(self) -> tuple[int, int]:
        """(#controls, #treated)."""
        n1 = int(self.W.sum())
        return self.n - n1, n1


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters for a (half-sampled) honest forest.

    ``num_trees`` is split into ``num_groups`` half-sample groups of
    ``trees_per_group`` trees each.  ``min_leaf_per_group`` is the floor on
    observations of each treatment arm in every populated leaf.
    """

    num_trees: int = 1000
    num_groups: int = 50
    min_leaf_per_group: int = 5
    alpha_regularity: float = 0.05
    subsample_exponent: float = 0.9
    mtry: int | None = None
    fourier_count: int = 20
    honesty_fraction: float = 0.5
    split_mode: str = CAUSAL_WEIGHTED_MMD
    seed: int = 0
    significance_alpha: float = 0.05

    @property
    def trees_per_group(self) -> int:
        return int(round(self.num_trees / self.num_groups))

    def validate(self, p: int | None = None) -> None:
        if self.num_groups < 2:
            raise InvalidConfig("num_groups must be >= 2")
        if self.trees_per_group < 1:
            raise InvalidConfig("num_trees / num_groups must round to >= 1")
        if self.min_leaf_per_group < 1:
            raise InvalidConfig("min_leaf_per_group must be >= 1")
        if not 0.0 < self.alpha_regularity <= 0.2:
            raise InvalidConfig("alpha_regularity must lie in (0, 0.2]")
        if not 0.0 < self.subsample_exponent < 1.0:
            raise InvalidConfig("subsample_exponent must lie in (0, 1)")
        if not 0.0 < self.honesty_fraction < 1.0:
            raise InvalidConfig("honesty_fraction must lie in (0, 1)")
        if self.fourier_count < 1:
            raise InvalidConfig("fourier_count must be >= 1")
        if self.split_mode not in (CAUSAL_WEIGHTED_MMD, PLAIN_MMD):
            raise InvalidConfig(f"unknown split_mode {self.split_mode!r}")
        if not 0.0 < self.significance_alpha < 1.0:
            raise InvalidConfig("significance_alpha must lie in (0, 1)")
        if self.mtry is not None:
            if self.mtry < 1 or (p is not None and self.mtry > p):
                raise InvalidConfig(f"mtry must lie in [1, p], got {self.mtry}")

    def resolved_mtry(self, p: int) -> int:
        """mtry if set, else ceil(sqrt(p))."""
        return self.mtry if self.mtry is not None else math.ceil(math.sqrt(p))

    def subsample_size(self, pool: int) -> int:
        """Per-tree subsample size ceil(pool^beta), capped at the pool size."""
        s = min(pool, math.ceil(pool**self.subsample_exponent))
        if s < 4 * self.min_leaf_per_group:
            raise InsufficientData(
                f"subsample size {s} < 4*kappa = {4 * self.min_leaf_per_group}"
            )
        return s

    def with_seed(self, seed: int) -> "ForestConfig":
        return replace(self, seed=int(seed))
