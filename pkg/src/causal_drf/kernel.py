"""Gaussian kernel, median-heuristic bandwidth, and random Fourier features.

All witness-function machinery runs in the RKHS of the Gaussian (RBF) kernel

    k(u, v) = exp(-||u - v||^2 / (2 sigma^2)),

whose values lie in (0, 1] with k(u, u) = 1.  The split criterion replaces k
by the Bochner approximation built from frequencies omega_s ~ N(0, sigma^-2 I),
with the complex feature e^{i omega^T y} stored as the real pair
(cos(omega^T y), sin(omega^T y)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import AllPointsIdentical, DimensionMismatch

# Exact pairwise enumeration for the median heuristic is O(n^2); above this
# many rows a seeded subsample is used instead (bias negligible for a
# bandwidth heuristic).
MEDIAN_HEURISTIC_MAX_N = 5000


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel with bandwidth ``sigma`` on R^d outcomes."""

    bandwidth_sigma: float
    outcome_dim: int

    def __post_init__(self):
        if not self.bandwidth_sigma > 0:
            raise ValueError(f"bandwidth_sigma must be > 0, got {self.bandwidth_sigma}")
        if self.outcome_dim < 1:
            raise ValueError(f"outcome_dim must be >= 1, got {self.outcome_dim}")

    @property
    def sup_bound(self) -> float:
        """sup_y k(y, y); equals 1 for the Gaussian kernel."""
        return 1.0


@dataclass(frozen=True)
class FourierFeatures:
    """Frequency matrix of shape (count_S, d), rows drawn i.i.d. N(0, sigma^-2 I)."""

    frequencies: np.ndarray
    count_S: int

    def __post_init__(self):
        if self.frequencies.shape[0] != self.count_S:
            raise ValueError("frequencies must have exactly count_S rows")


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric n x n Gaussian kernel matrix with unit diagonal."""

    values: np.ndarray
    spec: KernelSpec


def median_heuristic(Y: np.ndarray, seed: int = 0) -> float:
    """Median pairwise Euclidean distance between the rows of ``Y``.

    Used as the kernel length scale sigma.  Raises AllPointsIdentical when the
    median distance is zero (bandwidth undefined).
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    n = Y.shape[0]
    if n < 2:
        raise ValueError("median_heuristic needs at least 2 rows")
    if n > MEDIAN_HEURISTIC_MAX_N:
        rng = np.random.default_rng(seed)
        Y = Y[rng.choice(n, size=MEDIAN_HEURISTIC_MAX_N, replace=False)]
    sigma = float(np.median(pdist(Y)))
    if sigma == 0.0:
        raise AllPointsIdentical("median pairwise distance is zero")
    return sigma


def gaussian_kernel(y1: np.ndarray, y2: np.ndarray, spec: KernelSpec) -> float:
    """k(y1, y2) = exp(-||y1 - y2||^2 / (2 sigma^2))."""
    y1 = np.asarray(y1, dtype=np.float64).ravel()
    y2 = np.asarray(y2, dtype=np.float64).ravel()
    if y1.shape[0] != spec.outcome_dim or y2.shape[0] != spec.outcome_dim:
        raise DimensionMismatch(
            f"expected vectors of length {spec.outcome_dim}, "
            f"got {y1.shape[0]} and {y2.shape[0]}"
        )
    sq = float(np.sum((y1 - y2) ** 2))
    return float(np.exp(-sq / (2.0 * spec.bandwidth_sigma**2)))


def kernel_cross(Y1: np.ndarray, Y2: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gaussian kernel matrix between the rows of Y1 (n1 x d) and Y2 (n2 x d)."""
    Y1 = np.atleast_2d(np.asarray(Y1, dtype=np.float64))
    Y2 = np.atleast_2d(np.asarray(Y2, dtype=np.float64))
    if Y1.shape[1] != spec.outcome_dim or Y2.shape[1] != spec.outcome_dim:
        raise DimensionMismatch(
            f"expected {spec.outcome_dim} columns, got {Y1.shape[1]} and {Y2.shape[1]}"
        )
    sq = (
        np.sum(Y1**2, axis=1)[:, None]
        + np.sum(Y2**2, axis=1)[None, :]
        - 2.0 * (Y1 @ Y2.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.bandwidth_sigma**2))


def kernel_matrix(Y: np.ndarray, spec: KernelSpec) -> KernelMatrix:
    """Entrywise Gaussian kernel matrix of the rows of Y; symmetrized exactly."""
    values = kernel_cross(Y, Y, spec)
    values = 0.5 * (values + values.T)
    np.fill_diagonal(values, 1.0)
    return KernelMatrix(values=values, spec=spec)


def sample_fourier_features(spec: KernelSpec, count_S: int, seed) -> FourierFeatures:
    """Draw count_S frequency rows omega_s ~ N(0, sigma^-2 I_d), reproducibly."""
    if count_S < 1:
        raise ValueError("count_S must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    freq = rng.normal(
        0.0, 1.0 / spec.bandwidth_sigma, size=(count_S, spec.outcome_dim)
    )
    return FourierFeatures(frequencies=freq, count_S=count_S)


def fourier_embed(Y: np.ndarray, ff: FourierFeatures) -> np.ndarray:
    """Embed outcomes as 2S reals: columns [cos(Y om^T) | sin(Y om^T)].

    Each complex entry e^{i omega_s^T y} has modulus 1; the pair for
    frequency s sits at columns (s, S + s).  Accepts a single d-vector or an
    (n, d) matrix; returns shape (2S,) or (n, 2S) accordingly.
    """
    Y = np.asarray(Y, dtype=np.float64)
    single = Y.ndim == 1
    Y2 = np.atleast_2d(Y)
    if Y2.shape[1] != ff.frequencies.shape[1]:
        raise DimensionMismatch(
            f"outcome dim {Y2.shape[1]} != frequency dim {ff.frequencies.shape[1]}"
        )
    proj = Y2 @ ff.frequencies.T
    out = np.concatenate([np.cos(proj), np.sin(proj)], axis=1)
    return out[0] if single else out


def approximate_kernel(u: np.ndarray, v: np.ndarray, ff: FourierFeatures) -> float:
    """Monte Carlo kernel value (1/S) sum_s Re[phi_s(u) conj(phi_s(v))]."""
    eu = fourier_embed(np.asarray(u, dtype=np.float64), ff)
    ev = fourier_embed(np.asarray(v, dtype=np.float64), ff)
    return float(eu @ ev) / ff.count_S
