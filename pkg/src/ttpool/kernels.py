"""Kernel functions, bandwidth selection, and Gram-matrix construction.

The Gram cache holds two kernel matrices: one over all three arms
(current || historical || treatment) with the bandwidth resolved on the
three-arm pool, and one over current || treatment with the bandwidth
resolved on the two-arm pool.  The no-merge analysis path uses the
latter; everything else uses the former.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateSample, DimensionMismatch, ConfigError


class KernelFamily(str, Enum):
    RBF = "rbf"
    LINEAR = "linear"
    IMQ = "imq"
    LINEAR_PLUS_RBF = "linear+rbf"


#: Families whose mean-embedding map is injective.  Used for warnings only.
CHARACTERISTIC = {
    KernelFamily.RBF: True,
    KernelFamily.IMQ: True,
    KernelFamily.LINEAR: False,
    KernelFamily.LINEAR_PLUS_RBF: True,
}

#: Families whose evaluation depends on a bandwidth.
_NEEDS_BANDWIDTH = {
    KernelFamily.RBF,
    KernelFamily.IMQ,
    KernelFamily.LINEAR_PLUS_RBF,
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth policy.

    ``bandwidth=None`` selects the median heuristic (median of pairwise
    squared Euclidean distances of the pooled data); a positive number is
    a fixed bandwidth.  ``epsilon`` is the mixing weight of the RBF part
    for the combined linear+RBF kernel and is ignored otherwise.
    """

    family: KernelFamily = KernelFamily.RBF
    bandwidth: Optional[float] = None
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError(f"fixed bandwidth must be > 0, got {self.bandwidth}")
        if self.family is KernelFamily.LINEAR_PLUS_RBF and not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0 for the linear+rbf kernel")

    @property
    def characteristic(self) -> bool:
        return CHARACTERISTIC[self.family]

    @property
    def needs_bandwidth(self) -> bool:
        return self.family in _NEEDS_BANDWIDTH


class Arm(str, Enum):
    CURRENT = "current"
    HISTORICAL = "historical"
    TREATMENT = "treatment"


@dataclass(frozen=True)
class Sample:
    """Observations from one arm, shape (size, d)."""

    points: np.ndarray
    arm: Arm

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DimensionMismatch("sample must be a nonempty (size, d) array")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def resolve_bandwidth(spec: KernelSpec, pooled: np.ndarray) -> float:
    """Resolve the bandwidth on a pooled point set.

    Median heuristic: median of all pairwise squared Euclidean distances
    over distinct unordered pairs (even counts average the two central
    order statistics).

    Raises:
        DegenerateSample: if the median distance is zero (no valid
            bandwidth exists, e.g. all points identical).
    """
    if spec.bandwidth is not None:
        return float(spec.bandwidth)
    pooled = np.atleast_2d(np.asarray(pooled, dtype=float))
    if pooled.shape[0] < 2:
        raise DegenerateSample("median heuristic needs at least two points")
    med = float(np.median(pdist(pooled, metric="sqeuclidean")))
    if med <= 0.0:
        raise DegenerateSample("median pairwise distance is zero; no valid bandwidth")
    return med


def kernel_matrix(
    spec: KernelSpec,
    bandwidth: Optional[float],
    x: np.ndarray,
    y: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Evaluate the kernel between all rows of ``x`` and ``y``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x if y is None else np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    fam = spec.family
    if fam is KernelFamily.LINEAR:
        return x @ y.T
    if bandwidth is None or not bandwidth > 0:
        raise ConfigError(f"kernel family {fam.value} requires a positive bandwidth")
    sq = cdist(x, y, metric="sqeuclidean")
    if fam is KernelFamily.RBF:
        return np.exp(-sq / (2.0 * bandwidth))
    if fam is KernelFamily.IMQ:
        return 1.0 / np.sqrt(1.0 + sq / bandwidth)
    if fam is KernelFamily.LINEAR_PLUS_RBF:
        return x @ y.T + spec.epsilon * np.exp(-sq / (2.0 * bandwidth))
    raise ConfigError(f"unknown kernel family {fam}")


def eval_kernel(
    spec: KernelSpec, bandwidth: Optional[float], x: np.ndarray, y: np.ndarray
) -> float:
    """Single kernel evaluation k(x, y)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes differ: {x.shape} vs {y.shape}")
    return float(kernel_matrix(spec, bandwidth, x[None, :], y[None, :])[0, 0])


def _symmetric_kernel_matrix(
    spec: KernelSpec, bandwidth: Optional[float], x: np.ndarray
) -> np.ndarray:
    """Full kernel matrix with the upper triangle mirrored onto the lower."""
    k = kernel_matrix(spec, bandwidth, x)
    upper = np.triu(k, 1)
    return upper + upper.T + np.diag(np.diag(k))


@dataclass(frozen=True)
class GramCache:
    """Precomputed kernel matrices over the pooled arms.

    ``matrix`` is (N, N) over current || historical || treatment with the
    three-arm bandwidth; ``matrix_nomerge`` is (m+n, m+n) over
    current || treatment with the two-arm bandwidth.  Both are immutable
    and safe to share across resampling workers.
    """

    kernel: KernelSpec
    matrix: np.ndarray
    matrix_nomerge: np.ndarray
    m: int
    l: int
    n: int
    bandwidth_pooled3: Optional[float]
    bandwidth_pooled2: Optional[float]

    def __post_init__(self) -> None:
        self.matrix.setflags(write=False)
        self.matrix_nomerge.setflags(write=False)

    @property
    def size(self) -> int:
        return self.m + self.l + self.n

    # Index partitions into ``matrix``.
    @property
    def current(self) -> np.ndarray:
        return np.arange(self.m)

    @property
    def historical(self) -> np.ndarray:
        return np.arange(self.m, self.m + self.l)

    @property
    def treatment(self) -> np.ndarray:
        return np.arange(self.m + self.l, self.size)

    # Index partitions into ``matrix_nomerge``.
    @property
    def nomerge_current(self) -> np.ndarray:
        return np.arange(self.m)

    @property
    def nomerge_treatment(self) -> np.ndarray:
        return np.arange(self.m, self.m + self.n)

    # Contiguous block views of ``matrix``.
    @property
    def k_cc(self) -> np.ndarray:
        return self.matrix[: self.m, : self.m]

    @property
    def k_ch(self) -> np.ndarray:
        return self.matrix[: self.m, self.m : self.m + self.l]

    @property
    def k_hh(self) -> np.ndarray:
        return self.matrix[self.m : self.m + self.l, self.m : self.m + self.l]


def build_gram(
    spec: KernelSpec, current: Sample, historical: Sample, treatment: Sample
) -> GramCache:
    """Build the Gram cache for three dimension-consistent samples."""
    if not (current.dim == historical.dim == treatment.dim):
        raise DimensionMismatch(
            f"arm dimensions differ: {current.dim}, {historical.dim}, {treatment.dim}"
        )
    pooled3 = np.vstack([current.points, historical.points, treatment.points])
    pooled2 = np.vstack([current.points, treatment.points])
    bw3 = resolve_bandwidth(spec, pooled3) if spec.needs_bandwidth else None
    bw2 = resolve_bandwidth(spec, pooled2) if spec.needs_bandwidth else None
    return GramCache(
        kernel=spec,
        matrix=_symmetric_kernel_matrix(spec, bw3, pooled3),
        matrix_nomerge=_symmetric_kernel_matrix(spec, bw2, pooled2),
        m=current.size,
        l=historical.size,
        n=treatment.size,
        bandwidth_pooled3=bw3,
        bandwidth_pooled2=bw2,
    )
