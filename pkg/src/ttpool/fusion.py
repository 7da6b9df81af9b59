"""Fusion stage: decide whether historical controls may be pooled.

Two variants:

* ``equivalence_fusion``: equivalence test of H0: D(Qc, Qh) >= theta.
  Rejecting H0 (statistic theta - D above the bootstrap quantile) is
  evidence the arms are within theta of each other, so rejection means
  *merge*.  The reference distribution is the Efron bootstrap of
  D(Qc^m, Qc) + D(Qh^l, Qh) via centered multinomial weights.
* ``classic_fusion``: point-null permutation two-sample test of
  H0: Qc = Qh.  Here *failure* to reject means merge.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError, NonVStatEstimator, SampleTooSmall
from .estimators import Estimator, batched_quad, mmd2_v, permutation_masks
from .kernels import GramCache
from .quantile import inf_quantile


class FusionMode(str, Enum):
    EQUIVALENCE = "equivalence"
    CLASSIC_PERMUTATION = "classic"


@dataclass(frozen=True)
class FusionConfig:
    theta: float = 0.4
    alpha_f: float = 0.05
    num_bootstrap: int = 1000
    mode: FusionMode = FusionMode.EQUIVALENCE
    seed: object = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha_f < 1.0:
            raise ConfigError(f"alpha_f must be in (0, 1), got {self.alpha_f}")
        if self.num_bootstrap < 0:
            raise ConfigError("num_bootstrap must be >= 0")
        if self.mode is FusionMode.EQUIVALENCE and self.num_bootstrap < 1:
            raise ConfigError("equivalence mode needs at least one bootstrap draw")
        if self.mode is FusionMode.EQUIVALENCE and self.theta < 0:
            raise ConfigError("theta must be nonnegative in equivalence mode")


@dataclass(frozen=True)
class FusionOutcome:
    statistic: float
    critical_value: float
    merged: bool
    mode: FusionMode
    resamples_used: int


def bootstrap_weight_draws(
    rng: np.random.Generator, size: int, batch: int
) -> np.ndarray:
    """Multinomial(size; 1/size, ..., 1/size) weight rows, one per bootstrap draw."""
    return rng.multinomial(size, np.full(size, 1.0 / size), size=batch).astype(float)


def _bootstrap_root_terms(k_block: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sqrt(max(D^2_W, 0)) with D^2_W = (1/s^2) (W-1)' K (W-1) per weight row."""
    s = k_block.shape[0]
    centered = weights - 1.0
    d2 = batched_quad(k_block, centered, centered) / s**2
    return np.sqrt(np.clip(d2, 0.0, None))


def equivalence_fusion(
    gram: GramCache, cfg: FusionConfig, estimator: Estimator = Estimator.VSTAT
) -> FusionOutcome:
    """MMD equivalence fusion test; merged iff statistic > critical value.

    Only the nonnegative V-statistic is accepted: the statistic needs the
    non-squared MMD, and the U-statistic's square root is not always
    defined.
    """
    if estimator is not Estimator.VSTAT:
        raise NonVStatEstimator("the fusion test requires the V-statistic estimator")
    if cfg.mode is not FusionMode.EQUIVALENCE:
        raise ConfigError("equivalence_fusion requires mode=equivalence")
    if gram.m < 2 or gram.l < 2:
        raise SampleTooSmall("equivalence fusion needs >= 2 points per control arm")
    d = mmd2_v(gram, gram.current, gram.historical).root
    statistic = cfg.theta - d

    rng = np.random.default_rng(cfg.seed)
    b = cfg.num_bootstrap
    w_c = bootstrap_weight_draws(rng, gram.m, b)
    w_h = bootstrap_weight_draws(rng, gram.l, b)
    s = _bootstrap_root_terms(gram.k_cc, w_c) + _bootstrap_root_terms(gram.k_hh, w_h)
    critical = inf_quantile(s, 1.0 - cfg.alpha_f)
    return FusionOutcome(
        statistic=float(statistic),
        critical_value=critical,
        merged=bool(statistic > critical),
        mode=cfg.mode,
        resamples_used=b,
    )


def permutation_vstats(
    k_pooled: np.ndarray, masks: np.ndarray, size_a: int, size_b: int
) -> np.ndarray:
    """Batched two-sample V-statistics for 0/1 group-a membership rows."""
    rowsum = masks @ k_pooled
    s_aa = np.einsum("bq,bq->b", rowsum, masks)
    s_ab = np.einsum("bq,bq->b", rowsum, 1.0 - masks)
    s_bb = k_pooled.sum() - s_aa - 2.0 * s_ab
    return s_aa / size_a**2 + s_bb / size_b**2 - 2.0 * s_ab / (size_a * size_b)


def classic_fusion(gram: GramCache, cfg: FusionConfig) -> FusionOutcome:
    """Permutation two-sample test of Qc = Qh; merged iff it fails to reject."""
    if cfg.mode is not FusionMode.CLASSIC_PERMUTATION:
        raise ConfigError("classic_fusion requires mode=classic")
    if gram.m < 1 or gram.l < 1:
        raise SampleTooSmall("classic fusion needs nonempty control arms")
    statistic = mmd2_v(gram, gram.current, gram.historical).squared

    p = gram.m + gram.l
    k_pooled = gram.matrix[:p, :p]
    rng = np.random.default_rng(cfg.seed)
    if cfg.num_bootstrap > 0:
        masks = permutation_masks(rng, p, gram.m, cfg.num_bootstrap)
        perm_stats = permutation_vstats(k_pooled, masks, gram.m, gram.l)
    else:
        perm_stats = np.empty(0)
    reference = np.concatenate([[statistic], perm_stats])
    critical = inf_quantile(reference, 1.0 - cfg.alpha_f)
    return FusionOutcome(
        statistic=float(statistic),
        critical_value=critical,
        merged=bool(statistic <= critical),
        mode=cfg.mode,
        resamples_used=int(perm_stats.size),
    )
