"""End-to-end test-then-pool runs: fusion decision, branch, causality, report."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .causality import (
    CausalityConfig,
    CausalityOutcome,
    DiagnosticsReport,
    Method,
    consistency_diagnostics,
    run_causality,
    standard_permutation_test,
    two_sample_permutation,
)
from .errors import ConfigError
from .estimators import Estimator
from .fusion import FusionConfig, FusionMode, FusionOutcome, classic_fusion, equivalence_fusion
from .kernels import GramCache, KernelSpec, Sample, build_gram


@dataclass(frozen=True)
class TTPConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    causality: CausalityConfig = field(default_factory=CausalityConfig)
    merged_method: Method = Method.PARTIAL_BOOTSTRAP

    def __post_init__(self) -> None:
        if self.merged_method is Method.STANDARD_PERMUTATION:
            raise ConfigError("merged_method must be a merged-branch method")


@dataclass(frozen=True)
class TTPReport:
    fusion: FusionOutcome
    causality: CausalityOutcome
    diagnostics: DiagnosticsReport
    config: TTPConfig
    bandwidth_pooled3: Optional[float]
    bandwidth_pooled2: Optional[float]
    bandwidth_used: str
    seeds: dict


def derive_stage_seeds(master_seed) -> tuple:
    """Labeled substreams (fusion, causality) from one master seed."""
    fusion_ss, causality_ss = np.random.SeedSequence(master_seed).spawn(2)
    return fusion_ss, causality_ss


def _stage_seeds(cfg: TTPConfig, master_seed) -> tuple:
    fusion_seed, causality_seed = cfg.fusion.seed, cfg.causality.seed
    if fusion_seed is None and causality_seed is None:
        return derive_stage_seeds(master_seed)
    return fusion_seed, causality_seed


def _seed_record(master_seed, fusion_seed, causality_seed) -> dict:
    def describe(s):
        if isinstance(s, np.random.SeedSequence):
            return {"entropy": s.entropy, "spawn_key": list(s.spawn_key)}
        return s

    return {
        "master": describe(master_seed),
        "fusion": describe(fusion_seed),
        "causality": describe(causality_seed),
    }


def run_equivalence_ttp(
    current: Sample,
    historical: Sample,
    treatment: Sample,
    cfg: TTPConfig,
    master_seed=None,
) -> TTPReport:
    """Equivalence TTP: equivalence fusion, then branch-matched causality test.

    Not merged: standard permutation of current vs treatment on the
    two-arm bandwidth.  Merged: cfg.merged_method on the fused control
    vs treatment with the three-arm bandwidth.
    """
    if cfg.fusion.mode is not FusionMode.EQUIVALENCE:
        raise ConfigError("run_equivalence_ttp requires fusion.mode=equivalence")
    gram = build_gram(cfg.kernel, current, historical, treatment)
    fusion_seed, causality_seed = _stage_seeds(cfg, master_seed)
    fusion = equivalence_fusion(gram, replace(cfg.fusion, seed=fusion_seed))

    if fusion.merged:
        causality_cfg = replace(
            cfg.causality, method=cfg.merged_method, seed=causality_seed
        )
        causality = run_causality(gram, causality_cfg)
    else:
        causality_cfg = replace(
            cfg.causality, method=Method.STANDARD_PERMUTATION, seed=causality_seed
        )
        causality = standard_permutation_test(gram, causality_cfg)

    return TTPReport(
        fusion=fusion,
        causality=causality,
        diagnostics=consistency_diagnostics(gram),
        config=cfg,
        bandwidth_pooled3=gram.bandwidth_pooled3,
        bandwidth_pooled2=gram.bandwidth_pooled2,
        bandwidth_used="pooled3" if fusion.merged else "pooled2",
        seeds=_seed_record(master_seed, fusion_seed, causality_seed),
    )


def run_classic_ttp(
    current: Sample,
    historical: Sample,
    treatment: Sample,
    cfg: TTPConfig,
    master_seed=None,
) -> TTPReport:
    """Classic TTP baseline: point-null fusion, then a permutation causality test.

    Merged: permutation test of the fused control (current || historical)
    vs treatment.  Not merged: standard permutation of current vs
    treatment.
    """
    if cfg.fusion.mode is not FusionMode.CLASSIC_PERMUTATION:
        raise ConfigError("run_classic_ttp requires fusion.mode=classic")
    gram = build_gram(cfg.kernel, current, historical, treatment)
    fusion_seed, causality_seed = _stage_seeds(cfg, master_seed)
    fusion = classic_fusion(gram, replace(cfg.fusion, seed=fusion_seed))

    if fusion.merged:
        rng = np.random.default_rng(causality_seed)
        statistic, critical = two_sample_permutation(
            gram.matrix,
            gram.m + gram.l,
            gram.n,
            cfg.causality.alpha,
            cfg.causality.num_resamples,
            rng,
            cfg.causality.estimator,
        )
        causality = CausalityOutcome(
            statistic=statistic,
            critical_value=critical,
            reject=bool(statistic > critical),
            method=Method.STANDARD_PERMUTATION,
            merged_analysis=True,
        )
    else:
        causality_cfg = replace(
            cfg.causality, method=Method.STANDARD_PERMUTATION, seed=causality_seed
        )
        causality = standard_permutation_test(gram, causality_cfg)

    return TTPReport(
        fusion=fusion,
        causality=causality,
        diagnostics=consistency_diagnostics(gram),
        config=cfg,
        bandwidth_pooled3=gram.bandwidth_pooled3,
        bandwidth_pooled2=gram.bandwidth_pooled2,
        bandwidth_used="pooled3" if fusion.merged else "pooled2",
        seeds=_seed_record(master_seed, fusion_seed, causality_seed),
    )
