"""Monte Carlo campaign runner for the synthetic studies.

Replicates are embarrassingly parallel and seeded per replicate from the
campaign master seed, so results are bitwise identical for any worker
count.  Data generation uses numpy's PCG64 Generator (``standard_normal``
scaled and shifted), recorded in the result for replay.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .causality import (
    CausalityConfig,
    Method,
    partial_bootstrap_draws,
    partial_permutation_draws,
    run_causality,
    standard_permutation_test,
    delta_statistic,
    estimate_sigma_c_squared,
)
from .errors import ConfigError, TTPoolError
from .estimators import Estimator, mmd2_fused
from .fusion import FusionMode, classic_fusion, equivalence_fusion
from .kernels import Arm, Sample, build_gram
from .pipeline import TTPConfig
from .quantile import inf_quantile

RNG_ALGORITHM = "numpy.random.Generator(PCG64).standard_normal"


@dataclass(frozen=True)
class MeanShift:
    """Qt = N(0,1), Qc = N(mu_c - mu_t, 1), Qh = N((mu_h - mu_c) + (mu_c - mu_t), 1)."""

    mu_c_minus_mu_t: float = 0.0
    mu_h_minus_mu_c: float = 0.0

    def draw(self, rng: np.random.Generator, n: int, m: int, l: int):
        mu_c = self.mu_c_minus_mu_t
        mu_h = self.mu_h_minus_mu_c + mu_c
        t = rng.standard_normal((n, 1))
        c = mu_c + rng.standard_normal((m, 1))
        h = mu_h + rng.standard_normal((l, 1))
        return c, h, t


@dataclass(frozen=True)
class VarShift:
    """Qt = N(0,1), Qc = N(0, r_ct), Qh = N(0, r_hc * r_ct)."""

    var_c_over_var_t: float = 1.0
    var_h_over_var_c: float = 1.0

    def draw(self, rng: np.random.Generator, n: int, m: int, l: int):
        var_c = self.var_c_over_var_t
        var_h = self.var_h_over_var_c * var_c
        t = rng.standard_normal((n, 1))
        c = np.sqrt(var_c) * rng.standard_normal((m, 1))
        h = np.sqrt(var_h) * rng.standard_normal((l, 1))
        return c, h, t


Generator = Union[MeanShift, VarShift]


@dataclass(frozen=True)
class Scenario:
    generator: Generator
    n: int
    m: int
    l: int
    ttp: TTPConfig = field(default_factory=TTPConfig)
    replicates: int = 1000
    master_seed: int = 0
    compare_methods: tuple = ()

    def __post_init__(self) -> None:
        if min(self.n, self.m, self.l) < 2:
            raise ConfigError("all arm sizes must be >= 2")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")


@dataclass(frozen=True)
class CampaignResult:
    scenario: Scenario
    merge_rate: float
    reject_rate: float
    stderr_merge: float
    stderr_reject: float
    per_method_rates: dict
    wall_time: float
    rng_algorithm: str = RNG_ALGORITHM


def _binomial_stderr(p: float, reps: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / reps))


def draw_arms(scn: Scenario, rep: int):
    """Arm samples for replicate ``rep``; depends only on (master_seed, rep)."""
    data_ss = np.random.SeedSequence([int(scn.master_seed), rep, 0])
    rng = np.random.default_rng(data_ss)
    c, h, t = scn.generator.draw(rng, scn.n, scn.m, scn.l)
    return (
        Sample(c, Arm.CURRENT),
        Sample(h, Arm.HISTORICAL),
        Sample(t, Arm.TREATMENT),
    )


def _replicate_seeds(scn: Scenario, rep: int, n_methods: int):
    fusion_ss = np.random.SeedSequence([int(scn.master_seed), rep, 1])
    causality_ss = np.random.SeedSequence([int(scn.master_seed), rep, 2])
    return fusion_ss, causality_ss.spawn(n_methods)


def _run_replicate(scn: Scenario, rep: int) -> dict:
    """One TTP replicate; evaluates the primary method plus compare_methods."""
    methods = (scn.ttp.merged_method,) + tuple(scn.compare_methods)
    current, historical, treatment = draw_arms(scn, rep)
    try:
        gram = build_gram(scn.ttp.kernel, current, historical, treatment)
        fusion_ss, causality_seeds = _replicate_seeds(scn, rep, len(methods))
        if scn.ttp.fusion.mode is FusionMode.EQUIVALENCE:
            fusion = equivalence_fusion(gram, replace(scn.ttp.fusion, seed=fusion_ss))
        else:
            fusion = classic_fusion(gram, replace(scn.ttp.fusion, seed=fusion_ss))

        rejects = {}
        if fusion.merged:
            for method, seed in zip(methods, causality_seeds):
                cfg = replace(scn.ttp.causality, method=method, seed=seed)
                rejects[method.value] = run_causality(gram, cfg).reject
        else:
            cfg = replace(
                scn.ttp.causality,
                method=Method.STANDARD_PERMUTATION,
                seed=causality_seeds[0],
            )
            outcome = standard_permutation_test(gram, cfg)
            for method in methods:
                rejects[method.value] = outcome.reject
    except TTPoolError as exc:
        raise TTPoolError(
            f"replicate {rep} (master_seed={scn.master_seed}) failed: {exc}"
        ) from exc
    return {"merged": fusion.merged, "rejects": rejects}


def run_campaign(scn: Scenario, workers: int = 1) -> CampaignResult:
    """Run all replicates and aggregate merge / rejection rates."""
    start = time.perf_counter()
    reps = range(scn.replicates)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_replicate, [scn] * scn.replicates, reps, chunksize=8))
    else:
        rows = [_run_replicate(scn, i) for i in reps]

    merges = sum(r["merged"] for r in rows)
    methods = (scn.ttp.merged_method,) + tuple(scn.compare_methods)
    per_method = {
        method.value: sum(r["rejects"][method.value] for r in rows) / scn.replicates
        for method in methods
    }
    merge_rate = merges / scn.replicates
    reject_rate = per_method[scn.ttp.merged_method.value]
    return CampaignResult(
        scenario=scn,
        merge_rate=merge_rate,
        reject_rate=reject_rate,
        stderr_merge=_binomial_stderr(merge_rate, scn.replicates),
        stderr_reject=_binomial_stderr(reject_rate, scn.replicates),
        per_method_rates=per_method,
        wall_time=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Null-distribution study (reference-approximation quality).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NullStudyRow:
    method: str
    level: float
    reference_quantile: float
    true_quantile: float
    ks_distance: float


def _ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov distance between empirical CDFs."""
    pooled = np.sort(np.concatenate([a, b]))
    cdf_a = np.searchsorted(np.sort(a), pooled, side="right") / a.size
    cdf_b = np.searchsorted(np.sort(b), pooled, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def null_distribution_study(
    scn: Scenario,
    probe_levels=(0.9, 0.95),
    probe_generator: Optional[Generator] = None,
    ref_draws: int = 20,
    methods=(Method.PARTIAL_BOOTSTRAP, Method.PARTIAL_PERMUTATION, Method.NORMAL_APPROX),
) -> list[NullStudyRow]:
    """Compare per-method reference distributions against true-null Monte Carlo.

    ``scn.generator`` must fix Qc = Qt; it supplies the true null draws of
    the test statistics (Delta for bootstrap / normal approximation, T
    for partial permutation).  Reference draws are computed on data from
    ``probe_generator`` (default: the null generator itself), pooling
    ``ref_draws`` resamples per replicate across replicates.
    """
    probe_gen = scn.generator if probe_generator is None else probe_generator
    probe_scn = replace(scn, generator=probe_gen)
    estimator = scn.ttp.causality.estimator

    true_delta = np.empty(scn.replicates)
    true_t = np.empty(scn.replicates)
    refs = {m: [] for m in methods}

    for rep in range(scn.replicates):
        gram = build_gram(scn.ttp.kernel, *draw_arms(scn, rep))
        true_delta[rep] = delta_statistic(gram, estimator)
        true_t[rep] = mmd2_fused(
            gram, gram.current, gram.historical, gram.treatment, estimator
        ).squared

        probe_gram = build_gram(probe_scn.ttp.kernel, *draw_arms(probe_scn, rep))
        rng = np.random.default_rng(np.random.SeedSequence([int(scn.master_seed), rep, 3]))
        if Method.PARTIAL_BOOTSTRAP in refs:
            refs[Method.PARTIAL_BOOTSTRAP].append(
                partial_bootstrap_draws(probe_gram, ref_draws, rng, estimator)
            )
        if Method.PARTIAL_PERMUTATION in refs:
            refs[Method.PARTIAL_PERMUTATION].append(
                partial_permutation_draws(probe_gram, ref_draws, rng, estimator)
            )
        if Method.NORMAL_APPROX in refs:
            sigma2 = estimate_sigma_c_squared(probe_gram)
            scale = np.sqrt(4.0 * (1.0 + probe_gram.n / probe_gram.m) * sigma2)
            refs[Method.NORMAL_APPROX].append(scale * rng.standard_normal(ref_draws))

    rows = []
    for method in methods:
        reference = np.concatenate(refs[method])
        truth = true_t if method is Method.PARTIAL_PERMUTATION else true_delta
        ks = _ks_distance(reference, truth)
        for level in probe_levels:
            rows.append(
                NullStudyRow(
                    method=method.value,
                    level=float(level),
                    reference_quantile=inf_quantile(reference, level),
                    true_quantile=inf_quantile(truth, level),
                    ks_distance=ks,
                )
            )
    return rows
