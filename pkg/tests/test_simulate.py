"""Simulation harness: generators, seeding, aggregation, worker invariance."""

import dataclasses

import numpy as np
import pytest
from scipy.stats import ks_2samp

from ttpool.causality import CausalityConfig, Method
from ttpool.errors import ConfigError
from ttpool.fusion import FusionConfig
from ttpool.pipeline import TTPConfig
from ttpool.simulate import (
    CampaignResult,
    MeanShift,
    Scenario,
    VarShift,
    _ks_distance,
    draw_arms,
    null_distribution_study,
    run_campaign,
)


def tiny_scenario(reps=6, seed=0, **kwargs):
    defaults = dict(
        generator=MeanShift(0.0, 0.0),
        n=20,
        m=15,
        l=18,
        ttp=TTPConfig(
            fusion=FusionConfig(num_bootstrap=60),
            causality=CausalityConfig(num_resamples=60),
        ),
        replicates=reps,
        master_seed=seed,
    )
    defaults.update(kwargs)
    return Scenario(**defaults)


class TestGenerators:
    def test_mean_shift_marginals(self):
        rng = np.random.default_rng(1)
        gen = MeanShift(mu_c_minus_mu_t=0.4, mu_h_minus_mu_c=0.2)
        c, h, t = gen.draw(rng, n=4000, m=4000, l=4000)
        band = 4 / np.sqrt(4000)
        assert abs(t.mean() - 0.0) < band
        assert abs(c.mean() - 0.4) < band
        assert abs(h.mean() - 0.6) < band
        for arr in (c, h, t):
            assert abs(arr.std() - 1.0) < band

    def test_var_shift_marginals(self):
        rng = np.random.default_rng(2)
        gen = VarShift(var_c_over_var_t=1.0, var_h_over_var_c=1.5)
        c, h, t = gen.draw(rng, n=4000, m=4000, l=4000)
        band = 4 / np.sqrt(4000)
        assert abs(t.var() - 1.0) < 3 * band
        assert abs(c.var() - 1.0) < 3 * band
        assert abs(h.var() - 1.5) < 3 * band
        assert abs(h.mean()) < band

    def test_shapes(self):
        rng = np.random.default_rng(3)
        c, h, t = MeanShift().draw(rng, n=7, m=5, l=6)
        assert c.shape == (5, 1) and h.shape == (6, 1) and t.shape == (7, 1)


class TestScenarioValidation:
    def test_minimum_sizes(self):
        with pytest.raises(ConfigError):
            tiny_scenario(m=1)
        with pytest.raises(ConfigError):
            tiny_scenario(reps=0)


class TestSeeding:
    def test_draws_depend_only_on_master_seed_and_replicate(self):
        scn_a = tiny_scenario(seed=5)
        scn_b = tiny_scenario(seed=5, reps=9)  # replicate count must not matter
        for rep in (0, 3):
            arms_a = draw_arms(scn_a, rep)
            arms_b = draw_arms(scn_b, rep)
            for sa, sb in zip(arms_a, arms_b):
                assert np.array_equal(sa.points, sb.points)

    def test_different_replicates_differ(self):
        scn = tiny_scenario()
        a = draw_arms(scn, 0)[0].points
        b = draw_arms(scn, 1)[0].points
        assert not np.array_equal(a, b)


class TestCampaign:
    def test_single_replicate_rates_are_indicator(self):
        res = run_campaign(tiny_scenario(reps=1))
        assert res.merge_rate in (0.0, 1.0)
        assert res.reject_rate in (0.0, 1.0)
        assert res.stderr_merge == 0.0
        assert res.stderr_reject == 0.0

    def test_rates_are_exact_counts(self):
        res = run_campaign(tiny_scenario(reps=7))
        assert (res.merge_rate * 7) == pytest.approx(round(res.merge_rate * 7))
        assert res.rng_algorithm

    def test_worker_count_invariance(self):
        scn = tiny_scenario(reps=8, seed=21)
        seq = run_campaign(scn, workers=1)
        par = run_campaign(scn, workers=3)
        for field in dataclasses.fields(CampaignResult):
            if field.name in ("wall_time",):
                continue
            assert getattr(seq, field.name) == getattr(par, field.name), field.name

    def test_compare_methods_reported(self):
        scn = tiny_scenario(
            reps=4, compare_methods=(Method.PARTIAL_PERMUTATION, Method.NORMAL_APPROX)
        )
        res = run_campaign(scn)
        assert set(res.per_method_rates) == {
            "partial_bootstrap",
            "partial_permutation",
            "normal_approx",
        }
        assert res.reject_rate == res.per_method_rates["partial_bootstrap"]

    def test_deterministic_rerun(self):
        scn = tiny_scenario(reps=5, seed=33)
        a = run_campaign(scn)
        b = run_campaign(scn)
        assert a.merge_rate == b.merge_rate
        assert a.per_method_rates == b.per_method_rates


class TestKSDistance:
    def test_matches_scipy(self, rng):
        a = rng.normal(size=80)
        b = rng.normal(size=60) + 0.3
        assert _ks_distance(a, b) == pytest.approx(ks_2samp(a, b).statistic, abs=1e-12)

    def test_identical_samples_zero(self, rng):
        a = rng.normal(size=50)
        assert _ks_distance(a, a.copy()) == 0.0


class TestNullStudy:
    def test_degenerate_two_replicates_well_formed(self):
        scn = tiny_scenario(reps=2)
        rows = null_distribution_study(scn, probe_levels=(0.9,), ref_draws=5)
        assert len(rows) == 3  # three methods, one level
        for row in rows:
            assert 0.0 <= row.ks_distance <= 1.0
            assert row.level == 0.9

    def test_probe_generator_changes_reference_only(self):
        scn = tiny_scenario(reps=3)
        base = null_distribution_study(
            scn, probe_levels=(0.9,), ref_draws=5, methods=(Method.PARTIAL_BOOTSTRAP,)
        )
        probed = null_distribution_study(
            scn,
            probe_levels=(0.9,),
            ref_draws=5,
            probe_generator=MeanShift(1.0, 0.0),
            methods=(Method.PARTIAL_BOOTSTRAP,),
        )
        assert base[0].true_quantile == probed[0].true_quantile
        assert base[0].reference_quantile != probed[0].reference_quantile
