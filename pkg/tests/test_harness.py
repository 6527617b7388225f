"""Verification harness: the analytic exactness oracle, statistical
equivalence with mutation sensitivity, the geometric fit, cost simulation,
and the rejection-sampling comparison."""

from __future__ import annotations

import numpy as np
import pytest

from specdec.analysis import CostModel, beta, expected_tokens
from specdec.distmath import Distribution, normalize
from specdec.engine import MUTATIONS, SpecConfig
from specdec.harness import (
    equivalence_test,
    exact_step_distribution,
    geometric_fit_test,
    rejection_accept_probability,
    rejection_comparison,
    simulate_walltime,
)
from specdec.models import StatelessModel, stateless_pair, train_ngram
from specdec.rng import RandomStream

from conftest import random_pair


class TestExactStepDistribution:
    def test_identity_at_full_strictness(self):
        # The single most important invariant in the repository.
        rng = RandomStream(100)
        worst = 0.0
        for _ in range(1000):
            p, q = random_pair(rng, 16)
            out = exact_step_distribution(p, q, 1.0)
            worst = max(worst, float(np.abs(out.probs - p.probs).max()))
        assert worst < 1e-12

    def test_identity_across_vocab_sizes(self):
        rng = RandomStream(101)
        for vocab in (2, 3, 7, 64, 512):
            p, q = random_pair(rng, vocab)
            out = exact_step_distribution(p, q, 1.0)
            np.testing.assert_allclose(out.probs, p.probs, atol=1e-12, rtol=0)

    def test_equal_distributions_any_lenience(self):
        p = Distribution(np.array([0.25, 0.5, 0.25]))
        for lenience in (1.0, 0.5, 0.1):
            out = exact_step_distribution(p, p, lenience)
            np.testing.assert_allclose(out.probs, p.probs, atol=1e-12, rtol=0)

    def test_lenience_bound_entrywise(self):
        rng = RandomStream(102)
        for _ in range(500):
            p, q = random_pair(rng, 12)
            lenience = 0.05 + 0.95 * rng.uniform()
            out = exact_step_distribution(p, q, lenience)
            assert np.all(out.probs <= p.probs / lenience + 1e-12)

    def test_concentrates_known_case(self):
        # p=[.8,.2], q=[.5,.5], l=1: accepted mass [.5,.2], reject .3 to
        # residual [1,0] -> [.8,.2] back exactly.
        p = Distribution(np.array([0.8, 0.2]))
        q = Distribution(np.array([0.5, 0.5]))
        out = exact_step_distribution(p, q, 1.0)
        np.testing.assert_allclose(out.probs, [0.8, 0.2], atol=1e-15)

    def test_vocab_guard(self):
        big = normalize(np.ones(5000))
        with pytest.raises(ValueError):
            exact_step_distribution(big, big, 1.0)


@pytest.fixture(scope="module")
def model_pair():
    rng = RandomStream(103)
    p, q = random_pair(rng, 16)
    return StatelessModel(p.probs), StatelessModel(q.probs)


class TestEquivalence:
    def test_honest_engine_passes(self, model_pair):
        mp, mq = model_pair
        report = equivalence_test(mp, mq, SpecConfig(gamma=2, seed=1), 50_000, [[0]])
        assert report.verdict
        assert report.p_value > 0.001

    def test_same_model_passes_with_tiny_tv(self, model_pair):
        mp, _ = model_pair
        report = equivalence_test(mp, mp, SpecConfig(gamma=2, seed=2), 20_000, [[0]])
        assert report.verdict
        assert report.max_tv_distance < 0.02

    @pytest.mark.parametrize("mutation", MUTATIONS)
    def test_mutations_are_caught(self, model_pair, mutation):
        mp, mq = model_pair
        report = equivalence_test(
            mp, mq, SpecConfig(gamma=2, seed=3), 50_000, [[0]], mutation=mutation
        )
        assert not report.verdict, f"mutation {mutation} slipped through"

    def test_multiple_contexts_bonferroni(self, model_pair):
        mp, mq = model_pair
        report = equivalence_test(
            mp, mq, SpecConfig(gamma=1, seed=4), 20_000, [[0], [1], [0, 1]]
        )
        assert len(report.per_context) == 3
        assert report.p_value <= 1.0
        assert report.verdict

    def test_rejects_small_samples(self, model_pair):
        mp, mq = model_pair
        with pytest.raises(ValueError):
            equivalence_test(mp, mq, SpecConfig(gamma=1, seed=0), 999, [[0]])

    def test_verdict_matches_threshold_rule(self, model_pair):
        mp, mq = model_pair
        report = equivalence_test(mp, mq, SpecConfig(gamma=1, seed=5), 20_000, [[0]])
        assert report.verdict == (report.p_value > report.threshold)


class TestGeometricFit:
    def test_alpha_zero_always_one_token(self):
        report = geometric_fit_test(0.0, gamma=3, n_steps=5000, seed=6)
        assert report.extras["histogram"][0] == 5000
        assert report.extras["mean_tokens"] == 1.0
        assert report.verdict

    def test_hand_mean_alpha_07_gamma_3(self):
        # (1 - 0.7^4) / 0.3 = 2.533
        report = geometric_fit_test(0.7, gamma=3, n_steps=50_000, seed=7)
        assert report.extras["expected_mean"] == pytest.approx(2.533, abs=1e-3)
        assert report.extras["mean_rel_gap"] <= 0.02
        assert report.verdict

    def test_table_value_alpha_08_gamma_5(self):
        report = geometric_fit_test(0.8, gamma=5, n_steps=50_000, seed=8)
        assert report.extras["expected_mean"] == pytest.approx(3.689, abs=1e-3)
        assert report.extras["mean_rel_gap"] <= 0.02
        assert report.verdict

    def test_histogram_sums_to_steps(self):
        report = geometric_fit_test(0.5, gamma=4, n_steps=2000, seed=9)
        assert sum(report.extras["histogram"]) == 2000


class TestSimulateWalltime:
    def test_free_draft_same_model_gives_gamma_plus_one(self):
        m = StatelessModel(np.array([0.4, 0.6]))
        report = simulate_walltime(
            m, m, CostModel(c=0.0), SpecConfig(gamma=3, seed=10), n_tokens=2000
        )
        assert report.empirical_speedup == pytest.approx(4.0)
        assert report.alpha_hat == 1.0

    def test_stateless_gap_below_two_percent(self):
        target, draft = stateless_pair(0.7)
        report = simulate_walltime(
            target, draft, CostModel(c=0.02), SpecConfig(gamma=3, seed=11), n_tokens=10_000
        )
        assert abs(report.rel_gap) < 0.02

    def test_speedup_bounds(self):
        for alpha, gamma, c in [(0.3, 2, 0.05), (0.7, 5, 0.02), (0.9, 8, 0.0)]:
            target, draft = stateless_pair(alpha)
            report = simulate_walltime(
                target, draft, CostModel(c=c), SpecConfig(gamma=gamma, seed=12), n_tokens=5000
            )
            upper = min(gamma + 1.0, 1.0 / (1.0 - alpha)) / (gamma * c + 1.0)
            lower = 1.0 / (gamma * c + 1.0)
            assert lower - 1e-9 <= report.empirical_speedup <= upper + 0.05 * upper

    def test_multi_run_aggregation(self):
        target, draft = stateless_pair(0.5)
        report = simulate_walltime(
            target, draft, CostModel(c=0.01), SpecConfig(gamma=2, seed=13),
            n_tokens=1000, n_runs=3,
        )
        assert len(report.runs) == 3
        assert all(r.tokens >= 1000 for r in report.runs)
        assert report.row("demo")["gamma"] == 2

    def test_batch_penalty_charges_more(self):
        target, draft = stateless_pair(0.6)
        cfg = SpecConfig(gamma=3, seed=14)
        free = simulate_walltime(target, draft, CostModel(), cfg, n_tokens=2000)
        taxed = simulate_walltime(target, draft, CostModel(), cfg, n_tokens=2000,
                                  batch_penalty=0.2)
        assert taxed.empirical_speedup < free.empirical_speedup

    def test_timeline_reflects_real_steps(self):
        target, draft = stateless_pair(0.5)
        report = simulate_walltime(target, draft, CostModel(), SpecConfig(gamma=2, seed=18),
                                   n_tokens=100)
        lines = report.timeline(max_steps=5).splitlines()
        assert len(lines) == 5
        assert all("[q][q][P]" in line for line in lines)
        shown = [int(line.rsplit("->", 1)[1].split()[0]) for line in lines]
        assert shown == report.first_step_tokens[:5]
        assert all(1 <= k <= 3 for k in shown)

    def test_ngram_pair_gap_is_reported_not_asserted(self):
        # Non-stateless models break the i.i.d. assumption; the gap is
        # informational output, so just require the report to be well formed.
        rng = RandomStream(15)
        vocab = 6
        mp = train_ngram([int(u * vocab) for u in rng.uniform_block(400)], 2, vocab)
        mq = train_ngram([int(u * vocab) for u in rng.uniform_block(400)], 2, vocab)
        report = simulate_walltime(
            mp, mq, CostModel(c=0.05), SpecConfig(gamma=3, seed=16), n_tokens=3000
        )
        assert 0.0 <= report.alpha_hat <= 1.0
        assert report.empirical_speedup > 0.0
        assert np.isfinite(report.rel_gap)


class TestRejectionComparison:
    def test_equal_distributions_both_one(self):
        m = StatelessModel(np.array([0.3, 0.7]))
        rows = rejection_comparison(m, m, [[0]])
        assert rows[0]["speculative_alpha"] == pytest.approx(1.0)
        assert rows[0]["rejection_accept"] == pytest.approx(1.0)

    def test_hand_example(self):
        mp = StatelessModel(np.array([0.8, 0.2]))
        mq = StatelessModel(np.array([0.5, 0.5]))
        rows = rejection_comparison(mp, mq, [[0]])
        assert rows[0]["speculative_alpha"] == pytest.approx(0.7)
        assert rows[0]["rejection_accept"] == pytest.approx(0.625)

    def test_dominance_over_random_pairs(self):
        rng = RandomStream(104)
        for _ in range(10_000):
            p, q = random_pair(rng, 16)
            r = rejection_accept_probability(p, q)
            b = beta(p, q)
            assert r <= b + 1e-12

    def test_strict_dominance_when_different(self):
        rng = RandomStream(105)
        for _ in range(500):
            p, q = random_pair(rng, 8)
            if float(np.abs(p.probs - q.probs).max()) > 1e-9:
                assert rejection_accept_probability(p, q) < beta(p, q)


def test_simulated_speedup_vs_expected_tokens_identity():
    # Free draft: empirical speedup equals tokens per step, which must land
    # near the closed form.
    target, draft = stateless_pair(0.8)
    report = simulate_walltime(
        target, draft, CostModel(c=0.0), SpecConfig(gamma=5, seed=17), n_tokens=20_000
    )
    assert report.empirical_speedup == pytest.approx(expected_tokens(0.8, 5), rel=0.02)
