"""Closed-form analysis: acceptance rates, token/walltime/ops factors,
optimal draft counts, and the sweep generators."""

from __future__ import annotations

import io
import math

import numpy as np
import pytest

from specdec.analysis import (
    AlphaEstimate,
    CostModel,
    DomainError,
    TABLE1_GRID,
    beta,
    estimate_alpha,
    estimate_lenient_alpha,
    expected_tokens,
    improvement_condition,
    lenient_alpha,
    memory_access_factor,
    ops_factor,
    optimal_gamma,
    oracle_gamma_bound,
    sweep,
    trace_accept_rate,
    walltime_factor,
    write_sweep_csv,
)
from specdec.distmath import Distribution, IDENTITY_POLICY
from specdec.engine import SpecConfig, decode
from specdec.models import StatelessModel, stateless_pair, train_ngram
from specdec.rng import RandomStream

from conftest import random_pair


class TestBeta:
    def test_identical(self):
        p = Distribution(np.array([0.3, 0.7]))
        assert beta(p, p) == 1.0

    def test_disjoint(self):
        assert beta(Distribution(np.array([1.0, 0.0])), Distribution(np.array([0.0, 1.0]))) == 0.0

    def test_hand_sum(self):
        p = Distribution(np.array([0.8, 0.2]))
        q = Distribution(np.array([0.5, 0.5]))
        assert beta(p, q) == pytest.approx(0.7)


class TestLenientAlpha:
    def test_lenience_one_is_beta(self):
        p, q = random_pair(RandomStream(2), 8)
        assert lenient_alpha(p, q, 1.0) == pytest.approx(beta(p, q), abs=1e-15)

    def test_lenience_to_zero_approaches_one(self):
        p, q = random_pair(RandomStream(3), 8)
        assert lenient_alpha(p, q, 1e-9) == pytest.approx(1.0, abs=1e-6)

    def test_hand_example(self):
        p = Distribution(np.array([0.8, 0.2]))
        q = Distribution(np.array([0.5, 0.5]))
        assert lenient_alpha(p, q, 0.5) == pytest.approx(0.9)

    def test_domain(self):
        p, q = random_pair(RandomStream(4), 4)
        with pytest.raises(DomainError):
            lenient_alpha(p, q, 0.0)


class TestExpectedTokens:
    def test_table_values(self):
        assert expected_tokens(0.8, 5) == pytest.approx(3.68928, abs=1e-5)
        assert expected_tokens(0.9, 10) == pytest.approx(6.8619, abs=1e-4)

    def test_zero_alpha(self):
        for gamma in (1, 3, 10):
            assert expected_tokens(0.0, gamma) == 1.0

    def test_alpha_one_limit(self):
        assert expected_tokens(1.0, 6) == 7.0
        assert expected_tokens(1.0 - 1e-14, 6) == pytest.approx(7.0)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            expected_tokens(-0.1, 3)
        with pytest.raises(DomainError):
            expected_tokens(1.1, 3)

    def test_monotone_in_alpha_and_gamma(self):
        alphas = np.linspace(0.0, 0.99, 34)
        for gamma in (1, 2, 5, 10):
            vals = [expected_tokens(a, gamma) for a in alphas]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        for a in (0.1, 0.5, 0.9):
            vals = [expected_tokens(a, g) for g in range(1, 30)]
            assert all(b >= a_ - 1e-12 for a_, b in zip(vals, vals[1:]))

    def test_bounded_by_cap_and_oracle(self):
        for a in (0.0, 0.3, 0.7, 0.95):
            for g in (1, 4, 12):
                v = expected_tokens(a, g)
                assert v <= g + 1 + 1e-12
                if a < 1.0:
                    assert v <= oracle_gamma_bound(a) + 1e-12


class TestWalltimeFactor:
    def test_reference_settings(self):
        assert walltime_factor(0.75, 7, 0.02) == pytest.approx(3.157, abs=5e-4)
        assert walltime_factor(0.62, 7, 0.02) == pytest.approx(2.258, abs=5e-4)

    def test_gamma_one_zero_cost_is_one_plus_alpha(self):
        for a in (0.1, 0.5, 0.9):
            assert walltime_factor(a, 1, 0.0) == pytest.approx(1.0 + a)

    def test_gamma_zero_is_one(self):
        assert walltime_factor(0.7, 0, 0.05) == 1.0

    def test_never_exceeds_expected_tokens(self):
        rng = RandomStream(5)
        for _ in range(200):
            a = rng.uniform() * 0.999
            g = 1 + int(rng.uniform() * 15)
            c = rng.uniform() * 0.5
            assert walltime_factor(a, g, c) <= expected_tokens(a, g) + 1e-12
        assert walltime_factor(0.5, 3, 0.0) == expected_tokens(0.5, 3)

    def test_bigram_story_value(self):
        # alpha ~ 0.2 at negligible cost yields ~1.25x with 3 drafts.
        assert walltime_factor(0.2, 3, 0.0) == pytest.approx(1.248, abs=1e-3)


class TestImprovementCondition:
    def test_boundary_equality_gives_factor_one(self):
        improves, floor = improvement_condition(0.5, 0.5)
        assert not improves
        assert floor == pytest.approx(1.0)
        assert walltime_factor(0.5, 1, 0.5) == pytest.approx(1.0)

    def test_cheap_draft(self):
        improves, floor = improvement_condition(0.2, 0.0)
        assert improves and floor == pytest.approx(1.2)


class TestOpsFactor:
    def test_table_values(self):
        assert ops_factor(0.6, 2, 0.0) == pytest.approx(1.5306, abs=1e-4)
        assert ops_factor(0.9, 2, 0.0) == pytest.approx(1.107, abs=1e-3)

    def test_all_rejected(self):
        # alpha=0, gamma=1: two prefixes evaluated per emitted token.
        assert ops_factor(0.0, 1, 0.0) == 2.0

    def test_at_least_one_when_free_draft(self):
        for a in (0.0, 0.4, 0.9, 0.999):
            for g in (1, 3, 10):
                assert ops_factor(a, g, 0.0) >= 1.0 - 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            ops_factor(0.5, 0, 0.0)


class TestMemoryAccessFactor:
    def test_equals_expected_tokens(self):
        for a, g in TABLE1_GRID:
            assert memory_access_factor(a, g) == expected_tokens(a, g)


class TestOptimalGamma:
    def test_no_improvement_when_alpha_below_cost(self):
        choice = optimal_gamma(0.3, 0.4)
        assert (choice.gamma, choice.factor) == (0, 1.0)
        assert not choice.saturated

    def test_zero_cost_saturates(self):
        choice = optimal_gamma(0.5, 0.0, gamma_max=50)
        assert choice.gamma == 50
        assert choice.saturated

    def test_scan_matches_direct_formula_argmax(self):
        # Independent oracle: re-evaluate the walltime formula directly
        # over the whole grid and take the argmax.
        alpha, c, gmax = 0.8, 0.05, 400
        factors = [
            (1 - alpha ** (g + 1)) / ((1 - alpha) * (g * c + 1)) for g in range(gmax + 1)
        ]
        best = int(np.argmax(factors))
        choice = optimal_gamma(alpha, c, gamma_max=gmax)
        assert choice.gamma == best
        assert choice.factor == pytest.approx(factors[best], rel=1e-12)
        assert not choice.saturated

    def test_local_optimality(self):
        for alpha in (0.3, 0.6, 0.9):
            for c in (0.01, 0.05, 0.2):
                choice = optimal_gamma(alpha, c)
                if choice.saturated:
                    continue
                here = walltime_factor(alpha, choice.gamma, c)
                assert here >= walltime_factor(alpha, choice.gamma + 1, c) - 1e-12
                if choice.gamma > 0:
                    assert here >= walltime_factor(alpha, choice.gamma - 1, c) - 1e-12

    def test_smallest_tie_wins(self):
        # alpha=0: every gamma gives factor 1 at c=0; gamma 0 must win.
        choice = optimal_gamma(0.0, 0.0)
        assert choice.gamma == 0 and not choice.saturated


class TestOracleBound:
    def test_values(self):
        assert oracle_gamma_bound(0.0) == 1.0
        assert oracle_gamma_bound(0.5) == 2.0

    def test_dominates_all_gammas(self):
        for a in (0.2, 0.5, 0.9):
            bound = oracle_gamma_bound(a)
            for g in range(1, 60):
                assert bound >= expected_tokens(a, g) - 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            oracle_gamma_bound(1.0)


class TestEstimateAlpha:
    def test_same_model_gives_one(self):
        m = train_ngram([0, 1, 2, 0, 1, 2], order=2, vocab_size=3)
        est = estimate_alpha(m, m, [[0]], n_tokens=50)
        assert est.alpha == pytest.approx(1.0, abs=1e-12)

    def test_stateless_is_exact_with_zero_error(self):
        p, q = stateless_pair(0.7, vocab_size=4)
        est = estimate_alpha(p, q, [[0]], n_tokens=100)
        assert est.alpha == pytest.approx(0.7, abs=1e-12)
        assert est.std_error == pytest.approx(0.0, abs=1e-12)
        assert est.n_tokens == 100

    def test_cross_check_against_trace_accept_rate(self):
        # Two independent estimators of the same expectation must agree
        # within their sampling noise.
        rng = RandomStream(6)
        vocab = 6
        corpus_p = [int(u * vocab) for u in rng.uniform_block(600)]
        corpus_q = [int(u * vocab) for u in rng.uniform_block(600)]
        mp = train_ngram(corpus_p, order=2, vocab_size=vocab)
        mq = train_ngram(corpus_q, order=2, vocab_size=vocab)
        est = estimate_alpha(mp, mq, [[0]], n_tokens=4000, seed=8)
        res = decode(mp, mq, [0], SpecConfig(gamma=3, seed=9, max_new_tokens=4000))
        emp = trace_accept_rate(res)
        tolerance = 2.0 * math.hypot(est.std_error, emp.std_error)
        assert abs(est.alpha - emp.alpha) <= max(tolerance, 0.02)

    def test_corpus_scored_variant(self):
        mp = train_ngram([0, 1, 0, 1, 0, 1], order=2, vocab_size=2)
        mq = train_ngram([1, 0, 1, 1, 0, 0], order=2, vocab_size=2)
        corpus = [0, 1, 0, 0, 1, 1, 0]
        est = estimate_alpha(mp, mq, [], n_tokens=6, corpus=corpus)
        # Oracle: average beta along the corpus positions directly.
        expected = np.mean([
            beta(mp.next_distribution(corpus[:t], IDENTITY_POLICY),
                 mq.next_distribution(corpus[:t], IDENTITY_POLICY))
            for t in range(1, 7)
        ])
        assert est.alpha == pytest.approx(float(expected), abs=1e-12)

    def test_lenient_estimate_matches_pointwise_formula(self):
        p, q = stateless_pair(0.6, vocab_size=4)
        est = estimate_lenient_alpha(p, q, [[0]], n_tokens=20, lenience=0.5)
        want = lenient_alpha(
            p.next_distribution([], IDENTITY_POLICY),
            q.next_distribution([], IDENTITY_POLICY),
            0.5,
        )
        assert est.alpha == pytest.approx(want, abs=1e-12)


class TestMonteCarloConsistency:
    def test_accept_rate_matches_beta(self):
        p, q = stateless_pair(0.65, vocab_size=4)
        res = decode(p, q, [0], SpecConfig(gamma=2, seed=10, max_new_tokens=100_000),
                     keep_traces=True)
        emp = trace_accept_rate(res)
        assert emp.n_tokens > 50_000  # judged positions, fewer than tokens emitted
        assert abs(emp.alpha - 0.65) <= 3 * emp.std_error

    def test_accept_rate_with_lenience_matches_lenient_alpha(self):
        rng = RandomStream(12)
        p, q = random_pair(rng, 6)
        mp, mq = StatelessModel(p.probs), StatelessModel(q.probs)
        lenience = 0.45
        want = lenient_alpha(p, q, lenience)
        res = decode(mp, mq, [0],
                     SpecConfig(gamma=2, seed=13, max_new_tokens=30_000, lenience=lenience))
        emp = trace_accept_rate(res)
        assert abs(emp.alpha - want) <= 3 * max(emp.std_error, 1e-4)


class TestSweeps:
    def test_table1_rows(self):
        rows = sweep("table1")
        assert [(r["alpha"], r["gamma"]) for r in rows] == list(TABLE1_GRID)
        by_key = {(r["alpha"], r["gamma"]): r for r in rows}
        assert by_key[(0.8, 5)]["speed"] == pytest.approx(3.68928, abs=1e-5)
        assert by_key[(0.8, 5)]["operations"] == pytest.approx(1.62633, abs=1e-5)

    def test_fig2_alpha_zero_rows_are_one(self):
        rows = sweep("fig2_tokens", alphas=[0.0], gammas=[1, 2, 5])
        assert all(r["expected_tokens"] == 1.0 for r in rows)

    def test_fig2_row_count(self):
        rows = sweep("fig2_tokens", alphas=[0.1, 0.2, 0.3], gammas=[1, 5])
        assert len(rows) == 6

    def test_fig3_local_optimality_and_saturation(self):
        rows = sweep("fig3_optgamma", alphas=[0.3, 0.7], cs=[0.0, 0.05], gamma_max=200)
        for row in rows:
            if row["saturated"]:
                assert row["c"] == 0.0
                continue
            g = row["gamma_star"]
            here = walltime_factor(row["alpha"], g, row["c"])
            assert here >= walltime_factor(row["alpha"], g + 1, row["c"]) - 1e-12

    def test_fig4_columns(self):
        rows = sweep("fig4_speedup_ops", alphas=[0.5], gammas=[2])
        assert rows[0]["speedup"] == pytest.approx(expected_tokens(0.5, 2))
        assert rows[0]["ops_increase"] == pytest.approx(ops_factor(0.5, 2, 0.0))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sweep("fig9")

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            sweep("fig2_tokens", alphas=[])

    def test_csv_emission(self):
        rows = sweep("table1")
        buf = io.StringIO()
        write_sweep_csv(rows, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "alpha,gamma,operations,speed"
        assert len(lines) == 7
        # 6 significant digits
        assert lines[4].split(",")[3] == "3.68928"


class TestCostModel:
    def test_validation(self):
        with pytest.raises(DomainError):
            CostModel(c=-0.1)
        with pytest.raises(DomainError):
            CostModel(unit_target_cost=0.0)

    def test_alpha_estimate_fields(self):
        est = AlphaEstimate(alpha=0.5, n_tokens=10, std_error=0.01)
        assert 0.0 <= est.alpha <= 1.0
