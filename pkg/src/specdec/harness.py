"""Verification and simulation harness.

The centerpiece is :func:`exact_step_distribution`: an analytic integration
of one speculative token that must reproduce the target distribution
bit-for-bit (to 1e-12) at lenience 1. Around it sit statistical equivalence
tests against the sampled engine (with deliberate engine mutations to prove
the tests have teeth), a goodness-of-fit check of the tokens-per-step law,
a cost-model walltime simulation reporting expected-vs-empirical speedups,
and the rejection-sampling comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as scipy_stats

from .analysis import CostModel, beta, walltime_factor
from .distmath import Distribution, IDENTITY_POLICY, SamplingPolicy, sample_many
from .engine import SpecConfig, speculative_step
from .models import LanguageModel, stateless_pair
from .rng import RandomStream

__all__ = [
    "ContextResult",
    "EquivalenceReport",
    "RunStats",
    "SimReport",
    "exact_step_distribution",
    "equivalence_test",
    "geometric_fit_test",
    "simulate_walltime",
    "rejection_comparison",
    "rejection_accept_probability",
]

# Enumeration guard for the analytic oracle.
_MAX_ENUMERABLE_VOCAB = 4096

# Bins with expected count below this are pooled before chi-square.
_MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class ContextResult:
    statistic: float
    dof: int
    p_value: float
    tv_distance: float


@dataclass
class EquivalenceReport:
    """Outcome of a statistical equivalence check.

    ``verdict`` passes iff the (Bonferroni-combined) p-value exceeds the
    configured threshold.
    """

    per_context: list[ContextResult]
    p_value: float
    threshold: float
    n_samples: int
    max_tv_distance: float
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return self.p_value > self.threshold

    def summary(self) -> str:
        state = "PASS" if self.verdict else "FAIL"
        return (
            f"{state}: combined p={self.p_value:.3g} (threshold {self.threshold}), "
            f"max TV={self.max_tv_distance:.3g}, n={self.n_samples} per arm, "
            f"{len(self.per_context)} context(s)"
        )


def exact_step_distribution(p: Distribution, q: Distribution, lenience: float = 1.0) -> Distribution:
    """Analytically integrate one speculative token.

    Output mass at x is the accepted mass min(q(x), p(x)/l) plus the total
    rejection probability times the residual distribution. At lenience 1
    this must equal p exactly; for l < 1 no entry can exceed p(x)/l.
    """
    if p.vocab_size != q.vocab_size:
        raise ValueError("vocab sizes differ")
    if p.vocab_size > _MAX_ENUMERABLE_VOCAB:
        raise ValueError(f"vocab {p.vocab_size} exceeds enumeration guard {_MAX_ENUMERABLE_VOCAB}")
    if not (0.0 < lenience <= 1.0):
        raise ValueError("lenience must lie in (0, 1]")
    accept_mass = np.minimum(q.probs, p.probs / lenience)
    accept_total = float(accept_mass.sum())
    raw_residual = np.maximum(p.probs - lenience * q.probs, 0.0)
    residual_total = float(raw_residual.sum())
    if residual_total > 0.0:
        out = accept_mass + (1.0 - accept_total) * (raw_residual / residual_total)
    else:
        out = accept_mass  # acceptance is certain; no correction mass exists
    return Distribution(out)


def _pooled_chi2_two_sample(counts_a: np.ndarray, counts_b: np.ndarray) -> ContextResult:
    """Two-sample homogeneity chi-square with small-bin pooling."""
    combined = counts_a + counts_b
    keep = combined > 0
    a, b = counts_a[keep].astype(float), counts_b[keep].astype(float)
    comb = combined[keep].astype(float)
    # Pool bins whose expected count (under equal arms) falls below the
    # threshold into a single overflow bin, smallest first.
    order = np.argsort(comb, kind="stable")
    a, b, comb = a[order], b[order], comb[order]
    n_total = comb.sum()
    expected_share = comb * (a.sum() / n_total)
    small = expected_share < _MIN_EXPECTED
    if small.any():
        big_a = np.concatenate(([a[small].sum()], a[~small]))
        big_b = np.concatenate(([b[small].sum()], b[~small]))
        a, b = big_a, big_b
    if a.shape[0] < 2:
        return ContextResult(statistic=0.0, dof=0, p_value=1.0, tv_distance=0.0)
    table = np.stack([a, b])
    stat, p, dof, _ = scipy_stats.chi2_contingency(table, correction=False)
    tv = 0.5 * float(np.abs(counts_a / counts_a.sum() - counts_b / counts_b.sum()).sum())
    return ContextResult(statistic=float(stat), dof=int(dof), p_value=float(p), tv_distance=tv)


def equivalence_test(
    target: LanguageModel,
    draft: LanguageModel,
    config: SpecConfig,
    n_samples: int,
    context_set: Sequence[Sequence[int]],
    threshold: float = 0.001,
    mutation: str | None = None,
) -> EquivalenceReport:
    """Compare next-token samples from the engine against plain target sampling.

    For each context, draws ``n_samples`` first tokens from fresh
    speculative steps and ``n_samples`` tokens directly from the target's
    standardized distribution, then runs a two-sample chi-square per
    context with Bonferroni combination. A correct engine passes; the
    seeded engine mutations must fail.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 10^4 for a meaningful test")
    if not context_set:
        raise ValueError("need at least one context")
    vocab = target.vocab_size
    results: list[ContextResult] = []
    for ci, context in enumerate(context_set):
        rng = RandomStream(config.seed, stream=2 * ci)
        engine_counts = np.zeros(vocab, dtype=np.int64)
        for _ in range(n_samples):
            tokens, _ = speculative_step(target, draft, context, config, rng, _mutation=mutation)
            engine_counts[tokens[0]] += 1
        ref_rng = RandomStream(config.seed, stream=2 * ci + 1)
        p = target.next_distribution(list(context), config.policy)
        ref_tokens = sample_many(p, ref_rng, n_samples)
        ref_counts = np.bincount(ref_tokens, minlength=vocab)
        results.append(_pooled_chi2_two_sample(engine_counts, ref_counts))
    combined = min(1.0, min(r.p_value for r in results) * len(results))
    return EquivalenceReport(
        per_context=results,
        p_value=combined,
        threshold=threshold,
        n_samples=n_samples,
        max_tv_distance=max(r.tv_distance for r in results),
    )


def geometric_fit_test(
    alpha: float,
    gamma: int,
    n_steps: int,
    seed: int = 0,
    threshold: float = 0.001,
    vocab_size: int = 2,
) -> EquivalenceReport:
    """Check tokens-per-step against the capped geometric law.

    Builds a stateless pair realizing ``alpha`` exactly, runs ``n_steps``
    speculative steps, and chi-squares the histogram of emitted counts
    against P(k) = (1-alpha) * alpha^(k-1) for k <= gamma and
    P(gamma+1) = alpha^gamma. Also reports how far the sample mean sits
    from the closed-form expectation (2% is the conventional gate).
    """
    target, draft = stateless_pair(alpha, vocab_size)
    config = SpecConfig(gamma=gamma, seed=seed)
    rng = RandomStream(seed)
    counts = np.zeros(gamma + 1, dtype=np.int64)  # index k-1 holds "k tokens"
    prefix = [0]
    for _ in range(n_steps):
        tokens, _ = speculative_step(target, draft, prefix, config, rng)
        counts[len(tokens) - 1] += 1

    probs = np.array(
        [(1.0 - alpha) * alpha ** k for k in range(gamma)] + [alpha ** gamma]
    )
    expected = probs * n_steps
    observed = counts.astype(float)
    if observed[expected == 0.0].sum() > 0:
        # Mass on an impossible outcome: fail outright.
        stat, p_value, dof = float("inf"), 0.0, 0
    else:
        nonzero = expected > 0.0
        observed, expected_kept = observed[nonzero], expected[nonzero]
        # Pool small-expectation bins to keep the chi-square valid.
        keep = expected_kept >= _MIN_EXPECTED
        if not keep.all():
            observed = np.concatenate((observed[keep], [observed[~keep].sum()]))
            expected_kept = np.concatenate((expected_kept[keep], [expected_kept[~keep].sum()]))
        if observed.shape[0] >= 2:
            stat, p_value = scipy_stats.chisquare(observed, expected_kept)
            dof = observed.shape[0] - 1
        else:
            stat, p_value, dof = 0.0, 1.0, 0
    tv = 0.5 * float(np.abs(counts / n_steps - probs).sum())

    mean_tokens = float((counts * np.arange(1, gamma + 2)).sum() / n_steps)
    if abs(1.0 - alpha) < 1e-12:
        expected_mean = float(gamma + 1)
    else:
        expected_mean = (1.0 - alpha ** (gamma + 1)) / (1.0 - alpha)
    rel_gap = abs(mean_tokens - expected_mean) / expected_mean
    return EquivalenceReport(
        per_context=[ContextResult(float(stat), dof, float(p_value), tv)],
        p_value=float(p_value),
        threshold=threshold,
        n_samples=n_steps,
        max_tv_distance=tv,
        extras={
            "mean_tokens": mean_tokens,
            "expected_mean": expected_mean,
            "mean_rel_gap": rel_gap,
            "histogram": counts.tolist(),
        },
    )


@dataclass(frozen=True)
class RunStats:
    tokens: int
    steps: int
    cost: float
    speedup: float


# Tokens-per-step kept for the schematic timeline, first run only.
_TIMELINE_STEPS = 40


@dataclass
class SimReport:
    """Expected-vs-empirical walltime comparison under a unit cost model."""

    runs: list[RunStats]
    gamma: int
    cost: CostModel
    alpha_hat: float
    expected_speedup: float
    empirical_speedup: float
    first_step_tokens: list[int] = field(default_factory=list)

    @property
    def rel_gap(self) -> float:
        return self.empirical_speedup / self.expected_speedup - 1.0

    def row(self, task: str = "-") -> dict:
        return {
            "task": task,
            "gamma": self.gamma,
            "alpha": self.alpha_hat,
            "c": self.cost.c,
            "exp": self.expected_speedup,
            "emp": self.empirical_speedup,
            "gap_pct": 100.0 * self.rel_gap,
        }

    def timeline(self, max_steps: int = 12) -> str:
        """Schematic per-step trace: gamma draft calls, one batched target
        call, and the tokens each step yielded."""
        lines = []
        for i, emitted in enumerate(self.first_step_tokens[:max_steps]):
            blocks = "[q]" * self.gamma + "[P]"
            lines.append(f"step {i + 1:>3}: {blocks} -> {emitted} token(s)")
        return "\n".join(lines)


def simulate_walltime(
    target: LanguageModel,
    draft: LanguageModel,
    cost: CostModel,
    config: SpecConfig,
    n_tokens: int = 10_000,
    prompt: Sequence[int] = (0,),
    n_runs: int = 1,
    batch_penalty: float = 0.0,
) -> SimReport:
    """Charge unit costs to a speculative decode and compare with theory.

    Each batched target call costs ``T * (1 + batch_penalty * gamma)``
    (penalty defaults to 0: the gamma+1 evaluations ride along in parallel)
    and each draft call costs ``T * c``. The standard-decoding arm pays
    ``T`` per token on an identical token budget. Run ``n_runs`` times on
    split RNG streams; acceptance is estimated from the traces and fed to
    the closed-form prediction.
    """
    if n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    t_unit = cost.unit_target_cost
    runs: list[RunStats] = []
    first_step_tokens: list[int] = []
    accepted_total = 0
    judged_total = 0
    base_rng = RandomStream(config.seed)
    for run_idx in range(n_runs):
        rng = base_rng.split(run_idx) if n_runs > 1 else base_rng
        ctx = list(prompt)
        emitted = 0
        steps = 0
        run_cost = 0.0
        while emitted < n_tokens:
            tokens, trace = speculative_step(target, draft, ctx, config, rng)
            ctx.extend(tokens)
            emitted += len(tokens)
            steps += 1
            run_cost += t_unit * (1.0 + batch_penalty * config.gamma)
            run_cost += t_unit * cost.c * trace.draft_calls
            accepted_total += trace.accepted_n
            judged_total += min(trace.accepted_n + 1, config.gamma)
            if run_idx == 0 and steps <= _TIMELINE_STEPS:
                first_step_tokens.append(len(tokens))
        runs.append(RunStats(tokens=emitted, steps=steps, cost=run_cost,
                             speedup=(emitted * t_unit) / run_cost))
    total_tokens = sum(r.tokens for r in runs)
    total_cost = sum(r.cost for r in runs)
    empirical = (total_tokens * t_unit) / total_cost
    alpha_hat = accepted_total / judged_total if judged_total else 0.0
    expected = walltime_factor(min(alpha_hat, 1.0 - 1e-15), config.gamma, cost.c)
    return SimReport(
        runs=runs,
        gamma=config.gamma,
        cost=cost,
        alpha_hat=alpha_hat,
        expected_speedup=expected,
        empirical_speedup=empirical,
        first_step_tokens=first_step_tokens,
    )


def rejection_accept_probability(p: Distribution, q: Distribution) -> float:
    """Acceptance probability of non-iterative rejection sampling:
    sum over q's support of p(x) / M with M the worst-case p/q ratio."""
    support = q.probs > 0.0
    if not support.any():
        raise ValueError("q has empty support")
    m = float((p.probs[support] / q.probs[support]).max())
    if m == 0.0:
        return 0.0
    return float(p.probs[support].sum()) / m


def rejection_comparison(
    target: LanguageModel,
    draft: LanguageModel,
    contexts: Sequence[Sequence[int]],
    policy: SamplingPolicy = IDENTITY_POLICY,
) -> list[dict]:
    """Per-context speculative acceptance (beta) vs rejection-sampling acceptance.

    Asserts the paper-level ordering: rejection sampling never accepts more
    often than speculative sampling does.
    """
    rows = []
    for context in contexts:
        p = target.next_distribution(list(context), policy)
        q = draft.next_distribution(list(context), policy)
        b = beta(p, q)
        r = rejection_accept_probability(p, q)
        assert r <= b + 1e-12, f"rejection acceptance {r} exceeds speculative {b}"
        rows.append({"context": list(context), "speculative_alpha": b, "rejection_accept": r})
    return rows
