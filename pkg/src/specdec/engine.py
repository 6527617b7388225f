"""Speculative decoding: draft with the cheap model, verify with the target.

One decoding step drafts ``gamma`` tokens autoregressively from the draft
model, evaluates the target model on all ``gamma + 1`` candidate prefixes in
a single batched call, accepts a prefix of the drafts by the ratio test, and
finishes with one token sampled either from the residual distribution at the
first rejection or from the target's extra position when everything was
accepted. Every step therefore emits between 1 and ``gamma + 1`` tokens for
exactly one (batched) target call, and with lenience 1 the emitted tokens
are distributed exactly as if they had been sampled from the target alone.

RNG consumption per step is fixed regardless of outcomes: ``gamma`` draft
variates, then ``gamma`` acceptance variates (all drawn even after an early
rejection), then one final-sample variate. This keeps stream positions, and
therefore whole traces, comparable across runs and configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .distmath import (
    AllZeroError,
    Distribution,
    IDENTITY_POLICY,
    SamplingPolicy,
    VocabMismatchError,
    inverse_cdf,
    residual,
    sample,
    standardize,
)
from .models import LanguageModel
from .rng import RandomStream

__all__ = [
    "SpecConfig",
    "DraftedToken",
    "StepTrace",
    "DecodeTotals",
    "DecodeResult",
    "speculative_step",
    "decode",
    "standard_decode",
    "argmax_lenient_accept",
    "rejection_baseline_step",
]

# Valid test-only fault injections for speculative_step.
MUTATIONS = ("skip_residual", "resample_q", "accept_off_by_one")


@dataclass(frozen=True)
class SpecConfig:
    """Decoding-run parameters shared by all engine entry points."""

    gamma: int
    policy: SamplingPolicy = IDENTITY_POLICY
    lenience: float = 1.0
    seed: int = 0
    max_new_tokens: int = 64
    stop_token: int | None = None

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not (0.0 < self.lenience <= 1.0):
            raise ValueError("lenience must lie in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


class DraftedToken(NamedTuple):
    token: int
    q_prob: float  # draft-model probability of the token at its position
    p_prob: float  # target-model probability of the token at its position


@dataclass
class StepTrace:
    """What one decoding step did: drafts, accept count, and the final token.

    ``correction_source`` is ``"residual"`` (rejection, resampled from the
    adjusted distribution), ``"extra"`` (all drafts accepted, sampled from
    the target's extra position), ``"draft_fallback"`` (rejection but the
    residual underflowed to zero, so the draft token stands), or
    ``"target_argmax"`` / ``"standard"`` for the argmax-lenient and plain
    autoregressive paths.
    """

    drafted: list[DraftedToken]
    accepted_n: int
    correction: int
    correction_source: str
    target_calls: int = 1
    draft_calls: int = 0

    @property
    def emitted(self) -> int:
        return self.accepted_n + 1

    def to_dict(self) -> dict:
        return {
            "drafted": [list(d) for d in self.drafted],
            "accepted_n": self.accepted_n,
            "correction": self.correction,
            "correction_source": self.correction_source,
            "target_calls": self.target_calls,
            "draft_calls": self.draft_calls,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepTrace":
        return cls(
            drafted=[DraftedToken(int(t), float(qp), float(pp)) for t, qp, pp in d["drafted"]],
            accepted_n=d["accepted_n"],
            correction=d["correction"],
            correction_source=d["correction_source"],
            target_calls=d["target_calls"],
            draft_calls=d["draft_calls"],
        )


@dataclass
class DecodeTotals:
    target_calls: int = 0
    draft_calls: int = 0
    tokens_emitted: int = 0

    def to_dict(self) -> dict:
        return {
            "target_calls": self.target_calls,
            "draft_calls": self.draft_calls,
            "tokens_emitted": self.tokens_emitted,
        }


@dataclass
class DecodeResult:
    tokens: list[int]
    traces: list[StepTrace] = field(default_factory=list)
    totals: DecodeTotals = field(default_factory=DecodeTotals)

    def to_dict(self) -> dict:
        return {
            "tokens": self.tokens,
            "traces": [t.to_dict() for t in self.traces],
            "totals": self.totals.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeResult":
        return cls(
            tokens=list(d["tokens"]),
            traces=[StepTrace.from_dict(t) for t in d["traces"]],
            totals=DecodeTotals(**d["totals"]),
        )


def _check_vocab(target: LanguageModel, draft: LanguageModel) -> None:
    if target.vocab_size != draft.vocab_size:
        raise VocabMismatchError(
            f"target vocab {target.vocab_size} != draft vocab {draft.vocab_size}"
        )


def argmax_lenient_accept(p: Distribution, draft: int, lenience: float) -> bool:
    """Lenient acceptance for argmax decoding, applied before standardizing.

    Accepts the drafted token iff ``p[draft] >= lenience * max(p)`` on the
    raw (un-argmaxed) target distribution; ties at the boundary accept.
    With lenience 1 only tokens tied for the maximum pass, and as lenience
    approaches 0 anything with positive probability passes.
    """
    if not (0.0 < lenience <= 1.0):
        raise ValueError("lenience must lie in (0, 1]")
    return bool(p.probs[draft] >= lenience * float(p.probs.max()))


def speculative_step(
    target: LanguageModel,
    draft: LanguageModel,
    prefix: Sequence[int],
    config: SpecConfig,
    rng: RandomStream,
    *,
    _mutation: str | None = None,
) -> tuple[list[int], StepTrace]:
    """One draft/verify step; returns 1..gamma+1 appended tokens and its trace.

    ``_mutation`` injects a named, deliberately broken variant (see
    ``MUTATIONS``) so statistical tests can prove they would catch an
    incorrect engine. Production callers leave it ``None``.
    """
    if _mutation is not None and _mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {_mutation!r}")
    _check_vocab(target, draft)
    gamma = config.gamma
    lenience = config.lenience
    policy = config.policy

    # Argmax-lenient mode judges drafts on the raw target distribution
    # (before the argmax collapse); the exact ratio test applies otherwise.
    argmax_lenient = policy.is_argmax and lenience < 1.0

    base = list(prefix)
    drafts: list[int] = []
    q_dists: list[Distribution] = []
    for _ in range(gamma):
        qd = draft.next_distribution(base, policy)
        x = sample(qd, rng)
        drafts.append(x)
        q_dists.append(qd)
        base.append(x)

    prefix_list = list(prefix)
    candidates = [prefix_list + drafts[:i] for i in range(gamma + 1)]
    # The single designated concurrency point: one batched target call
    # covering all gamma+1 candidate prefixes, results in prefix order.
    raw_dists: list[Distribution] | None = None
    if argmax_lenient:
        # Standardize the one batch of raw scores both ways; the raw view
        # feeds the lenient acceptance rule.
        scores = target.evaluate_batch(candidates)
        from_logits = target.score_kind == "logits"
        p_dists = [standardize(s, policy, from_logits=from_logits) for s in scores]
        raw_dists = [standardize(s, IDENTITY_POLICY, from_logits=from_logits) for s in scores]
    else:
        p_dists = target.next_distribution_batch(candidates, policy)

    # All gamma acceptance variates are drawn up front so the stream
    # position never depends on where the first rejection lands.
    rs = [rng.uniform() for _ in range(gamma)]

    n = gamma
    for i in range(gamma):
        x = drafts[i]
        if argmax_lenient:
            accepted = argmax_lenient_accept(raw_dists[i], x, lenience)
        else:
            q_x = float(q_dists[i].probs[x])
            # A drafted token always has positive draft probability.
            assert q_x > 0.0, "drafted token with zero draft probability"
            ratio = float(p_dists[i].probs[x]) / (lenience * q_x)
            accepted = not (rs[i] > ratio)
        if not accepted:
            n = i
            break
    if _mutation == "accept_off_by_one" and n < gamma:
        n += 1  # deliberately accepts the rejected draft as well

    u_final = rng.uniform()  # always consumed, even on the fallback path
    if n < gamma:
        if _mutation == "skip_residual":
            final = inverse_cdf(p_dists[n], u_final)
            source = "residual"
        elif _mutation == "resample_q":
            final = inverse_cdf(q_dists[n], u_final)
            source = "residual"
        elif argmax_lenient:
            final = inverse_cdf(p_dists[n], u_final)
            source = "target_argmax"
        else:
            try:
                rd = residual(p_dists[n], q_dists[n], lenience)
            except AllZeroError:
                # p <= l*q everywhere up to float underflow: rejection had
                # probability ~0, so the draft token stands.
                final = drafts[n]
                source = "draft_fallback"
            else:
                final = inverse_cdf(rd, u_final)
                source = "residual"
    else:
        final = inverse_cdf(p_dists[gamma], u_final)
        source = "extra"

    tokens = drafts[:n] + [final]
    trace = StepTrace(
        drafted=[
            DraftedToken(drafts[i], float(q_dists[i].probs[drafts[i]]), float(p_dists[i].probs[drafts[i]]))
            for i in range(gamma)
        ],
        accepted_n=n,
        correction=final,
        correction_source=source,
        target_calls=1,
        draft_calls=gamma,
    )
    return tokens, trace


def decode(
    target: LanguageModel,
    draft: LanguageModel,
    prompt: Sequence[int],
    config: SpecConfig,
    *,
    bos_token: int | None = None,
    keep_traces: bool = True,
) -> DecodeResult:
    """Full speculative generation loop.

    Stops once ``max_new_tokens`` tokens are kept or the stop token appears;
    a stop token inside an accepted block truncates the output right after
    it and discards the rest of the block, and a step overshooting the
    budget is truncated the same way. The number of batched target calls
    never exceeds the number of tokens kept.
    """
    _check_vocab(target, draft)
    ctx = list(prompt)
    if not ctx:
        if bos_token is None:
            raise ValueError("empty prompt and no bos_token to inject")
        ctx = [bos_token]
    rng = RandomStream(config.seed)

    seq = list(ctx)  # prompt plus kept tokens, grown in place
    tokens: list[int] = []
    traces: list[StepTrace] = []
    totals = DecodeTotals()
    while len(tokens) < config.max_new_tokens:
        step_tokens, trace = speculative_step(target, draft, seq, config, rng)
        totals.target_calls += trace.target_calls
        totals.draft_calls += trace.draft_calls
        if keep_traces:
            traces.append(trace)
        stopped = False
        for t in step_tokens:
            tokens.append(t)
            seq.append(t)
            if config.stop_token is not None and t == config.stop_token:
                stopped = True
                break
            if len(tokens) >= config.max_new_tokens:
                break
        if stopped:
            break
    totals.tokens_emitted = len(tokens)
    assert totals.target_calls <= totals.tokens_emitted, "worst-case call guarantee violated"
    return DecodeResult(tokens=tokens, traces=traces, totals=totals)


def standard_decode(
    target: LanguageModel,
    prompt: Sequence[int],
    config: SpecConfig,
    *,
    bos_token: int | None = None,
    keep_traces: bool = True,
) -> DecodeResult:
    """Plain autoregressive baseline: one target call per token, same
    standardize-then-sample path as the speculative engine."""
    ctx = list(prompt)
    if not ctx:
        if bos_token is None:
            raise ValueError("empty prompt and no bos_token to inject")
        ctx = [bos_token]
    rng = RandomStream(config.seed)

    seq = list(ctx)
    tokens: list[int] = []
    traces: list[StepTrace] = []
    totals = DecodeTotals()
    for _ in range(config.max_new_tokens):
        d = target.next_distribution(seq, config.policy)
        x = sample(d, rng)
        tokens.append(x)
        seq.append(x)
        totals.target_calls += 1
        if keep_traces:
            traces.append(
                StepTrace(drafted=[], accepted_n=0, correction=x,
                          correction_source="standard", target_calls=1, draft_calls=0)
            )
        if config.stop_token is not None and x == config.stop_token:
            break
    totals.tokens_emitted = len(tokens)
    return DecodeResult(tokens=tokens, traces=traces, totals=totals)


def rejection_baseline_step(
    target: LanguageModel,
    draft: LanguageModel,
    prefix: Sequence[int],
    rng: RandomStream,
    policy: SamplingPolicy = IDENTITY_POLICY,
) -> int:
    """Non-iterative rejection sampling baseline: exact, but accepts less.

    Draws x ~ q and accepts with probability p(x) / (M q(x)) where M is the
    worst-case ratio over q's support; otherwise falls back to sampling the
    unmodified target distribution. The output is distributed exactly as p,
    but the acceptance probability is 1/M (over q's support), never above
    the overlap sum(min(p, q)) that speculative sampling achieves.
    """
    _check_vocab(target, draft)
    p = target.next_distribution(prefix, policy)
    q = draft.next_distribution(prefix, policy)
    support = q.probs > 0.0
    m = float((p.probs[support] / q.probs[support]).max())
    x = sample(q, rng)
    r = rng.uniform()
    if m > 0.0 and r < float(p.probs[x]) / (m * float(q.probs[x])):
        return x
    return sample(p, rng)
