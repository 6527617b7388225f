"""Beam search, plain and speculative.

Both searches rank hypotheses by cumulative log-probability under plain
(policy-free) normalization, with ties broken by the lexicographically
smaller token sequence so results are fully deterministic.

The speculative variant runs draft-model beam search at a wider width for a
block of steps, then verifies the whole block against the target model with
one batched call. A draft step is accepted when the target's true top-w set
is contained in the draft's kept candidates; at the first violation the step
is recomputed from the target's own distributions (already fetched for the
verification) and a fresh block starts. Accepted or not, the surviving beams
are always identical to what plain beam search with the target alone would
produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distmath import IDENTITY_POLICY, Distribution
from .models import LanguageModel

__all__ = ["Beam", "BeamStats", "standard_beam_search", "speculative_beam_search"]


@dataclass(frozen=True)
class Beam:
    """One hypothesis: tokens generated after the prompt, with its score."""

    tokens: tuple[int, ...]
    score: float


@dataclass
class BeamStats:
    """Per-block accounting for the speculative search."""

    steps: int = 0
    accepted_steps: int = 0
    blocks: int = 0
    target_batched_calls: int = 0
    target_sequences: int = 0
    draft_sequences: int = 0
    per_step_accepted: list[bool] = field(default_factory=list)

    @property
    def accept_fraction(self) -> float:
        return self.accepted_steps / self.steps if self.steps else 1.0


def _log_probs(d: Distribution) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(d.probs)


def _extend(beams: Sequence[Beam], dists: Sequence[Distribution]) -> list[Beam]:
    out: list[Beam] = []
    for b, d in zip(beams, dists):
        logp = _log_probs(d)
        for t in range(logp.shape[0]):
            out.append(Beam(b.tokens + (t,), b.score + float(logp[t])))
    return out


def _select(candidates: list[Beam], width: int) -> list[Beam]:
    # Highest score first; equal scores fall back to the smaller sequence.
    return sorted(candidates, key=lambda b: (-b.score, b.tokens))[:width]


def standard_beam_search(
    target: LanguageModel,
    prompt: Sequence[int],
    width: int,
    steps: int,
) -> list[Beam]:
    """Textbook beam search under the target model alone."""
    if width < 1 or steps < 1:
        raise ValueError("width and steps must be >= 1")
    prompt_list = list(prompt)
    beams = [Beam((), 0.0)]
    for _ in range(steps):
        dists = target.next_distribution_batch(
            [prompt_list + list(b.tokens) for b in beams], IDENTITY_POLICY
        )
        beams = _select(_extend(beams, dists), width)
    return beams


def speculative_beam_search(
    target: LanguageModel,
    draft: LanguageModel,
    prompt: Sequence[int],
    width: int,
    draft_width: int,
    gamma: int,
    steps: int,
) -> tuple[list[Beam], BeamStats]:
    """Beam search accelerated by a draft model, with identical results.

    ``draft_width`` (u) must be at least ``width`` (w). Each block costs one
    batched target call over at most ``w + u * gamma`` sequences instead of
    one call per step.
    """
    if draft_width < width:
        raise ValueError("draft_width must be >= width")
    if width < 1 or gamma < 1 or steps < 1:
        raise ValueError("width, gamma and steps must be >= 1")
    prompt_list = list(prompt)

    def seqs(beams: Sequence[Beam]) -> list[list[int]]:
        return [prompt_list + list(b.tokens) for b in beams]

    exact = [Beam((), 0.0)]
    stats = BeamStats()
    steps_done = 0
    while steps_done < steps:
        block = min(gamma, steps - steps_done)
        stats.blocks += 1

        # Draft pass: widen to u and run the block on the cheap model.
        # Draft beams inherit the exact scores of their roots; only the
        # per-step increments come from the draft model, and only the kept
        # *sets* matter for correctness.
        levels: list[list[Beam]] = []
        dbeams = exact
        for _ in range(block):
            ddists = draft.next_distribution_batch(seqs(dbeams), IDENTITY_POLICY)
            stats.draft_sequences += len(dbeams)
            dbeams = _select(_extend(dbeams, ddists), draft_width)
            levels.append(dbeams)

        # One batched target call over the roots and every draft level.
        to_eval: dict[tuple[int, ...], None] = {b.tokens: None for b in exact}
        for level in levels:
            for b in level:
                to_eval.setdefault(b.tokens)
        eval_tokens = list(to_eval)
        eval_dists = target.next_distribution_batch(
            [prompt_list + list(t) for t in eval_tokens], IDENTITY_POLICY
        )
        tdist = dict(zip(eval_tokens, eval_dists))
        stats.target_batched_calls += 1
        stats.target_sequences += len(eval_tokens)

        # Replay the exact search against the draft's kept sets.
        for level in levels:
            candidates = _extend(exact, [tdist[b.tokens] for b in exact])
            exact = _select(candidates, width)
            steps_done += 1
            stats.steps += 1
            kept = {b.tokens for b in level}
            accepted = all(b.tokens in kept for b in exact)
            stats.per_step_accepted.append(accepted)
            if accepted:
                stats.accepted_steps += 1
            else:
                # The violated step was just recomputed from target
                # distributions; deeper draft levels no longer apply.
                break
    return exact, stats
