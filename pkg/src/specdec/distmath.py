"""Probability-vector arithmetic over a finite vocabulary.

A token id is a plain ``int`` in ``[0, vocab_size)``; a :class:`Distribution`
is a dense float64 vector summing to one. Everything downstream (models,
decoders, analysis) trades in these two currencies.

The functions here cover: normalization of raw non-negative scores,
casting any sampling policy (argmax / temperature / top-k / top-p) into
plain sampling from an adjusted distribution, inverse-CDF sampling,
residual distributions for the accept/reject correction step, and the
min-overlap divergence that governs acceptance rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RandomStream

__all__ = [
    "Distribution",
    "SamplingPolicy",
    "AllZeroError",
    "NegativeEntryError",
    "NonFiniteError",
    "PolicyConflictError",
    "VocabMismatchError",
    "normalize",
    "standardize",
    "sample",
    "sample_many",
    "inverse_cdf",
    "residual",
    "dlk",
]

# Construction re-normalizes within this slack and rejects beyond it:
# absorbs float drift without masking genuinely unnormalized inputs.
_SUM_SLACK = 1e-6

# Cumulative-mass comparisons in top-p use this slack so that e.g.
# 0.5 + 0.3 >= 0.8 holds despite binary rounding.
_TOP_P_SLACK = 1e-9


class AllZeroError(ValueError):
    """A vector that must carry mass sums to zero (degenerate residual)."""


class NegativeEntryError(ValueError):
    """A probability-like vector contains a negative entry."""


class NonFiniteError(ValueError):
    """A score vector contains NaN or infinity."""


class PolicyConflictError(ValueError):
    """Mutually exclusive sampling-policy knobs were combined."""


class VocabMismatchError(ValueError):
    """Two distributions or models disagree on vocabulary size."""


class Distribution:
    """Immutable dense probability vector.

    Entries are non-negative and sum to one (re-normalized on construction
    when within ``1e-6`` of one, rejected otherwise). The CDF is cached
    lazily for repeated inverse-CDF sampling.
    """

    __slots__ = ("probs", "_cdf")

    def __init__(self, probs: np.ndarray):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] == 0:
            raise ValueError("distribution must be a non-empty 1-D vector")
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("distribution contains non-finite entries")
        if np.any(p < 0):
            raise NegativeEntryError("distribution contains negative entries")
        total = float(p.sum())
        if total == 0.0:
            raise AllZeroError("distribution sums to zero")
        if abs(total - 1.0) > _SUM_SLACK:
            raise ValueError(f"distribution sums to {total!r}, not 1 (beyond 1e-6 slack)")
        if total != 1.0:
            p = p / total
        p = p.copy() if p is probs else p
        p.flags.writeable = False
        self.probs = p
        self._cdf = None

    @property
    def vocab_size(self) -> int:
        return self.probs.shape[0]

    @property
    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            c = np.cumsum(self.probs)
            c.flags.writeable = False
            self._cdf = c
        return self._cdf

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self) -> int:  # pragma: no cover
        return hash(self.probs.tobytes())

    def __repr__(self) -> str:  # pragma: no cover
        return f"Distribution({np.array2string(self.probs, precision=4, threshold=8)})"


@dataclass(frozen=True)
class SamplingPolicy:
    """How raw model scores become the distribution actually sampled.

    ``argmax`` (equivalently ``temperature == 0``) collapses mass uniformly
    onto the tied maxima and excludes the other knobs. Otherwise transforms
    compose in a fixed order: temperature, then top-k, then top-p.
    """

    temperature: float = 1.0
    top_k: int | None = None
    top_p: float | None = None
    argmax: bool = False

    def __post_init__(self):
        if self.temperature < 0:
            raise PolicyConflictError("temperature must be non-negative")
        if self.is_argmax and (self.top_k is not None or self.top_p is not None):
            raise PolicyConflictError("argmax (temperature 0) excludes top-k/top-p")
        if self.top_k is not None and self.top_k < 1:
            raise PolicyConflictError("top_k must be a positive integer")
        if self.top_p is not None and not (0.0 < self.top_p <= 1.0):
            raise PolicyConflictError("top_p must lie in (0, 1]")

    @property
    def is_argmax(self) -> bool:
        return self.argmax or self.temperature == 0.0


#: Plain sampling: no transform beyond normalization.
IDENTITY_POLICY = SamplingPolicy()


def normalize(raw: np.ndarray) -> Distribution:
    """Scale a non-negative vector to sum one.

    Raises ``AllZeroError`` when there is no mass at all; callers decide
    what a degenerate residual means in their context.
    """
    r = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise NonFiniteError("cannot normalize non-finite entries")
    if np.any(r < 0):
        raise NegativeEntryError("cannot normalize negative entries")
    total = float(r.sum())
    if total <= 0.0:
        raise AllZeroError("cannot normalize an all-zero vector")
    return Distribution(r / total)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def standardize(
    scores: np.ndarray,
    policy: SamplingPolicy = IDENTITY_POLICY,
    *,
    from_logits: bool = False,
) -> Distribution:
    """Cast raw model scores into the adjusted distribution a policy samples from.

    ``scores`` are either logits (softmax applied at temperature) or
    non-negative probability weights (power-renormalized ``p**(1/t)``;
    the probability-input temperature path is an extension beyond plain
    softmax semantics and is exercised only when ``from_logits=False``).
    Argmax puts uniform mass on all entries tied for the maximum.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] == 0:
        raise ValueError("scores must be a non-empty 1-D vector")
    if not np.all(np.isfinite(s)):
        raise NonFiniteError("scores contain non-finite entries")
    if not from_logits and np.any(s < 0):
        raise NegativeEntryError("probability scores contain negative entries")

    if policy.is_argmax:
        # Tie-aware: zero out non-max entries, normalize over the ties.
        mask = (s == s.max()).astype(np.float64)
        return Distribution(mask / mask.sum())

    t = policy.temperature
    if from_logits:
        p = _softmax(s / t) if t != 1.0 else _softmax(s)
    else:
        total = float(s.sum())
        if total <= 0.0:
            raise AllZeroError("probability scores sum to zero")
        p = s / total
        if t != 1.0:
            p = p ** (1.0 / t)
            p = p / p.sum()

    if policy.top_k is not None:
        k = policy.top_k
        if k > p.shape[0]:
            raise PolicyConflictError(f"top_k={k} exceeds vocab size {p.shape[0]}")
        if k < p.shape[0]:
            # Stable sort on the negated vector: ties at the cutoff keep
            # the lower token index.
            order = np.argsort(-p, kind="stable")
            kept = np.zeros_like(p)
            kept[order[:k]] = p[order[:k]]
            p = kept / kept.sum()

    if policy.top_p is not None and policy.top_p < 1.0:
        order = np.argsort(-p, kind="stable")
        csum = np.cumsum(p[order])
        cut = int(np.searchsorted(csum, policy.top_p - _TOP_P_SLACK, side="left"))
        kept = np.zeros_like(p)
        kept[order[: cut + 1]] = p[order[: cut + 1]]
        p = kept / kept.sum()

    return Distribution(p)


def inverse_cdf(d: Distribution, u: float) -> int:
    """Token at quantile ``u`` of ``d``; P(token = i) = d.probs[i] for u ~ U[0,1)."""
    idx = int(np.searchsorted(d.cdf, u, side="right"))
    if idx >= d.vocab_size:
        # Reachable only when rounding leaves cdf[-1] slightly below 1.
        idx = d.vocab_size - 1
        while idx > 0 and d.probs[idx] == 0.0:
            idx -= 1
    return idx


def sample(d: Distribution, rng: RandomStream) -> int:
    """Draw one token, consuming exactly one uniform variate."""
    return inverse_cdf(d, rng.uniform())


def sample_many(d: Distribution, rng: RandomStream, n: int) -> np.ndarray:
    """Draw ``n`` tokens, consuming exactly ``n`` variates."""
    u = rng.uniform_block(n)
    idx = np.searchsorted(d.cdf, u, side="right")
    np.minimum(idx, d.vocab_size - 1, out=idx)
    # Same float-edge guard as inverse_cdf: a variate above cdf[-1] must
    # not land on a zero-probability token.
    bad = d.probs[idx] == 0.0
    if bad.any():
        idx[bad] = [inverse_cdf(d, float(v)) for v in u[bad]]
    return idx


def residual(p: Distribution, q: Distribution, lenience: float = 1.0) -> Distribution:
    """Correction distribution after a rejected draft: norm(max(0, p - l*q)).

    Raises ``AllZeroError`` when p <= l*q everywhere, which means rejection
    had probability zero and no correction is ever needed.
    """
    if not (0.0 < lenience <= 1.0):
        raise ValueError("lenience must lie in (0, 1]")
    if p.vocab_size != q.vocab_size:
        raise VocabMismatchError("residual requires equal vocab sizes")
    raw = p.probs - lenience * q.probs
    np.maximum(raw, 0.0, out=raw)
    total = float(raw.sum())
    if total <= 0.0:
        raise AllZeroError("residual has no mass: p <= lenience*q everywhere")
    return Distribution(raw / total)


def dlk(p: Distribution, q: Distribution) -> float:
    """Min-overlap divergence: 1 - sum(min(p, q)).

    Symmetric, in [0, 1]; zero iff p == q, one iff supports are disjoint.
    One minus this value is the per-position acceptance probability of
    speculative sampling.
    """
    if p.vocab_size != q.vocab_size:
        raise VocabMismatchError("dlk requires equal vocab sizes")
    return 1.0 - float(np.minimum(p.probs, q.probs).sum())
