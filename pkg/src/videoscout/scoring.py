"""Candidate scoring: softmax-pooled anchor similarity, normalized entropy of
the intrinsic-reward distribution, and the entropy-weighted fusion of the two.

All functions are pure and operate on plain floats so they can be checked
against high-precision references.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .anchors import AnchorSet, anchors_in
from .core import SegmentInterval
from .errors import RejectedInput


# ============================================================
# Softmax-pooled query score
# ============================================================

def log_mean_exp(values: Sequence[float], tau: float) -> float:
    """tau * log(mean(exp(v / tau))), evaluated stably via max subtraction.

    Sharpness tau must be positive; values must be non-empty.
    """
    if not math.isfinite(tau) or tau <= 0:
        raise RejectedInput(f"pooling temperature must be positive, got {tau}")
    if not values:
        raise RejectedInput("log_mean_exp needs at least one value")
    scaled = [v / tau for v in values]
    m = max(scaled)
    s = sum(math.exp(v - m) for v in scaled)
    return tau * (m + math.log(s) - math.log(len(values)))


def pooled_similarity(similarities: Sequence[float], tau: float) -> float:
    """Softmax pooling of anchor similarities.

    Empty input scores 0.0 (no anchor signal).  The result is clamped into
    [mean, max] of the inputs, the exact mathematical envelope, to absorb
    last-ulp float drift.
    """
    if not math.isfinite(tau) or tau <= 0:
        raise RejectedInput(f"pooling temperature must be positive, got {tau}")
    if not similarities:
        return 0.0
    pooled = log_mean_exp(similarities, tau)
    hi = max(similarities)
    # float summation can push the computed mean an ulp past the max
    lo = min(math.fsum(similarities) / len(similarities), hi)
    return min(max(pooled, lo), hi)


def query_score(segment: SegmentInterval, anchors: AnchorSet, tau: float,
                video_end: Optional[float] = None) -> float:
    """u(s): softmax pooling over the similarities of anchors inside the segment."""
    hits = anchors_in(segment, anchors, video_end)
    return pooled_similarity([a.similarity for a in hits], tau)


# ============================================================
# Normalized entropy
# ============================================================

def softmax(values: Sequence[float]) -> list[float]:
    """Temperature-1 softmax with max subtraction."""
    if not values:
        raise RejectedInput("softmax needs at least one value")
    m = max(values)
    exps = [math.exp(v - m) for v in values]
    z = sum(exps)
    return [e / z for e in exps]


def entropy_of_probs(probs: Sequence[float]) -> float:
    """Shannon entropy over an explicit distribution, normalized by log N."""
    n = len(probs)
    if n <= 1:
        return 0.0
    if min(probs) == max(probs):
        return 1.0     # uniform distribution, exact by definition
    h = -sum(p * math.log(p) for p in probs if p > 0.0)
    return min(max(h / math.log(n), 0.0), 1.0)


def normalized_entropy(rewards: Sequence[float]) -> float:
    """Entropy of softmax(rewards) divided by log(N), clamped into [0, 1].

    A single candidate carries no distributional information: N == 1 maps to 0.
    """
    if not rewards:
        raise RejectedInput("normalized_entropy needs at least one reward")
    return entropy_of_probs(softmax(rewards))


# ============================================================
# Fusion
# ============================================================

@dataclass(frozen=True)
class ScoreBundle:
    node_id: int
    intrinsic: float    # r
    query: float        # u
    fused: float        # h


@dataclass(frozen=True)
class FusionContext:
    tau_c: float                        # pooling temperature in force this round
    candidate_count: int                # N
    entropy: float                      # normalized entropy H of softmax over r
    probabilities: tuple[float, ...]    # softmax over intrinsic rewards

    @property
    def intrinsic_weight(self) -> float:
        return 1.0 - self.entropy

    @property
    def query_weight(self) -> float:
        return self.entropy


def fuse(candidates: Sequence[tuple[int, float, float]],
         tau_c: float) -> tuple[list[ScoreBundle], FusionContext]:
    """Blend intrinsic and query scores for the whole candidate set.

    candidates: (node_id, r, u) triples.  One entropy H is computed over all
    intrinsic rewards, then each candidate gets h = (1 - H) * r + H * u,
    clamped into [min(r, u), max(r, u)].
    """
    if not math.isfinite(tau_c) or tau_c <= 0:
        raise RejectedInput(f"pooling temperature must be positive, got {tau_c}")
    if not candidates:
        raise RejectedInput("fuse needs a non-empty candidate set")
    for node_id, r, u in candidates:
        if not (0.0 <= r <= 1.0 and 0.0 <= u <= 1.0):
            raise RejectedInput(f"scores for node {node_id} outside [0, 1]: r={r}, u={u}")
    probs = softmax([r for _, r, _ in candidates])
    entropy = entropy_of_probs(probs)
    w_r = 1.0 - entropy
    bundles = []
    for node_id, r, u in candidates:
        h = w_r * r + entropy * u
        h = min(max(h, min(r, u)), max(r, u))
        bundles.append(ScoreBundle(node_id=node_id, intrinsic=r, query=u, fused=h))
    ctx = FusionContext(tau_c=tau_c, candidate_count=len(candidates),
                        entropy=entropy, probabilities=tuple(probs))
    return bundles, ctx


def normalize_intrinsic(raw: float) -> tuple[float, Optional[str]]:
    """Map a raw evaluator score on the 0..100 scale to [0, 1].

    Out-of-range input clamps and returns a warning message alongside.
    """
    if not math.isfinite(raw):
        raise RejectedInput(f"evaluator score must be finite, got {raw}")
    if raw < 0 or raw > 100:
        clamped = min(max(raw, 0.0), 100.0)
        return clamped / 100.0, f"evaluator score {raw:g} outside [0, 100]; clamped"
    return raw / 100.0, None
