"""Deterministic simulated backends.

Every simulator is a pure function of (call inputs, seed): per-call
randomness is derived by hashing the seed together with a call identity,
so repeated calls agree and concurrent episodes never share mutable state.
The ground truth lives in a world object (see simenv.SyntheticEpisode);
this module only defines the behavior layered on top of it.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..anchors import ClipHit, normalize_query_text
from ..core import Timestamp, VideoMeta
from ..errors import RejectedInput
from .base import (PolicyRequest, RewardRequest, RewardResponse, SegmentScore,
                   hits_from_similarity)


@dataclass(frozen=True)
class SimProfile:
    seed: int
    reward_noise_sigma: float = 0.15
    similarity_noise_sigma: float = 0.1

    def __post_init__(self):
        for name in ("reward_noise_sigma", "similarity_noise_sigma"):
            value = getattr(self, name)
            if not 0.0 <= value < 0.5:
                raise RejectedInput(f"{name} must lie in [0, 0.5), got {value}")


@dataclass(frozen=True)
class LateQuery:
    """A staged query emission: revealed once a frame lands near the trigger
    evidence, steering retrieval toward the target evidence."""
    text: str
    target_index: int
    trigger_index: int
    trigger_radius: float


@runtime_checkable
class SimWorld(Protocol):
    """Ground truth the simulated backends read.  Implemented by
    simenv.SyntheticEpisode."""
    video: VideoMeta
    question: str
    options: tuple[str, ...]
    correct_label: str
    evidence_times: tuple[Timestamp, ...]
    evidence_tolerance: float
    answer_threshold: int
    initial_queries: tuple[str, ...]
    late_queries: tuple[LateQuery, ...]
    query_targets: dict  # normalized text -> tuple of evidence times
    clip_window: float
    relevance_falloff: float
    baseline_similarity: float
    profile: SimProfile


def call_rng(seed: int, *identity: object) -> np.random.Generator:
    """Generator keyed by (seed, call identity); stable across processes."""
    digest = hashlib.blake2s(repr((seed,) + identity).encode()).digest()[:8]
    return np.random.default_rng(int.from_bytes(digest, "little"))


def relevance_profile(grid: Sequence[float], targets: Sequence[float],
                      peak: float, falloff: float, baseline: float) -> np.ndarray:
    """Triangular relevance kernel around each target, floored at baseline."""
    values = np.full(len(grid), baseline, dtype=float)
    if targets:
        g = np.asarray(grid, dtype=float)
        for target in targets:
            kernel = peak * np.maximum(0.0, 1.0 - np.abs(g - target) / falloff)
            values = np.maximum(values, kernel)
    return values


class SimQueryExtractor:
    def __init__(self, world: SimWorld):
        self._world = world

    def generate_queries(self, question: str, options: Sequence[str]) -> list[str]:
        return list(self._world.initial_queries)

    def update_queries(self, question: str, options: Sequence[str],
                       observed_frames: Sequence[Timestamp],
                       history_lines: Sequence[str]) -> list[str]:
        # Staged reveal: a late query surfaces once any of this round's
        # frames lands within the trigger radius of its trigger evidence.
        # Re-emissions are harmless; the caller deduplicates.
        world = self._world
        out = []
        for lq in world.late_queries:
            trigger_time = world.evidence_times[lq.trigger_index]
            if any(abs(f - trigger_time) <= lq.trigger_radius for f in observed_frames):
                out.append(lq.text)
        return out


class SimClipRetriever:
    RELEVANCE_PEAK = 0.9

    def __init__(self, world: SimWorld):
        self._world = world

    def retrieve(self, query_text: str, top_k: int) -> list[ClipHit]:
        world = self._world
        key = normalize_query_text(query_text)
        targets = world.query_targets.get(key, ())
        grid = world.video.frame_grid
        values = relevance_profile(grid, targets, self.RELEVANCE_PEAK,
                                   world.relevance_falloff, world.baseline_similarity)
        sigma = world.profile.similarity_noise_sigma
        if sigma > 0.0:
            rng = call_rng(world.profile.seed, "retrieve", key)
            values = values + rng.normal(0.0, sigma, len(grid))
        values = np.clip(values, 0.0, 1.0)
        return hits_from_similarity(grid, values.tolist(), top_k,
                                    world.clip_window, world.video.duration)


class SimRewardModel:
    def __init__(self, world: SimWorld):
        self._world = world

    def evaluate(self, request: RewardRequest) -> RewardResponse:
        world = self._world
        evidence = world.evidence_times
        sigma = world.profile.reward_noise_sigma
        duration = world.video.duration
        scores = []
        for label, segment in enumerate(request.segments):
            contained = [j for j, t in enumerate(evidence)
                         if segment.contains(t, video_end=duration)]
            fraction = len(contained) / len(evidence)
            noise = 0.0
            if sigma > 0.0:
                rng = call_rng(world.profile.seed, "reward", segment.start, segment.end)
                noise = float(rng.normal(0.0, sigma))
            value = min(max(fraction + noise, 0.0), 1.0)
            # half-up rounding keeps the score independent of banker's rounding
            score = int(math.floor(100.0 * value + 0.5))
            if contained:
                ids = ", ".join(f"e{j}" for j in contained)
                explanation = f"boundary cues indicate planted evidence {ids} within this span"
            else:
                explanation = "boundary cues show no planted evidence in this span"
            scores.append(SegmentScore(label=label, explanation=explanation, score=score))
        return RewardResponse(scores=scores)


class SimPolicyModel:
    """Answers once the memory buffer holds enough evidence frames,
    otherwise explores the highest-fused candidate as presented."""

    def __init__(self, world: SimWorld):
        self._world = world

    def _evidence_in_memory(self, memory_times: Sequence[Timestamp]) -> int:
        world = self._world
        count = 0
        for e in world.evidence_times:
            if any(abs(f - e) <= world.evidence_tolerance for f in memory_times):
                count += 1
        return count

    def decide(self, request: PolicyRequest) -> str:
        world = self._world
        if self._evidence_in_memory(request.memory_times) >= world.answer_threshold:
            return world.correct_label
        best = max(request.candidates, key=lambda c: c.fused_score)
        return "{Segment: %d}" % best.label
