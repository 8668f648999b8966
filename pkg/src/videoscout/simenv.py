"""Synthetic long-video worlds for closed-loop evaluation.

An episode plants a chain of evidence moments on the timeline.  Retrieval
relevance peaks around whichever evidence a query targets; the reward model
scores segments by the fraction of evidence they contain; the scripted policy
answers correctly once enough evidence frames sit in memory.  Later links of
the chain only become retrievable after a frame lands near the previous link,
which is what gives observation-driven query updates something to do.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .backends.base import BackendSuite
from .backends.sim import (LateQuery, SimClipRetriever, SimPolicyModel,
                           SimProfile, SimQueryExtractor, SimRewardModel,
                           call_rng)
from .anchors import normalize_query_text
from .core import Timestamp, VideoMeta
from .errors import RejectedInput

_SUBJECTS = ("courier", "lecturer", "chef", "referee", "busker", "mechanic",
             "gardener", "violinist")
_LANDMARKS = ("fountain", "ticket booth", "loading dock", "mural",
              "footbridge", "kiosk", "greenhouse", "bandstand")
_ITEMS = ("a red scarf", "a folding map", "a brass key", "a paper lantern",
          "a blue umbrella", "a wooden crate", "a silver whistle",
          "a canvas bag")


@dataclass(frozen=True)
class EpisodeParams:
    duration: float = 1800.0
    evidence_count: int = 2
    tightness: float = 0.0                      # 0: uniform; 1: one tight cluster
    reward_noise_sigma: float = 0.15
    similarity_noise_sigma: float = 0.1
    answer_threshold: Optional[int] = None      # None: all evidence required
    grid_step: float = 1.0
    clip_window: float = 8.0
    relevance_falloff: float = 8.0
    baseline_similarity: float = 0.05
    evidence_tolerance: float = 2.0
    trigger_radius: float = 4.0

    def __post_init__(self):
        if self.duration < 60.0:
            raise RejectedInput(f"duration must be >= 60 seconds, got {self.duration}")
        if not 1 <= self.evidence_count <= 4:
            raise RejectedInput(f"evidence_count must lie in [1, 4], got {self.evidence_count}")
        if not 0.0 <= self.tightness <= 1.0:
            raise RejectedInput(f"tightness must lie in [0, 1], got {self.tightness}")
        if self.answer_threshold is not None and not (
                1 <= self.answer_threshold <= self.evidence_count):
            raise RejectedInput("answer_threshold must lie in [1, evidence_count]")
        for name in ("grid_step", "clip_window", "relevance_falloff",
                     "evidence_tolerance", "trigger_radius"):
            if getattr(self, name) <= 0:
                raise RejectedInput(f"{name} must be positive")
        if not 0.0 <= self.baseline_similarity < 0.9:
            raise RejectedInput("baseline_similarity must lie in [0, 0.9)")

    @property
    def threshold(self) -> int:
        return self.answer_threshold if self.answer_threshold is not None else self.evidence_count


@dataclass(frozen=True)
class SyntheticEpisode:
    """Concrete SimWorld: the full ground truth of one generated episode."""
    seed: int
    params: EpisodeParams
    video: VideoMeta
    question: str
    options: tuple[str, ...]
    correct_label: str
    evidence_times: tuple[Timestamp, ...]
    evidence_tolerance: float
    answer_threshold: int
    initial_queries: tuple[str, ...]
    late_queries: tuple[LateQuery, ...]
    query_targets: dict
    clip_window: float
    relevance_falloff: float
    baseline_similarity: float
    profile: SimProfile


def _place_evidence(rng: np.random.Generator, interior: np.ndarray,
                    count: int, tightness: float) -> list[float]:
    """Distinct interior grid times.  Tightness 0 draws them uniformly over the
    whole timeline; higher values confine the draw to a window that shrinks to
    a small cluster at 1, placed uniformly at random."""
    pool = interior
    if tightness > 0.0 and count > 1:
        total = float(interior[-1] - interior[0])
        span = max(total * (1.0 - tightness), 4.0 * count * float(interior[1] - interior[0]))
        while True:
            lo = float(interior[0]) + rng.uniform(0.0, max(total - span, 0.0))
            window = interior[(interior >= lo) & (interior <= lo + span)]
            if len(window) >= count:
                pool = window
                break
            span *= 1.5
    picks = np.sort(rng.choice(pool, size=count, replace=False))
    return [float(t) for t in picks]


def generate_episode(seed: int, params: EpisodeParams = EpisodeParams()) -> SyntheticEpisode:
    rng = call_rng(seed, "episode")
    video = VideoMeta.uniform(f"sim-{seed}", params.duration, params.grid_step)
    interior = np.asarray(video.frame_grid[1:-1], dtype=float)
    if len(interior) < params.evidence_count:
        raise RejectedInput("timeline too coarse for the requested evidence count")

    evidence = _place_evidence(rng, interior, params.evidence_count, params.tightness)

    subject = _SUBJECTS[int(rng.integers(len(_SUBJECTS)))]
    landmarks = [str(x) for x in rng.choice(_LANDMARKS, size=params.evidence_count, replace=False)]
    option_items = [str(x) for x in rng.choice(_ITEMS, size=4, replace=False)]
    correct_index = int(rng.integers(4))
    correct_label = "ABCD"[correct_index]
    question = (f"What is the {subject} carrying when leaving the "
                f"{landmarks[-1]}?")

    initial = (f"the {subject} at the {landmarks[0]}",)
    late = tuple(
        LateQuery(text=f"the {subject} heading toward the {landmarks[j]}",
                  target_index=j, trigger_index=j - 1,
                  trigger_radius=params.trigger_radius)
        for j in range(1, params.evidence_count))
    targets = {normalize_query_text(initial[0]): (evidence[0],)}
    for lq in late:
        targets[normalize_query_text(lq.text)] = (evidence[lq.target_index],)

    return SyntheticEpisode(
        seed=seed,
        params=params,
        video=video,
        question=question,
        options=tuple(option_items),
        correct_label=correct_label,
        evidence_times=tuple(evidence),
        evidence_tolerance=params.evidence_tolerance,
        answer_threshold=params.threshold,
        initial_queries=initial,
        late_queries=late,
        query_targets=targets,
        clip_window=params.clip_window,
        relevance_falloff=params.relevance_falloff,
        baseline_similarity=params.baseline_similarity,
        profile=SimProfile(seed=seed,
                           reward_noise_sigma=params.reward_noise_sigma,
                           similarity_noise_sigma=params.similarity_noise_sigma),
    )


def make_suite(episode: SyntheticEpisode, retry_budget: int = 2) -> BackendSuite:
    """Wire the four simulated backends around one episode's ground truth."""
    return BackendSuite(
        extractor=SimQueryExtractor(episode),
        retriever=SimClipRetriever(episode),
        reward=SimRewardModel(episode),
        policy=SimPolicyModel(episode),
        deterministic=True,
        retry_budget=retry_budget,
    )
