"""Model-facing interfaces shared by the simulated and live backends, plus
request/response shapes the engine exchanges with them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

from ..anchors import ClipHit
from ..core import RewardRecord, SegmentInterval, Timestamp
from ..errors import RejectedInput

OPTION_LABELS = "ABCDEFGH"


def option_labels(options: Sequence[str]) -> list[str]:
    """Positional labels A, B, C, ... for the option texts."""
    if not 1 <= len(options) <= len(OPTION_LABELS):
        raise RejectedInput(f"between 1 and {len(OPTION_LABELS)} options required")
    return [OPTION_LABELS[i] for i in range(len(options))]


@dataclass(frozen=True)
class BackendProfile:
    kind: str = "simulated"             # "simulated" | "http"
    endpoint: Optional[str] = None
    model_name: Optional[str] = None
    request_temperature: float = 0.5
    timeout: float = 30.0               # seconds per request
    retry_budget: int = 2

    def __post_init__(self):
        if self.kind not in ("simulated", "http"):
            raise RejectedInput(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not (self.endpoint and self.model_name):
            raise RejectedInput("http backends require endpoint and model_name")
        if self.retry_budget < 0:
            raise RejectedInput("retry_budget must be >= 0")


# ============================================================
# Requests and responses
# ============================================================

@dataclass(frozen=True)
class RewardRequest:
    round_kind: str                     # "first" | "following"
    round_index: int
    video_duration: float
    question: str
    options: tuple[str, ...]
    segments: tuple[SegmentInterval, ...]
    frames: tuple[Timestamp, ...]
    history: tuple[RewardRecord, ...] = ()
    parent_label: Optional[int] = None
    candidate_count: Optional[int] = None

    def __post_init__(self):
        if self.round_kind not in ("first", "following"):
            raise RejectedInput(f"unknown round kind {self.round_kind!r}")
        if self.round_kind == "first" and self.history:
            raise RejectedInput("first-round evaluation cannot carry history")
        if self.round_kind == "following" and (
                self.parent_label is None or self.candidate_count is None):
            raise RejectedInput("following-round evaluation needs parent_label and candidate_count")


@dataclass(frozen=True)
class SegmentScore:
    label: int
    explanation: str
    score: int      # raw 0..100 as returned by the evaluator


@dataclass
class RewardResponse:
    scores: list[SegmentScore]
    retries: int = 0

    def by_label(self) -> dict[int, SegmentScore]:
        return {s.label: s for s in self.scores}


@dataclass(frozen=True)
class CandidateView:
    label: int                  # presentation index this round
    interval: SegmentInterval
    fused_score: float
    explanation: str


@dataclass(frozen=True)
class PolicyRequest:
    question: str
    options: tuple[str, ...]
    video_duration: float
    memory_times: tuple[Timestamp, ...]
    candidates: tuple[CandidateView, ...]
    force_answer: bool = False


# ============================================================
# Interfaces
# ============================================================

@runtime_checkable
class QueryExtractor(Protocol):
    def generate_queries(self, question: str, options: Sequence[str]) -> list[str]: ...

    def update_queries(self, question: str, options: Sequence[str],
                       observed_frames: Sequence[Timestamp],
                       history_lines: Sequence[str]) -> list[str]: ...


@runtime_checkable
class ClipRetriever(Protocol):
    def retrieve(self, query_text: str, top_k: int) -> list[ClipHit]: ...


@runtime_checkable
class SegmentRewardModel(Protocol):
    def evaluate(self, request: RewardRequest) -> RewardResponse: ...


@runtime_checkable
class PolicyModel(Protocol):
    def decide(self, request: PolicyRequest) -> str: ...


@dataclass
class BackendSuite:
    """Everything the engine needs to talk to models."""
    extractor: QueryExtractor
    retriever: ClipRetriever
    reward: SegmentRewardModel
    policy: PolicyModel
    deterministic: bool = False     # simulated suites run on a virtual clock
    retry_budget: int = 2


# ============================================================
# Retrieval windowing shared by the adapters
# ============================================================

def hits_from_similarity(grid: Sequence[float], similarities: Sequence[float],
                         top_k: int, window: float, duration: float) -> list[ClipHit]:
    """Turn a per-grid-point similarity profile into top-k clip hits.

    Each hit is a fixed-width window centered on its peak, clamped to the
    video bounds.  Peaks rank by similarity, ties by earlier time.
    """
    order = sorted(range(len(grid)), key=lambda i: (-similarities[i], grid[i]))
    hits = []
    for i in order[:top_k]:
        peak = grid[i]
        start = max(0.0, peak - window / 2.0)
        end = min(duration, peak + window / 2.0)
        sim = min(max(float(similarities[i]), 0.0), 1.0)
        hits.append(ClipHit(peak_time=peak, start=start, end=end, similarity=sim))
    return hits
