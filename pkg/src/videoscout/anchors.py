"""Dynamic query and anchor management.

Queries come from the instruction at episode start and from observation-driven
updates later.  Each query retrieves a handful of short clips; clips are
deduplicated, clustered by temporal overlap, and each cluster contributes one
anchor: the peak frame of its highest-similarity clip.  Anchors feed both
expansion (frame preselection) and scoring (softmax pooling).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .core import SegmentInterval, Timestamp
from .errors import BackendError, ContractViolation, RejectedInput

MAX_QUERIES_PER_CALL = 5


def normalize_query_text(text: str) -> str:
    """Lowercase and collapse whitespace; the dedup key for queries."""
    return " ".join(text.split()).lower()


# ============================================================
# Queries
# ============================================================

@dataclass(frozen=True)
class SemanticQuery:
    text: str
    normalized_text: str
    round_discovered: int
    origin: str     # "instruction" | "observation"


@dataclass
class QuerySet:
    queries: list[SemanticQuery] = field(default_factory=list)

    def __post_init__(self):
        keys = [q.normalized_text for q in self.queries]
        if len(set(keys)) != len(keys):
            raise RejectedInput("duplicate normalized query text in QuerySet")

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self) -> Iterator[SemanticQuery]:
        return iter(self.queries)

    def __bool__(self) -> bool:
        return bool(self.queries)

    def keys(self) -> set[str]:
        return {q.normalized_text for q in self.queries}

    def texts(self) -> list[str]:
        return [q.text for q in self.queries]

    def merged_with(self, delta: "QuerySet") -> "QuerySet":
        seen = self.keys()
        merged = list(self.queries)
        for q in delta:
            if q.normalized_text not in seen:
                merged.append(q)
                seen.add(q.normalized_text)
        return QuerySet(merged)


def _build_queries(texts: Sequence[str], round_index: int, origin: str,
                   exclude: set[str]) -> QuerySet:
    out: list[SemanticQuery] = []
    seen = set(exclude)
    for text in texts:
        if len(out) >= MAX_QUERIES_PER_CALL:
            break
        key = normalize_query_text(text)
        if not key or key in seen:
            continue
        seen.add(key)
        out.append(SemanticQuery(text=text.strip(), normalized_text=key,
                                 round_discovered=round_index, origin=origin))
    return QuerySet(out)


def discover_initial_queries(question: str, options: Sequence[str], extractor,
                             round_index: int = 0) -> QuerySet:
    """Ask the extractor for retrieval cues grounded in the instruction.

    Extractor transport failures propagate as BackendError.  An empty result
    after dedup is returned as-is; the engine then runs anchor-free.
    """
    texts = extractor.generate_queries(question, options)
    return _build_queries(texts, round_index, origin="instruction", exclude=set())


def update_queries(question: str, options: Sequence[str],
                   observed_frames: Sequence[Timestamp],
                   history_lines: Sequence[str], existing: QuerySet,
                   extractor, round_index: int) -> tuple[QuerySet, list[str]]:
    """Observation-driven refresh: returns (delta queries, warnings).

    Extractor failure degrades to an empty delta plus a warning instead of
    aborting the episode.
    """
    try:
        texts = extractor.update_queries(question, options, observed_frames, history_lines)
    except BackendError as exc:
        return QuerySet([]), [f"query update failed after {exc.retries} retries: {exc}"]
    delta = _build_queries(texts, round_index, origin="observation", exclude=existing.keys())
    return delta, []


# ============================================================
# Clips
# ============================================================

@dataclass(frozen=True)
class ClipHit:
    """Raw retriever output: one clip span plus its peak frame and similarity."""
    peak_time: Timestamp
    start: Timestamp
    end: Timestamp
    similarity: float


@dataclass(frozen=True)
class RetrievedClip:
    span: SegmentInterval
    peak_time: Timestamp
    similarity: float
    source_queries: frozenset[str]      # normalized texts of contributing queries


def retrieve_clips(queries: Iterable[SemanticQuery], retriever, top_k: int) -> list[RetrievedClip]:
    """Run retrieval per query and validate the hits against the contract."""
    if top_k < 1:
        raise RejectedInput(f"top_k must be >= 1, got {top_k}")
    clips: list[RetrievedClip] = []
    for q in queries:
        hits = retriever.retrieve(q.text, top_k)
        if len(hits) > top_k:
            raise ContractViolation(f"retriever returned {len(hits)} hits for top_k={top_k}")
        for hit in hits:
            if not (math.isfinite(hit.similarity) and 0.0 <= hit.similarity <= 1.0):
                raise ContractViolation(f"similarity {hit.similarity} outside [0, 1]")
            if not hit.start <= hit.peak_time <= hit.end:
                raise ContractViolation(
                    f"peak {hit.peak_time} outside clip span [{hit.start}, {hit.end}]")
            clips.append(RetrievedClip(
                span=SegmentInterval(hit.start, hit.end),
                peak_time=hit.peak_time,
                similarity=hit.similarity,
                source_queries=frozenset([q.normalized_text]),
            ))
    return clips


def dedup_clips(clips: Sequence[RetrievedClip]) -> list[RetrievedClip]:
    """Collapse clips with identical spans.

    The survivor keeps the maximum similarity (ties: earliest peak time) and
    the union of source queries.  Output is sorted by span.
    """
    groups: dict[tuple[float, float], list[RetrievedClip]] = {}
    for clip in clips:
        groups.setdefault((clip.span.start, clip.span.end), []).append(clip)
    out = []
    for key in sorted(groups):
        group = groups[key]
        best = min(group, key=lambda c: (-c.similarity, c.peak_time))
        sources = frozenset().union(*(c.source_queries for c in group))
        out.append(RetrievedClip(span=best.span, peak_time=best.peak_time,
                                 similarity=best.similarity, source_queries=sources))
    return out


def cluster_clips(clips: Sequence[RetrievedClip]) -> list[list[RetrievedClip]]:
    """Partition clips into connected components under closed-span overlap.

    Spans touching at a single point count as overlapping.  Single sweep over
    the clips sorted by span; components come out in timeline order.
    """
    ordered = sorted(clips, key=lambda c: (c.span.start, c.span.end))
    clusters: list[list[RetrievedClip]] = []
    reach = -math.inf
    for clip in ordered:
        if clusters and clip.span.start <= reach:
            clusters[-1].append(clip)
            reach = max(reach, clip.span.end)
        else:
            clusters.append([clip])
            reach = clip.span.end
    return clusters


# ============================================================
# Anchors
# ============================================================

@dataclass(frozen=True)
class Anchor:
    frame_time: Timestamp
    similarity: float
    cluster_id: int
    source_queries: frozenset[str]


@dataclass(frozen=True)
class AnchorSet:
    anchors: tuple[Anchor, ...] = ()
    clips: tuple[RetrievedClip, ...] = ()   # the deduplicated retrieval pool

    def __post_init__(self):
        times = [a.frame_time for a in self.anchors]
        if times != sorted(times) or len(set(times)) != len(times):
            raise RejectedInput("anchors must be strictly ordered by frame_time")

    def __len__(self) -> int:
        return len(self.anchors)

    def __iter__(self) -> Iterator[Anchor]:
        return iter(self.anchors)


def select_cluster_anchors(clusters: Sequence[Sequence[RetrievedClip]],
                           pool: Sequence[RetrievedClip]) -> AnchorSet:
    """One anchor per cluster: the peak of the maximum-similarity clip
    (ties: earliest peak time).  Anchor sources are the cluster union."""
    raw = []
    for cluster in clusters:
        best = min(cluster, key=lambda c: (-c.similarity, c.peak_time))
        sources = frozenset().union(*(c.source_queries for c in cluster))
        raw.append((best.peak_time, best.similarity, sources))
    raw.sort(key=lambda t: t[0])
    anchors = tuple(Anchor(frame_time=t, similarity=sim, cluster_id=i, source_queries=src)
                    for i, (t, sim, src) in enumerate(raw))
    return AnchorSet(anchors=anchors, clips=tuple(sorted(
        pool, key=lambda c: (c.span.start, c.span.end))))


def build_anchor_set(clips: Sequence[RetrievedClip]) -> AnchorSet:
    """Dedup, cluster, then pick per-cluster anchors."""
    pool = dedup_clips(clips)
    if not pool:
        return AnchorSet()
    return select_cluster_anchors(cluster_clips(pool), pool)


def refresh_anchor_set(current: AnchorSet, delta_queries: QuerySet, retriever,
                       top_k: int) -> tuple[AnchorSet, list[str]]:
    """Retrieve for new queries only, merge into the pool, recluster.

    Retriever failure degrades to the unchanged anchor set plus a warning.
    """
    if not delta_queries:
        return current, []
    try:
        new_clips = retrieve_clips(delta_queries, retriever, top_k)
    except BackendError as exc:
        return current, [f"anchor refresh failed after {exc.retries} retries: {exc}"]
    return build_anchor_set(list(current.clips) + new_clips), []


def anchors_in(interval: SegmentInterval, anchor_set: AnchorSet,
               video_end: Optional[float] = None) -> list[Anchor]:
    """Anchors inside the interval under half-open membership; a frame equal
    to the video end belongs to the last segment."""
    return [a for a in anchor_set if interval.contains(a.frame_time, video_end)]
