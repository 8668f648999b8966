"""Timeline primitives: video metadata, segment intervals and nodes, the
bounded frame-memory buffer, and reward history records.

Everything here is backend-free; the engine composes these types while the
backends only ever see rendered views of them.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .errors import RejectedInput

# Timestamps are seconds from the start of the video.
Timestamp = float


# ============================================================
# Video metadata
# ============================================================

@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    duration: float                 # seconds, finite and > 0
    frame_grid: tuple[float, ...]   # strictly increasing timestamps in [0, duration]

    def __post_init__(self):
        if not math.isfinite(self.duration) or self.duration <= 0:
            raise RejectedInput(f"duration must be finite and positive, got {self.duration}")
        if not self.frame_grid:
            raise RejectedInput("frame_grid must hold at least one timestamp")
        prev = None
        for t in self.frame_grid:
            if not math.isfinite(t) or t < 0 or t > self.duration:
                raise RejectedInput(f"grid timestamp {t} outside [0, {self.duration}]")
            if prev is not None and t <= prev:
                raise RejectedInput("frame_grid must be strictly increasing")
            prev = t

    @staticmethod
    def uniform(video_id: str, duration: float, step: float = 1.0) -> "VideoMeta":
        """Grid at 0, step, 2*step, ... up to duration."""
        if step <= 0:
            raise RejectedInput(f"grid step must be positive, got {step}")
        n = int(math.floor(duration / step + 1e-9))
        grid = tuple(round(i * step, 9) for i in range(n + 1) if i * step <= duration + 1e-9)
        return VideoMeta(video_id=video_id, duration=float(duration), frame_grid=grid)


def snap_time(t: Timestamp, grid: Sequence[float]) -> Timestamp:
    """Nearest timestamp on a sorted grid; exact midpoints resolve earlier."""
    i = bisect.bisect_left(grid, t)
    if i < len(grid) and grid[i] == t:
        return grid[i]
    if i == 0:
        return grid[0]
    if i == len(grid):
        return grid[-1]
    left, right = grid[i - 1], grid[i]
    # tie goes to the earlier frame
    return left if t - left <= right - t else right


def snap_to_grid(t: Timestamp, video: VideoMeta) -> Timestamp:
    """Nearest grid timestamp of the video; rejects times outside the video."""
    if not math.isfinite(t) or t < 0 or t > video.duration:
        raise RejectedInput(f"timestamp {t} outside [0, {video.duration}]")
    return snap_time(t, video.frame_grid)


# ============================================================
# Segments
# ============================================================

@dataclass(frozen=True)
class SegmentInterval:
    start: Timestamp
    end: Timestamp

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise RejectedInput("interval bounds must be finite")
        if not self.start < self.end:
            raise RejectedInput(f"interval needs start < end, got [{self.start}, {self.end}]")

    @property
    def width(self) -> float:
        return self.end - self.start

    def contains(self, t: Timestamp, video_end: Optional[float] = None) -> bool:
        """Half-open membership: start <= t < end.  A timestamp equal to the
        video end belongs to the last segment, so pass video_end to honor it."""
        if self.start <= t < self.end:
            return True
        return video_end is not None and t == self.end == video_end

    def grid_points(self, grid: Sequence[float]) -> list[float]:
        """Grid timestamps inside the closed interval."""
        lo = bisect.bisect_left(grid, self.start)
        hi = bisect.bisect_right(grid, self.end)
        return list(grid[lo:hi])

    def interior_grid_points(self, grid: Sequence[float]) -> list[float]:
        """Grid timestamps strictly between the endpoints."""
        lo = bisect.bisect_right(grid, self.start)
        hi = bisect.bisect_left(grid, self.end)
        return list(grid[lo:hi])


def split_segment(interval: SegmentInterval, cut_times: Sequence[Timestamp]) -> list[SegmentInterval]:
    """Partition an interval at the given cut timestamps.

    Cuts must be distinct and strictly inside the interval;
    returns len(cuts)+1 contiguous pieces in timeline order.
    """
    cuts = sorted(cut_times)
    for i, c in enumerate(cuts):
        if not interval.start < c < interval.end:
            raise RejectedInput(f"cut {c} outside open interval ({interval.start}, {interval.end})")
        if i > 0 and c == cuts[i - 1]:
            raise RejectedInput(f"duplicate cut {c}")
    bounds = [interval.start, *cuts, interval.end]
    return [SegmentInterval(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


@dataclass
class SegmentNode:
    """A node of the timeline tree.  Leaves of the tree form the candidate set."""

    node_id: int
    interval: SegmentInterval
    parent_id: Optional[int]
    round_created: int
    intrinsic_reward: float = 0.0       # r, normalized to [0, 1]
    query_score: float = 0.0            # u, anchor pooling at creation time
    fused_score: float = 0.0            # h, entropy-weighted blend of r and u
    trace: str = ""                     # evaluator explanation for this segment
    children_ids: list[int] = field(default_factory=list)
    unexpandable: bool = False          # no interior grid point; never selectable


# ============================================================
# Frame memory
# ============================================================

@dataclass(frozen=True)
class MemoryEntry:
    frame_time: Timestamp
    associated_reward: float    # reward credited to the frame when sampled
    round_observed: int


@dataclass(frozen=True)
class MemoryBuffer:
    capacity: int
    entries: tuple[MemoryEntry, ...] = ()

    def __post_init__(self):
        if self.capacity <= 0:
            raise RejectedInput(f"memory capacity must be positive, got {self.capacity}")
        if len(self.entries) > self.capacity:
            raise RejectedInput("memory buffer over capacity")
        times = [e.frame_time for e in self.entries]
        if len(set(times)) != len(times):
            raise RejectedInput("memory frame times must be unique")
        if times != sorted(times):
            raise RejectedInput("memory entries must be sorted by frame_time")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[MemoryEntry]:
        return iter(self.entries)

    def frame_times(self) -> list[Timestamp]:
        return [e.frame_time for e in self.entries]


def update_memory(buffer: MemoryBuffer, new_entries: Iterable[MemoryEntry]) -> MemoryBuffer:
    """Merge new frames into the buffer, then evict down to capacity.

    A new entry replaces an existing one at the same frame_time only when its
    reward is strictly higher.  Eviction removes the lowest associated_reward;
    ties evict the oldest round_observed, then the earliest frame_time.
    """
    by_time = {e.frame_time: e for e in buffer.entries}
    for e in new_entries:
        cur = by_time.get(e.frame_time)
        if cur is None or e.associated_reward > cur.associated_reward:
            by_time[e.frame_time] = e
    kept = list(by_time.values())
    while len(kept) > buffer.capacity:
        victim = min(kept, key=lambda e: (e.associated_reward, e.round_observed, e.frame_time))
        kept.remove(victim)
    kept.sort(key=lambda e: e.frame_time)
    return MemoryBuffer(capacity=buffer.capacity, entries=tuple(kept))


# ============================================================
# Reward history
# ============================================================

@dataclass(frozen=True)
class RewardRecord:
    round_index: int
    node_id: int
    interval: SegmentInterval
    score: int          # raw evaluator score on the 0..100 scale
    explanation: str


@dataclass
class RewardHistory:
    """Append-only log of per-segment evaluations across rounds."""

    records: list[RewardRecord] = field(default_factory=list)

    def append(self, record: RewardRecord) -> None:
        self.records.append(record)

    def extend(self, records: Iterable[RewardRecord]) -> None:
        self.records.extend(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[RewardRecord]:
        return iter(self.records)
