"""Frame selection for segment expansion.

A segment is split at `total_frames` interior grid timestamps.  Up to
`anchor_frames` of them are taken from semantic anchors inside the segment;
the rest minimize the worst-case distance from any segment grid point to its
nearest sampled frame (1-D minimax coverage with the anchor frames fixed).

The solver is exact: feasibility for a candidate radius is a left-to-right
greedy sweep, the optimal radius comes from bisecting to adjacent floats
(feasibility only flips at pairwise-distance values, all representable), and
among all optimal frame sets the lexicographically earliest is constructed
element by element.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .anchors import AnchorSet
from .core import SegmentInterval, Timestamp, snap_time, split_segment
from .errors import RejectedInput, UnexpandableSegment


@dataclass(frozen=True)
class ExpansionBudget:
    total_frames: int       # B: frames sampled per expansion
    anchor_frames: int      # B_s: frames reserved for anchors, <= B

    def __post_init__(self):
        if self.total_frames < 1:
            raise RejectedInput(f"total_frames must be >= 1, got {self.total_frames}")
        if not 0 <= self.anchor_frames <= self.total_frames:
            raise RejectedInput(
                f"anchor_frames must lie in [0, {self.total_frames}], got {self.anchor_frames}")


@dataclass(frozen=True)
class ExpansionResult:
    frames: tuple[Timestamp, ...]           # all cut frames, ascending
    anchor_frames: tuple[Timestamp, ...]    # the subset fixed by anchors
    children: tuple[SegmentInterval, ...]
    achieved_radius: float


# ============================================================
# Anchor preselection
# ============================================================

def select_segment_anchors(segment: SegmentInterval, anchor_set: AnchorSet,
                           limit: int) -> list[Timestamp]:
    """Up to `limit` anchor frame times strictly inside the segment, picked by
    similarity (ties: earlier frame), returned in time order.

    Anchors sitting exactly on a segment endpoint cannot act as cuts and are
    skipped.
    """
    if limit <= 0:
        return []
    inside = [a for a in anchor_set if segment.start < a.frame_time < segment.end]
    inside.sort(key=lambda a: (-a.similarity, a.frame_time))
    return sorted(a.frame_time for a in inside[:limit])


# ============================================================
# Exact minimax coverage
# ============================================================

def coverage_radius(points: Sequence[float], frames: Sequence[float]) -> float:
    """max over points of the distance to the nearest frame."""
    if not points:
        return 0.0
    if not frames:
        return math.inf
    ordered = sorted(frames)
    worst = 0.0
    for p in points:
        i = bisect.bisect_left(ordered, p)
        best = math.inf
        if i < len(ordered):
            best = ordered[i] - p
        if i > 0:
            best = min(best, p - ordered[i - 1])
        worst = max(worst, best)
    return worst


def _rightmost_cover(centers: Sequence[float], p: float, rho: float) -> Optional[float]:
    """Largest center within rho of p, or None.  `centers` sorted ascending."""
    j = bisect.bisect_right(centers, p)
    lo, hi = j, len(centers)
    while lo < hi:
        mid = (lo + hi) // 2
        if centers[mid] - p <= rho:
            lo = mid + 1
        else:
            hi = mid
    if lo > j:
        return centers[lo - 1]
    if j > 0 and p - centers[j - 1] <= rho:
        return centers[j - 1]
    return None


def _advance_past(points: Sequence[float], i: int, center: float, rho: float) -> int:
    """First index >= i whose point lies beyond center + rho."""
    lo, hi = i, len(points)
    while lo < hi:
        mid = (lo + hi) // 2
        if points[mid] - center <= rho:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _first_uncovered(points: Sequence[float], start: int,
                     fixed: Sequence[float], rho: float) -> Optional[int]:
    """Index of the first point from `start` on that no fixed center covers."""
    i = start
    while i < len(points):
        c = _rightmost_cover(fixed, points[i], rho)
        if c is None:
            return i
        i = _advance_past(points, i, c, rho)
    return None


def _greedy_complete(points: Sequence[float], start: int, fixed: Sequence[float],
                     positions: Sequence[float], rho: float, budget: int,
                     min_pos: Optional[float]) -> Optional[list[float]]:
    """Greedy completion: cover points[start:] within rho using at most
    `budget` new frames drawn from `positions`, each strictly greater than
    `min_pos` when given, on top of the `fixed` centers.

    Every placement goes as far right as the frontier point allows, which is
    optimal for 1-D coverage.  Returns the placements or None if infeasible.
    """
    placed: list[float] = []
    i = start
    while i < len(points):
        p = points[i]
        c = _rightmost_cover(fixed, p, rho)
        if c is not None:
            i = _advance_past(points, i, c, rho)
            continue
        q = _rightmost_cover(positions, p, rho)
        if q is None or (min_pos is not None and q <= min_pos):
            return None
        placed.append(q)
        if len(placed) > budget:
            return None
        i = _advance_past(points, i, q, rho)
    return placed


def coverage_complete(segment: SegmentInterval, preselected: Sequence[Timestamp],
                      total_b: int, grid: Sequence[float]) -> list[Timestamp]:
    """Choose `total_b` interior grid frames covering the segment's grid points
    with exactly minimal worst-case radius, keeping `preselected` fixed.

    Among all optimal sets, returns the lexicographically earliest (compared
    as the ascending sequence of frame times).  If the segment has at most
    `total_b` interior grid points, returns all of them.
    """
    if total_b < 0:
        raise RejectedInput(f"total_b must be >= 0, got {total_b}")
    positions = segment.interior_grid_points(grid)
    pre = sorted(set(preselected))
    if len(pre) != len(list(preselected)):
        raise RejectedInput("preselected frames must be distinct")
    if len(pre) > total_b:
        raise RejectedInput(f"{len(pre)} preselected frames exceed budget {total_b}")
    pos_set = set(positions)
    for t in pre:
        if t not in pos_set:
            raise RejectedInput(f"preselected frame {t} not an interior grid point")

    if len(positions) <= total_b:
        return list(positions)
    if len(pre) == total_b:
        return pre

    points = segment.grid_points(grid)
    free = total_b - len(pre)

    def feasible(rho: float) -> bool:
        return _greedy_complete(points, 0, pre, positions, rho, free, None) is not None

    if feasible(0.0):
        rho_star = 0.0
    else:
        lo, hi = 0.0, segment.end - segment.start
        while True:
            mid = (lo + hi) / 2.0
            if mid <= lo or mid >= hi:
                break
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        rho_star = hi

    return _lex_earliest(points, positions, pre, total_b, rho_star)


def _lex_earliest(points: Sequence[float], positions: Sequence[float],
                  pre: Sequence[float], total_b: int, rho: float) -> list[float]:
    """Build the lexicographically earliest optimal frame set at radius rho.

    Frames are committed in ascending order.  At each slot the candidate is
    either the next preselected frame or a free frame below it; a candidate is
    valid when the remaining budget can still finish the cover and enough
    unused positions remain above it.  Remaining-cover cost is memoized per
    frontier index; it only depends on the frontier because a candidate never
    reaches past it.
    """
    committed: list[float] = []
    s_rem = list(pre)
    free = total_b - len(pre)

    while free > 0 or s_rem:
        if free == 0:
            committed.extend(s_rem)
            break
        base = sorted(committed + s_rem)
        last = committed[-1] if committed else -math.inf
        cap = s_rem[0] if s_rem else None
        u0 = _first_uncovered(points, 0, base, rho)

        cost_memo: dict[int, Optional[int]] = {}

        def completion_cost(frontier: Optional[int]) -> Optional[int]:
            # placements needed to cover points[frontier:] over the base set
            if frontier is None:
                return 0
            if frontier not in cost_memo:
                placed = _greedy_complete(points, frontier, base, positions,
                                          rho, free, None)
                cost_memo[frontier] = None if placed is None else len(placed)
            return cost_memo[frontier]

        def free_frame_ok(x: float) -> bool:
            if u0 is None:
                return True
            if points[u0] - x > rho:
                frontier: Optional[int] = u0
            else:
                with_x = sorted(base + [x])
                frontier = _first_uncovered(points, u0, with_x, rho)
            cost = completion_cost(frontier)
            return cost is not None and cost <= free - 1

        # candidate free frames live strictly between `last` and `cap`,
        # and cannot overshoot the frontier's reach
        i_lo = bisect.bisect_right(positions, last)
        i_hi = bisect.bisect_left(positions, cap) if cap is not None else len(positions)
        if u0 is not None:
            i_hi = min(i_hi, _advance_past(positions, i_lo, points[u0], rho))

        # feasibility of a free frame is monotone in x: the earliest valid one
        # is found by binary search over the candidate window
        x_free: Optional[float] = None
        lo, hi = i_lo, i_hi
        while lo < hi:
            mid = (lo + hi) // 2
            if free_frame_ok(positions[mid]):
                hi = mid
            else:
                lo = mid + 1
        if lo < i_hi:
            x = positions[lo]
            room = (len(positions) - bisect.bisect_right(positions, x)) - len(s_rem)
            if room >= free - 1:
                x_free = x

        if x_free is not None:
            committed.append(x_free)
            free -= 1
            continue

        if cap is not None:
            placed = _greedy_complete(points, u0 if u0 is not None else len(points),
                                      base, positions, rho, free, cap)
            room = (len(positions) - bisect.bisect_right(positions, cap)) - (len(s_rem) - 1)
            if placed is not None and room >= free:
                committed.append(cap)
                s_rem.pop(0)
                continue

        raise RuntimeError("coverage construction lost feasibility; solver invariant broken")

    return committed


# ============================================================
# Expansion
# ============================================================

def expand(segment: SegmentInterval, anchor_set: AnchorSet, budget: ExpansionBudget,
           grid: Sequence[float]) -> ExpansionResult:
    """Sample cut frames for the segment and split it.

    Anchor frames are fixed first (snapped to the grid, deduplicated, capped
    at the anchor budget), then coverage fills the remaining budget.  Raises
    UnexpandableSegment when no interior grid point exists.
    """
    interior = segment.interior_grid_points(grid)
    if not interior:
        raise UnexpandableSegment(
            f"segment [{segment.start}, {segment.end}] has no interior grid point")

    picked = select_segment_anchors(segment, anchor_set, budget.anchor_frames)
    snapped: list[float] = []
    for t in picked:
        g = snap_time(t, grid)
        if segment.start < g < segment.end and g not in snapped:
            snapped.append(g)
    snapped.sort()

    frames = coverage_complete(segment, snapped, budget.total_frames, grid)
    children = split_segment(segment, frames)
    radius = coverage_radius(segment.grid_points(grid), frames)
    return ExpansionResult(frames=tuple(frames), anchor_frames=tuple(snapped),
                           children=tuple(children), achieved_radius=radius)
