"""Shared fixtures and small builders for the test suite."""
from __future__ import annotations

from videoscout.anchors import Anchor, AnchorSet, RetrievedClip
from videoscout.core import SegmentInterval


def make_anchor_set(points, clips=()):
    """points: (frame_time, similarity) pairs, any order."""
    ordered = sorted(points)
    anchors = tuple(
        Anchor(frame_time=t, similarity=sim, cluster_id=i, source_queries=frozenset({"q"}))
        for i, (t, sim) in enumerate(ordered)
    )
    return AnchorSet(anchors=anchors, clips=tuple(clips))


def make_clip(start, end, peak, sim, sources=("q",)):
    return RetrievedClip(span=SegmentInterval(start, end), peak_time=peak,
                         similarity=sim, source_queries=frozenset(sources))
