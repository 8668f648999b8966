"""Manifest-backed stores for live mode.

The engine never decodes video.  Live runs consume two JSON manifests:
a frame manifest mapping grid timestamps to pre-extracted image files, and
an embedding manifest holding one vector per grid timestamp for the local
retrieval adapter.
"""
from __future__ import annotations

import base64
import bisect
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..core import Timestamp, VideoMeta
from ..errors import RejectedInput

_MIME_BY_SUFFIX = {
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".png": "image/png",
    ".webp": "image/webp",
}


@dataclass(frozen=True)
class FrameStore:
    video_id: str
    duration: float
    times: tuple[Timestamp, ...]        # sorted
    paths: tuple[Path, ...]             # parallel to times

    def resolve(self, t: Timestamp, tolerance: float = 0.5) -> Path:
        i = bisect.bisect_left(self.times, t)
        best: Optional[int] = None
        for j in (i - 1, i):
            if 0 <= j < len(self.times):
                if best is None or abs(self.times[j] - t) < abs(self.times[best] - t):
                    best = j
        if best is None or abs(self.times[best] - t) > tolerance:
            raise RejectedInput(f"no frame within {tolerance}s of t={t} in manifest for {self.video_id}")
        return self.paths[best]

    def image_payload(self, t: Timestamp) -> str:
        """Data URL for the frame nearest t; used as an image part in chat calls."""
        path = self.resolve(t)
        mime = _MIME_BY_SUFFIX.get(path.suffix.lower())
        if mime is None:
            raise RejectedInput(f"unsupported image type: {path.name}")
        data = base64.b64encode(path.read_bytes()).decode("ascii")
        return f"data:{mime};base64,{data}"


def load_frame_manifest(path: str | Path) -> FrameStore:
    path = Path(path)
    if not path.is_file():
        raise RejectedInput(f"frame manifest not found: {path}")
    doc = json.loads(path.read_text())
    try:
        video_id = doc["video_id"]
        duration = float(doc["duration"])
        frames = doc["frames"]
    except (KeyError, TypeError) as exc:
        raise RejectedInput(f"frame manifest {path} is missing required keys: {exc}")
    entries = sorted((float(f["t"]), path.parent / f["path"]) for f in frames)
    if not entries:
        raise RejectedInput(f"frame manifest {path} lists no frames")
    return FrameStore(video_id=video_id, duration=duration,
                      times=tuple(t for t, _ in entries),
                      paths=tuple(p for _, p in entries))


@dataclass(frozen=True)
class EmbeddingIndex:
    video_id: str
    duration: float
    times: tuple[Timestamp, ...]
    matrix: np.ndarray                  # unit-normalized rows, parallel to times

    def video_meta(self) -> VideoMeta:
        return VideoMeta(video_id=self.video_id, duration=self.duration,
                         frame_grid=self.times)


def load_embedding_manifest(path: str | Path) -> EmbeddingIndex:
    path = Path(path)
    if not path.is_file():
        raise RejectedInput(f"embedding manifest not found: {path}")
    doc = json.loads(path.read_text())
    try:
        video_id = doc["video_id"]
        duration = float(doc["duration"])
        entries = doc["entries"]
    except (KeyError, TypeError) as exc:
        raise RejectedInput(f"embedding manifest {path} is missing required keys: {exc}")
    if not entries:
        raise RejectedInput(f"embedding manifest {path} lists no entries")
    entries = sorted(entries, key=lambda e: float(e["t"]))
    times = tuple(float(e["t"]) for e in entries)
    matrix = np.asarray([e["embedding"] for e in entries], dtype=float)
    if matrix.ndim != 2:
        raise RejectedInput("embedding manifest entries must share one vector length")
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise RejectedInput("embedding manifest contains a zero vector")
    return EmbeddingIndex(video_id=video_id, duration=duration, times=times,
                          matrix=matrix / norms)


def unit_normalize(vector: Sequence[float]) -> np.ndarray:
    v = np.asarray(vector, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise RejectedInput("cannot normalize a zero embedding vector")
    return v / norm
