"""Episode trace format: line-delimited JSON with a schema version header.

Records are serialized with sorted keys and compact separators, and every
float score is rounded to nine decimals before serialization, so that a
repeated run with the same seed produces byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import TraceFormatError

SCHEMA_VERSION = "videoscout.trace.v1"


def round9(value: float) -> float:
    return round(float(value), 9)


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class EpisodeTrace:
    header: dict
    init: Optional[dict] = None
    rounds: list = field(default_factory=list)
    final: Optional[dict] = None

    def records(self) -> list[dict]:
        out = [self.header]
        if self.init is not None:
            out.append(self.init)
        out.extend(self.rounds)
        if self.final is not None:
            out.append(self.final)
        return out

    def to_jsonl(self) -> str:
        return "".join(dumps_record(r) + "\n" for r in self.records())

    @property
    def frames_observed(self) -> int:
        seen = set()
        for rec in self.rounds:
            for frame in rec.get("frames", []):
                seen.add(frame["t"])
        return len(seen)


def parse_trace(text: str) -> tuple[EpisodeTrace, list[str]]:
    """Parse a trace stream; returns (trace, problems).

    A missing or mismatched header raises TraceFormatError.  A truncated or
    corrupt tail is reported as a problem string and the valid prefix is
    returned, so callers can render what exists.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError("empty trace")
    try:
        header = json.loads(lines[0])
    except ValueError:
        raise TraceFormatError("first line is not a structured record")
    if not isinstance(header, dict) or header.get("type") != "header":
        raise TraceFormatError("first record is not a trace header")
    schema = header.get("schema")
    if schema != SCHEMA_VERSION:
        raise TraceFormatError(
            f"schema mismatch: file declares {schema!r}, reader supports {SCHEMA_VERSION!r}")
    trace = EpisodeTrace(header=header)
    problems: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
        except ValueError:
            problems.append(f"line {lineno}: unreadable record; stopping here")
            break
        kind = record.get("type") if isinstance(record, dict) else None
        if kind == "init":
            trace.init = record
        elif kind == "round":
            trace.rounds.append(record)
        elif kind == "final":
            trace.final = record
        else:
            problems.append(f"line {lineno}: unknown record type {kind!r}")
    if trace.final is None:
        problems.append("trace ends without a final record (truncated episode?)")
    return trace, problems


def load_trace(path) -> tuple[EpisodeTrace, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())


# ============================================================
# Human-readable rendering (cmd_show)
# ============================================================

def _fmt_span(interval: Iterable[float]) -> str:
    a, b = interval
    return f"[{a:g}, {b:g}]"


def render_trace(trace: EpisodeTrace) -> str:
    out = []
    h = trace.header
    out.append(f"episode {h.get('video_id', '?')} seed={h.get('seed')} "
               f"duration={h.get('duration')}s")
    out.append(f"question: {h.get('question', '')}")
    if trace.init is not None:
        queries = trace.init.get("queries", [])
        anchors = trace.init.get("anchors", [])
        out.append(f"init: {len(queries)} queries, {len(anchors)} anchors")
        for q in queries:
            out.append(f"  query: {q}")
    for rec in trace.rounds:
        sel = rec.get("selected", {})
        out.append("")
        out.append(f"round {rec.get('round')}: explored node {sel.get('node')} "
                   f"{_fmt_span(sel.get('interval', (0, 0)))}")
        frames = rec.get("frames", [])
        anchor_ts = [f["t"] for f in frames if f.get("source") == "anchor"]
        coverage_ts = [f["t"] for f in frames if f.get("source") == "coverage"]
        out.append(f"  frames: anchors {anchor_ts} coverage {coverage_ts} "
                   f"(radius {rec.get('achieved_radius')})")
        entropy = rec.get("entropy")
        weights = rec.get("weights", {})
        out.append(f"  entropy H={entropy}  weights: intrinsic {weights.get('intrinsic')} "
                   f"query {weights.get('query')}")
        for cand in rec.get("candidates", []):
            out.append(f"    node {cand['node']} {_fmt_span(cand['interval'])} "
                       f"r={cand['r']} u={cand['u']} h={cand['h']}")
        memory = rec.get("memory", {})
        if memory:
            submitted = [e["t"] for e in memory.get("submitted", [])]
            evicted = [e["t"] for e in memory.get("evicted", [])]
            out.append(f"  memory: +{submitted} -{evicted} size={memory.get('size')}")
        if rec.get("queries_added"):
            out.append(f"  new queries: {rec['queries_added']}")
        action = rec.get("action", {})
        if action.get("kind") == "answer":
            out.append(f"  action: answer {action.get('label')}")
        else:
            out.append(f"  action: explore node {action.get('node')}")
        for warning in rec.get("warnings", []):
            out.append(f"  warning: {warning}")
    if trace.final is not None:
        f = trace.final
        out.append("")
        out.append(f"final: answer={f.get('answer')} termination={f.get('termination')} "
                   f"rounds={f.get('rounds_used')} frames={f.get('frames_observed')}")
    return "\n".join(out) + "\n"
