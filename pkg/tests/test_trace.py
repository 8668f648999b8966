"""Trace serialization: stable bytes, schema gating, tolerant parsing of
truncated files, and the human rendering."""
import pytest

from videoscout.trace import (SCHEMA_VERSION, EpisodeTrace, dumps_record,
                              load_trace, parse_trace, render_trace, round9)
from videoscout.errors import TraceFormatError

from scripted_fixture import GOLDEN_TRACE


def header(**extra):
    rec = {"type": "header", "schema": SCHEMA_VERSION, "video_id": "v",
           "duration": 10.0, "question": "q", "options": ["x"], "seed": 0,
           "config": {}}
    rec.update(extra)
    return rec


def test_round9_truncates_to_nine_decimals():
    assert round9(0.123456789123) == 0.123456789
    assert round9(2.0) == 2.0


def test_dumps_record_is_sorted_and_compact():
    assert dumps_record({"b": 1, "a": [1.5, 2]}) == '{"a":[1.5,2],"b":1}'


def test_jsonl_round_trip_preserves_records():
    trace = EpisodeTrace(header=header(), init={"type": "init", "queries": []},
                         rounds=[{"type": "round", "round": 1}],
                         final={"type": "final", "answer": "A"})
    parsed, problems = parse_trace(trace.to_jsonl())
    assert problems == []
    assert parsed.records() == trace.records()


def test_truncated_trace_parses_with_problem():
    trace = EpisodeTrace(header=header(), rounds=[{"type": "round", "round": 1}])
    parsed, problems = parse_trace(trace.to_jsonl())
    assert parsed.rounds == trace.rounds
    assert any("without a final record" in p for p in problems)


def test_corrupt_tail_keeps_valid_prefix():
    good = EpisodeTrace(header=header(), rounds=[{"type": "round", "round": 1}])
    text = good.to_jsonl() + '{"type": "round", "round": 2, CORRUPT\n'
    parsed, problems = parse_trace(text)
    assert len(parsed.rounds) == 1
    assert any("unreadable record" in p for p in problems)


def test_unknown_record_type_is_reported_not_fatal():
    text = dumps_record(header()) + "\n" + dumps_record({"type": "mystery"}) + "\n"
    parsed, problems = parse_trace(text)
    assert any("unknown record type 'mystery'" in p for p in problems)


def test_missing_header_rejected():
    with pytest.raises(TraceFormatError, match="not a trace header"):
        parse_trace('{"type": "round"}\n')


def test_schema_mismatch_names_both_versions():
    bad = dumps_record(header(schema="videoscout.trace.v2"))
    with pytest.raises(TraceFormatError) as excinfo:
        parse_trace(bad + "\n")
    message = str(excinfo.value)
    assert "videoscout.trace.v2" in message and SCHEMA_VERSION in message


def test_empty_input_rejected():
    with pytest.raises(TraceFormatError, match="empty trace"):
        parse_trace("   \n  \n")


def test_frames_observed_dedups_across_rounds():
    trace = EpisodeTrace(header=header(), rounds=[
        {"type": "round", "frames": [{"t": 1.0}, {"t": 2.0}]},
        {"type": "round", "frames": [{"t": 2.0}, {"t": 3.0}]},
    ])
    assert trace.frames_observed == 3


def test_render_of_committed_golden_trace():
    trace, problems = load_trace(GOLDEN_TRACE)
    assert problems == []
    text = render_trace(trace)
    assert "round 1: explored node 0 [0, 8]" in text
    assert "memory: +[1.0, 6.0] -[] size=2" in text
    assert "-[1.0] size=2" in text                 # round 2 eviction
    assert "action: answer B" in text
    assert text.endswith("final: answer=B termination=policy_answered "
                         "rounds=2 frames=3\n")
