"""Tolerant extraction of structured payloads from model responses.

Models are instructed to reply with bare JSON, but real responses wrap the
payload in prose or markdown fences.  The scanner below finds top-level
balanced JSON candidates and accepts exactly one match; two distinct valid
payloads is ambiguity and gets rejected rather than guessed at.
"""
from __future__ import annotations

import json
import re
from typing import Callable, Optional, Sequence

from ..errors import ContractViolation
from .base import SegmentScore

_SEGMENT_KEY_RE = re.compile(r"^Segment\s*#?\s*(\d+)$")
_SEGMENT_CHOICE_RE = re.compile(r'\{\s*"?Segment"?\s*[:=]\s*"?(-?\d+)"?\s*\}')
_ANSWER_PHRASE_RE = re.compile(r"(?i)\banswer\b(?:\s+is)?\s*[:\-]?\s*\(?([A-H])\)?")
_LABEL_TOKEN_RE = re.compile(r"\b([A-H])\b")


def _scan_balanced(text: str, opener: str, closer: str) -> list[tuple[int, str]]:
    spans = []
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if depth > 0 and in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == opener:
            if depth == 0:
                start = i
            depth += 1
        elif ch == closer and depth > 0:
            depth -= 1
            if depth == 0:
                spans.append((start, text[start:i + 1]))
    return spans


def _scan_candidates(text: str) -> list[str]:
    """Top-level balanced {...} and [...] substrings, left to right.

    Objects and arrays are scanned independently so a stray bracket in
    surrounding prose cannot swallow a well-formed object after it.
    """
    spans = _scan_balanced(text, "{", "}") + _scan_balanced(text, "[", "]")
    spans.sort(key=lambda pair: pair[0])
    return [s for _, s in spans]


def extract_payload(text: str, accept: Callable[[object], bool]) -> object:
    """Outermost well-formed JSON value satisfying ``accept``.

    Raises ContractViolation when nothing parses or when two distinct
    acceptable payloads appear in the same response.
    """
    seen: list[object] = []
    for candidate in _scan_candidates(text):
        try:
            value = json.loads(candidate)
        except ValueError:
            continue
        if not accept(value):
            continue
        if not any(value == prior for prior in seen):
            seen.append(value)
    if not seen:
        raise ContractViolation("no structured payload found in response")
    if len(seen) > 1:
        raise ContractViolation(f"ambiguous response: {len(seen)} structured payloads")
    return seen[0]


def _is_reward_object(value: object) -> bool:
    return (isinstance(value, dict) and len(value) > 0
            and all(isinstance(k, str) for k in value)
            and any(_SEGMENT_KEY_RE.match(k.strip()) for k in value))


def _coerce_score(raw: object) -> Optional[int]:
    if isinstance(raw, bool):
        return None
    if isinstance(raw, int):
        return raw
    if isinstance(raw, float) and raw.is_integer():
        return int(raw)
    if isinstance(raw, str):
        s = raw.strip().rstrip("%")
        if re.fullmatch(r"-?\d+", s):
            return int(s)
    return None


def parse_reward_payload(text: str, expected_labels: Sequence[int]) -> tuple[list[SegmentScore], list[str]]:
    """Parse the mandated {"Segment #": {"explanation", "score"}} object.

    Returns the well-formed per-segment scores plus a list of problems
    (missing labels, unexpected labels, malformed entries).  Nothing is
    silently dropped: every discrepancy lands in the problem list so the
    caller can decide to retry or default.
    """
    obj = extract_payload(text, _is_reward_object)
    expected = set(expected_labels)
    scores: dict[int, SegmentScore] = {}
    problems: list[str] = []
    for key, value in obj.items():
        m = _SEGMENT_KEY_RE.match(key.strip())
        if not m:
            problems.append(f"unrecognized key {key!r}")
            continue
        label = int(m.group(1))
        if label not in expected:
            problems.append(f"unexpected segment label {label}")
            continue
        if label in scores:
            problems.append(f"duplicate segment label {label}")
            continue
        if not isinstance(value, dict):
            problems.append(f"segment {label}: entry is not an object")
            continue
        score = _coerce_score(value.get("score"))
        if score is None:
            problems.append(f"segment {label}: missing or non-integer score")
            continue
        explanation = value.get("explanation", "")
        if not isinstance(explanation, str):
            explanation = str(explanation)
        scores[label] = SegmentScore(label=label, explanation=explanation, score=score)
    for label in sorted(expected):
        if label not in scores:
            problems.append(f"segment {label}: absent from response")
    ordered = [scores[label] for label in sorted(scores)]
    return ordered, problems


def _is_query_payload(value: object) -> bool:
    if isinstance(value, dict):
        return all(isinstance(k, str) and isinstance(v, str) for k, v in value.items())
    if isinstance(value, list):
        return all(isinstance(v, str) for v in value)
    return False


def _query_key_order(key: str) -> tuple[int, str]:
    m = re.fullmatch(r"query\s*(\d+)", key.strip(), re.IGNORECASE)
    if m:
        return (int(m.group(1)), key)
    return (1 << 30, key)


def parse_query_payload(text: str) -> list[str]:
    """Ordered query texts from {"query1": ...} or a bare JSON array.

    The templates mandate the keyed-object form but illustrate an array in
    one place; both are accepted.  An empty object or array means "no new
    queries" and is allowed.
    """
    value = extract_payload(text, _is_query_payload)
    if isinstance(value, list):
        items = [v.strip() for v in value]
    else:
        keys = sorted(value.keys(), key=_query_key_order)
        items = [value[k].strip() for k in keys]
    return [item for item in items if item]


def parse_policy_text(text: str, candidate_labels: Sequence[int],
                      option_letters: Sequence[str]) -> tuple[str, Optional[object]]:
    """Classify a policy response.

    Returns ("explore", label) for a segment-choice record (even an invalid
    label: the caller owns the re-prompt), ("answer", letter) for an option
    choice, or ("none", None).  A well-formed segment record always wins
    over an incidental option letter in the same response.
    """
    m = _SEGMENT_CHOICE_RE.search(text)
    if m:
        return ("explore", int(m.group(1)))
    letters = set(option_letters)
    stripped = text.strip().strip(".").strip()
    if stripped.upper() in letters:
        return ("answer", stripped.upper())
    m = _ANSWER_PHRASE_RE.search(text)
    if m and m.group(1).upper() in letters:
        return ("answer", m.group(1).upper())
    for m in _LABEL_TOKEN_RE.finditer(text):
        if m.group(1) in letters:
            return ("answer", m.group(1))
    return ("none", None)


def find_last_option_mention(texts: Sequence[str], option_letters: Sequence[str]) -> Optional[str]:
    """Most recently named option letter across chronological model texts."""
    letters = set(option_letters)
    found: Optional[str] = None
    for text in texts:
        for m in _LABEL_TOKEN_RE.finditer(text):
            if m.group(1) in letters:
                found = m.group(1)
    return found
