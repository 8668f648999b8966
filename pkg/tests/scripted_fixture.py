"""Scripted backends for engine tests: every model reply is a literal from a
queue, so episode behavior is exactly derivable by hand.

`build_golden_setup` wires the two-round reference episode whose trace is
committed at tests/golden/two_round_trace.jsonl.
"""
from __future__ import annotations

from pathlib import Path

from videoscout.anchors import ClipHit
from videoscout.backends.base import BackendSuite, RewardResponse, SegmentScore
from videoscout.core import VideoMeta
from videoscout.engine import EpisodeConfig
from videoscout.expansion import ExpansionBudget

GOLDEN_TRACE = Path(__file__).parent / "golden" / "two_round_trace.jsonl"

QUESTION = "Which tool does the presenter hold up at the end?"
OPTIONS = ("a hammer", "a wrench", "a ruler")


class ScriptedExtractor:
    def __init__(self, initial, updates=()):
        self.initial = list(initial)
        self.updates = list(updates)     # one list of texts per update call
        self.update_calls = []

    def generate_queries(self, question, options):
        return list(self.initial)

    def update_queries(self, question, options, observed_frames, history_lines):
        self.update_calls.append((tuple(observed_frames), tuple(history_lines)))
        if self.updates:
            return self.updates.pop(0)
        return []


class ScriptedRetriever:
    def __init__(self, hits_by_query=None):
        self.hits_by_query = dict(hits_by_query or {})

    def retrieve(self, query_text, top_k):
        return list(self.hits_by_query.get(query_text, ()))[:top_k]


class ScriptedReward:
    """Replays queued responses; each item is a list of (label, score, text)."""

    def __init__(self, responses):
        self.responses = [list(r) for r in responses]
        self.requests = []

    def evaluate(self, request):
        self.requests.append(request)
        if not self.responses:
            raise AssertionError("reward model called more times than scripted")
        rows = self.responses.pop(0)
        scores = [SegmentScore(label=lab, explanation=text, score=sc)
                  for lab, sc, text in rows]
        return RewardResponse(scores=scores)


class ScriptedPolicy:
    def __init__(self, texts):
        self.texts = list(texts)
        self.requests = []

    def decide(self, request):
        self.requests.append(request)
        if not self.texts:
            raise AssertionError("policy called more times than scripted")
        return self.texts.pop(0)


def scripted_suite(extractor, retriever, reward, policy):
    return BackendSuite(extractor=extractor, retriever=retriever, reward=reward,
                        policy=policy, deterministic=True, retry_budget=2)


GOLDEN_ROUND1 = [(0, 10, "empty workbench only"),
                 (1, 20, "presenter walks in, hands not visible"),
                 (2, 80, "presenter lifts a tool near the bench")]
GOLDEN_ROUND2 = [(0, 30, "tool partly visible, grip unclear"),
                 (1, 90, "close-up shows the presenter holding a wrench")]


def build_golden_setup(*, policy_texts=("{Segment: 2}", "B"), updates=(),
                       extra_hits=None, **config_overrides):
    """The reference episode: 8 s video, 1 s grid, one anchor at t=6 (0.6)."""
    video = VideoMeta.uniform("golden-demo", 8.0, 1.0)
    extractor = ScriptedExtractor(["presenter holding tool at bench"], updates)
    hits = {"presenter holding tool at bench":
            [ClipHit(peak_time=6.0, start=5.0, end=7.0, similarity=0.6)]}
    hits.update(extra_hits or {})
    retriever = ScriptedRetriever(hits)
    reward = ScriptedReward([GOLDEN_ROUND1, GOLDEN_ROUND2])
    policy = ScriptedPolicy(policy_texts)
    suite = scripted_suite(extractor, retriever, reward, policy)
    defaults = dict(budget=ExpansionBudget(total_frames=2, anchor_frames=1),
                    tau_c=0.1, memory_capacity=2, retrieval_top_k=4,
                    max_rounds=4, max_total_frames=80, seed=0)
    defaults.update(config_overrides)
    config = EpisodeConfig(**defaults)
    return video, QUESTION, OPTIONS, suite, config
