"""Episode orchestration: the round loop of expansion, evaluation, candidate
update, fusion, memory and query maintenance, and selection.

Round structure (one iteration):
  1. expand the selected leaf into children (anchor frames + exact coverage)
  2. evaluate the children with the reward model (history passed along)
  3. replace the selected node by its children in the candidate set S
  4. compute query scores, fuse over all of S
  5. append this round's reward records to the history
  6. update the memory buffer with this round's frames
  7. update queries and refresh anchors from the new observations
  8. ask the policy to answer or pick the next segment

Query scores are recomputed for every candidate whenever the anchor set
changed in the previous round; otherwise only new children need scoring
(the result is identical, recomputation is skipped as a pure optimization).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .anchors import (AnchorSet, QuerySet, build_anchor_set,
                      discover_initial_queries, retrieve_clips,
                      refresh_anchor_set, update_queries)
from .backends.base import (BackendSuite, CandidateView, PolicyRequest,
                            RewardRequest, RewardResponse, SegmentScore,
                            option_labels)
from .backends.parsing import find_last_option_mention, parse_policy_text
from .core import (MemoryBuffer, MemoryEntry, RewardHistory, RewardRecord,
                   SegmentInterval, SegmentNode, VideoMeta, update_memory)
from .errors import BackendError, RejectedInput, UnexpandableSegment
from .expansion import ExpansionBudget, expand
from .scoring import fuse, normalize_intrinsic, query_score
from .trace import SCHEMA_VERSION, EpisodeTrace, round9

TERMINATION_POLICY = "policy_answered"
TERMINATION_ROUNDS = "forced_by_round_limit"
TERMINATION_FRAMES = "forced_by_frame_budget"


@dataclass(frozen=True)
class EpisodeConfig:
    budget: ExpansionBudget = ExpansionBudget(total_frames=6, anchor_frames=3)
    tau_c: float = 0.1
    memory_capacity: int = 16
    retrieval_top_k: int = 10
    max_rounds: int = 12
    max_total_frames: int = 80
    seed: int = 0
    use_reward_fusion: bool = True          # off: h = r (intrinsic-only arm)
    update_queries_each_round: bool = True  # off: queries/anchors frozen after init

    def __post_init__(self):
        if self.tau_c <= 0:
            raise RejectedInput("tau_c must be positive")
        for name in ("memory_capacity", "retrieval_top_k", "max_rounds", "max_total_frames"):
            if getattr(self, name) < 1:
                raise RejectedInput(f"{name} must be a positive integer")

    def as_dict(self) -> dict:
        return {
            "budget_total_frames": self.budget.total_frames,
            "budget_anchor_frames": self.budget.anchor_frames,
            "tau_c": self.tau_c,
            "memory_capacity": self.memory_capacity,
            "retrieval_top_k": self.retrieval_top_k,
            "max_rounds": self.max_rounds,
            "max_total_frames": self.max_total_frames,
            "seed": self.seed,
            "use_reward_fusion": self.use_reward_fusion,
            "update_queries_each_round": self.update_queries_each_round,
        }


@dataclass
class EpisodeResult:
    answer: str
    termination: str
    rounds_used: int
    frames_observed: int
    trace: EpisodeTrace
    memory: MemoryBuffer
    warnings: list[str] = field(default_factory=list)


class EpisodeError(RuntimeError):
    """Unrecoverable backend failure; carries the partial trace for flushing."""

    def __init__(self, message: str, trace: EpisodeTrace):
        super().__init__(message)
        self.trace = trace


def evaluate_children(suite: BackendSuite, request: RewardRequest) -> tuple[RewardResponse, int, list[str]]:
    """Evaluate with engine-level retries for missing segment labels.

    Returns (merged response, retries used, warnings).  Labels still missing
    after the retry budget default to score 0 with a warning.
    """
    expected = list(range(len(request.segments)))
    merged: dict[int, object] = {}
    warnings: list[str] = []
    attempts = suite.retry_budget + 1
    used = 0
    for attempt in range(attempts):
        response = suite.reward.evaluate(request)
        used = attempt
        for score in response.scores:
            if score.label in set(expected) and score.label not in merged:
                merged[score.label] = score
        if all(label in merged for label in expected):
            break
    missing = [label for label in expected if label not in merged]
    for label in missing:
        merged[label] = SegmentScore(label=label, explanation="no evaluation returned", score=0)
        warnings.append(f"segment {label} missing from reward response; defaulted to 0")
    ordered = RewardResponse(scores=[merged[label] for label in expected], retries=used)
    return ordered, used, warnings


class _Episode:
    """Mutable state for one run; single logical thread of control."""

    def __init__(self, video: VideoMeta, question: str, options: Sequence[str],
                 suite: BackendSuite, config: EpisodeConfig):
        if not question:
            raise RejectedInput("question text is required")
        self.video = video
        self.question = question
        self.options = tuple(options)
        self.letters = option_labels(self.options)
        self.suite = suite
        self.config = config
        self.now: Callable[[], float] = (lambda: 0.0) if suite.deterministic else time.monotonic
        self.nodes: dict[int, SegmentNode] = {}
        self.candidates: list[int] = []
        self.memory = MemoryBuffer(capacity=config.memory_capacity)
        self.history = RewardHistory()
        self.observed: set[float] = set()
        self.model_texts: list[str] = []    # chronological, for forced fallback
        self.warnings: list[str] = []
        self.queries = QuerySet([])
        self.anchor_set = AnchorSet()
        self.anchors_dirty = True           # force u computation on first fuse
        self.prev_labels: dict[int, int] = {}
        self.prev_count: Optional[int] = None
        self.trace = EpisodeTrace(header={
            "type": "header",
            "schema": SCHEMA_VERSION,
            "video_id": video.video_id,
            "duration": video.duration,
            "question": question,
            "options": list(self.options),
            "seed": config.seed,
            "config": config.as_dict(),
        })

    # -------------------- initialization --------------------

    def initialize(self):
        init_warnings = []
        try:
            self.queries = discover_initial_queries(self.question, self.options,
                                                    self.suite.extractor)
        except BackendError as exc:
            raise EpisodeError(f"query discovery failed after {exc.retries} retries: {exc}",
                               self.trace)
        if not self.queries:
            init_warnings.append("no usable queries discovered; running anchor-free")
        try:
            clips = retrieve_clips(self.queries, self.suite.retriever,
                                   self.config.retrieval_top_k)
        except BackendError as exc:
            raise EpisodeError(f"initial retrieval failed after {exc.retries} retries: {exc}",
                               self.trace)
        self.anchor_set = build_anchor_set(clips)
        root = SegmentNode(node_id=0,
                           interval=SegmentInterval(0.0, self.video.duration),
                           parent_id=None, round_created=0)
        self.nodes[0] = root
        self.candidates = [0]
        self.warnings.extend(init_warnings)
        self.trace.init = {
            "type": "init",
            "queries": self.queries.texts(),
            "anchors": [a.frame_time for a in self.anchor_set],
            "clip_pool": len(self.anchor_set.clips),
            "warnings": init_warnings,
        }

    # -------------------- helpers --------------------

    def presentation(self) -> list[int]:
        return sorted(self.candidates, key=lambda nid: self.nodes[nid].interval.start)

    def candidate_views(self, order: Sequence[int]) -> tuple[CandidateView, ...]:
        views = []
        for label, nid in enumerate(order):
            node = self.nodes[nid]
            views.append(CandidateView(label=label, interval=node.interval,
                                       fused_score=node.fused_score,
                                       explanation=node.trace))
        return tuple(views)

    def fallback_explore(self) -> int:
        return min(self.candidates,
                   key=lambda nid: (-self.nodes[nid].fused_score,
                                    self.nodes[nid].interval.start, nid))

    def policy_request(self, order: Sequence[int], force: bool) -> PolicyRequest:
        return PolicyRequest(question=self.question, options=self.options,
                             video_duration=self.video.duration,
                             memory_times=tuple(e.frame_time for e in self.memory),
                             candidates=self.candidate_views(order),
                             force_answer=force)

    def decide(self, request: PolicyRequest) -> str:
        try:
            text = self.suite.policy.decide(request)
        except BackendError as exc:
            raise EpisodeError(f"policy call failed after {exc.retries} retries: {exc}",
                               self.trace)
        self.model_texts.append(text)
        return text

    # -------------------- round pieces --------------------

    def expand_selected(self, selected: int, round_warnings: list[str]):
        """Expand `selected`, walking to fallback leaves when a segment turns
        out to be atomic.  Returns (node_id, ExpansionResult) or None when no
        expandable leaf remains."""
        while True:
            node = self.nodes[selected]
            try:
                result = expand(node.interval, self.anchor_set, self.config.budget,
                                self.video.frame_grid)
                return selected, result
            except UnexpandableSegment:
                node.unexpandable = True
                self.candidates.remove(selected)
                round_warnings.append(
                    f"node {selected} has no interior grid point; removed from candidates")
                if not self.candidates:
                    return None
                selected = self.fallback_explore()

    def run_round(self, round_index: int, selected: int) -> dict:
        """Execute one full round; returns the round trace record."""
        t_start = self.now()
        round_warnings: list[str] = []
        cfg = self.config

        expanded = self.expand_selected(selected, round_warnings)
        if expanded is None:
            return {"exhausted": True, "warnings": round_warnings}
        selected, result = expanded
        parent = self.nodes[selected]

        # children nodes
        child_ids = []
        next_id = max(self.nodes) + 1
        for interval in result.children:
            node = SegmentNode(node_id=next_id, interval=interval,
                               parent_id=selected, round_created=round_index)
            self.nodes[next_id] = node
            child_ids.append(next_id)
            next_id += 1
        parent.children_ids = list(child_ids)

        # evaluation (history carries previous rounds only)
        request = RewardRequest(
            round_kind="first" if round_index == 1 else "following",
            round_index=round_index,
            video_duration=self.video.duration,
            question=self.question,
            options=self.options,
            segments=tuple(result.children),
            frames=tuple(result.frames),
            history=tuple(self.history) if round_index > 1 else (),
            parent_label=self.prev_labels.get(selected) if round_index > 1 else None,
            candidate_count=self.prev_count if round_index > 1 else None,
        )
        try:
            response, reward_retries, eval_warnings = evaluate_children(self.suite, request)
        except BackendError as exc:
            raise EpisodeError(f"reward call failed after {exc.retries} retries: {exc}",
                               self.trace)
        round_warnings.extend(eval_warnings)

        children_records = []
        for node_id, score in zip(child_ids, response.scores):
            node = self.nodes[node_id]
            r, clamp_warning = normalize_intrinsic(float(score.score))
            if clamp_warning:
                round_warnings.append(f"node {node_id}: {clamp_warning}")
            node.intrinsic_reward = r
            node.trace = score.explanation
            self.model_texts.append(score.explanation)
            children_records.append({
                "node": node_id,
                "interval": [node.interval.start, node.interval.end],
                "raw_score": int(min(max(score.score, 0), 100)),
                "explanation": score.explanation,
            })

        # candidate update: children replace the selected node
        self.candidates.remove(selected)
        self.candidates.extend(child_ids)
        order = self.presentation()

        # query scores + fusion over all of S
        video_end = self.video.duration
        for nid in order:
            node = self.nodes[nid]
            if self.anchors_dirty or nid in child_ids:
                node.query_score = query_score(node.interval, self.anchor_set,
                                               cfg.tau_c, video_end=video_end)
        self.anchors_dirty = False
        triples = [(nid, self.nodes[nid].intrinsic_reward, self.nodes[nid].query_score)
                   for nid in order]
        bundles, ctx = fuse(triples, cfg.tau_c)
        for bundle in bundles:
            node = self.nodes[bundle.node_id]
            node.fused_score = bundle.fused if cfg.use_reward_fusion else node.intrinsic_reward

        # history append for this round's children
        for node_id, score in zip(child_ids, response.scores):
            node = self.nodes[node_id]
            self.history.append(RewardRecord(
                round_index=round_index, node_id=node_id, interval=node.interval,
                score=int(min(max(score.score, 0), 100)), explanation=score.explanation))

        # memory: each cut frame carries the max reward of the two children it bounds
        submitted = []
        for i, frame_t in enumerate(result.frames):
            left = self.nodes[child_ids[i]].intrinsic_reward
            right = self.nodes[child_ids[i + 1]].intrinsic_reward
            submitted.append(MemoryEntry(frame_time=frame_t,
                                         associated_reward=max(left, right),
                                         round_observed=round_index))
        old_entries = {e.frame_time: e for e in self.memory}
        self.memory = update_memory(self.memory, submitted)
        new_times = {e.frame_time for e in self.memory}
        evicted = [e for t, e in sorted(old_entries.items()) if t not in new_times]
        self.observed.update(result.frames)

        # query/anchor maintenance from this round's observations
        queries_added: list[str] = []
        anchors_before = [a.frame_time for a in self.anchor_set]
        if cfg.update_queries_each_round:
            delta, update_warnings = update_queries(
                self.question, self.options, list(result.frames),
                self.queries.texts(), self.queries, self.suite.extractor, round_index)
            round_warnings.extend(update_warnings)
            if delta:
                self.queries = self.queries.merged_with(delta)
                refreshed, refresh_warnings = refresh_anchor_set(
                    self.anchor_set, delta, self.suite.retriever, cfg.retrieval_top_k)
                round_warnings.extend(refresh_warnings)
                if refreshed is not self.anchor_set:
                    self.anchor_set = refreshed
                    self.anchors_dirty = True
                queries_added = delta.texts()
        anchors_after = [a.frame_time for a in self.anchor_set]
        anchors_added = sorted(set(anchors_after) - set(anchors_before))
        anchors_removed = sorted(set(anchors_before) - set(anchors_after))

        # selection
        request = self.policy_request(order, force=False)
        policy_retries = 0
        action: dict
        text = self.decide(request)
        kind, payload = parse_policy_text(text, range(len(order)), self.letters)
        if kind == "explore" and not (0 <= int(payload) < len(order)):
            round_warnings.append(f"policy chose absent segment {payload}; re-prompting")
            policy_retries += 1
            text = self.decide(request)
            kind, payload = parse_policy_text(text, range(len(order)), self.letters)
        elif kind == "none":
            policy_retries += 1
            text = self.decide(request)
            kind, payload = parse_policy_text(text, range(len(order)), self.letters)

        if kind == "answer":
            action = {"kind": "answer", "label": payload}
        elif kind == "explore" and 0 <= int(payload) < len(order):
            chosen = order[int(payload)]
            action = {"kind": "explore", "node": chosen, "label": int(payload)}
        else:
            fallback = self.fallback_explore()
            round_warnings.append(
                "policy response unusable after retry; exploring highest fused segment")
            action = {"kind": "explore", "node": fallback,
                      "label": order.index(fallback), "fallback": True}

        # bookkeeping for the next round's prompts
        self.prev_labels = {nid: i for i, nid in enumerate(order)}
        self.prev_count = len(order)

        record = {
            "type": "round",
            "round": round_index,
            "selected": {"node": selected,
                         "interval": [parent.interval.start, parent.interval.end]},
            "frames": [{"t": t, "source": "anchor" if t in result.anchor_frames else "coverage"}
                       for t in result.frames],
            "achieved_radius": round9(result.achieved_radius),
            "children": children_records,
            "entropy": round9(ctx.entropy),
            "weights": {"intrinsic": round9(ctx.intrinsic_weight),
                        "query": round9(ctx.query_weight)},
            "candidates": [
                {"node": b.node_id,
                 "interval": [self.nodes[b.node_id].interval.start,
                              self.nodes[b.node_id].interval.end],
                 "r": round9(b.intrinsic),
                 "u": round9(b.query),
                 "H": round9(ctx.entropy),
                 "h": round9(self.nodes[b.node_id].fused_score)}
                for b in bundles],
            "memory": {
                "submitted": [{"t": e.frame_time, "reward": round9(e.associated_reward)}
                              for e in submitted],
                "evicted": [{"t": e.frame_time, "reward": round9(e.associated_reward),
                             "round": e.round_observed} for e in evicted],
                "times": [e.frame_time for e in self.memory],
                "size": len(self.memory),
            },
            "queries_added": queries_added,
            "anchors_added": anchors_added,
            "anchors_removed": anchors_removed,
            "anchor_count": len(anchors_after),
            "action": action,
            "retries": {"reward": reward_retries, "policy": policy_retries},
            "warnings": round_warnings,
            "wall_ms": round9((self.now() - t_start) * 1000.0),
        }
        return record

    # -------------------- forced answering --------------------

    def forced_answer(self) -> tuple[str, dict]:
        """Answer-now path once limits are hit (or no leaf is expandable)."""
        detail: dict = {}
        if self.candidates:
            order = self.presentation()
            request = self.policy_request(order, force=True)
            text = self.decide(request)
            kind, payload = parse_policy_text(text, range(len(order)), self.letters)
            if kind == "answer":
                return payload, {"source": "policy"}
            detail["policy_text"] = text
        mention = find_last_option_mention(self.model_texts, self.letters)
        if mention is not None:
            detail["source"] = "last_mentioned_option"
            return mention, detail
        detail["source"] = "first_option"
        return self.letters[0], detail


def run_episode(video: VideoMeta, question: str, options: Sequence[str],
                suite: BackendSuite, config: EpisodeConfig) -> EpisodeResult:
    state = _Episode(video, question, options, suite, config)
    state.initialize()

    answer: Optional[str] = None
    termination = TERMINATION_ROUNDS
    forced_detail: Optional[dict] = None
    rounds_used = 0
    selected = 0

    for round_index in range(1, config.max_rounds + 1):
        if len(state.observed) >= config.max_total_frames:
            termination = TERMINATION_FRAMES
            break
        record = state.run_round(round_index, selected)
        if record.get("exhausted"):
            state.warnings.extend(record.get("warnings", []))
            state.warnings.append("no expandable leaf remains; forcing an answer")
            termination = TERMINATION_ROUNDS
            break
        rounds_used = round_index
        state.trace.rounds.append(record)
        state.warnings.extend(record["warnings"])
        action = record["action"]
        if action["kind"] == "answer":
            answer = action["label"]
            termination = TERMINATION_POLICY
            break
        selected = action["node"]

    if answer is None:
        answer, forced_detail = state.forced_answer()

    final = {
        "type": "final",
        "answer": answer,
        "termination": termination,
        "rounds_used": rounds_used,
        "frames_observed": len(state.observed),
        "memory": [{"t": e.frame_time, "reward": round9(e.associated_reward),
                    "round": e.round_observed} for e in state.memory],
        "warnings": state.warnings,
    }
    if forced_detail is not None:
        final["forced"] = forced_detail
    state.trace.final = final

    return EpisodeResult(answer=answer, termination=termination,
                         rounds_used=rounds_used,
                         frames_observed=len(state.observed),
                         trace=state.trace, memory=state.memory,
                         warnings=list(state.warnings))
