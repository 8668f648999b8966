"""Engine round-loop behavior against fully scripted backends."""
import pytest

from videoscout.backends.base import RewardRequest
from videoscout.core import VideoMeta
from videoscout.engine import (EpisodeConfig, EpisodeError, evaluate_children,
                               run_episode)
from videoscout.errors import BackendError, RejectedInput
from videoscout.expansion import ExpansionBudget

from scripted_fixture import (GOLDEN_ROUND1, GOLDEN_TRACE, OPTIONS, QUESTION,
                              ScriptedExtractor, ScriptedPolicy, ScriptedReward,
                              ScriptedRetriever, build_golden_setup,
                              scripted_suite)


def run_golden(**kwargs):
    video, question, options, suite, config = build_golden_setup(**kwargs)
    return run_episode(video, question, options, suite, config)


# ============================================================
# The committed reference trace
# ============================================================

def test_two_round_trace_matches_golden_bytes():
    result = run_golden()
    assert result.trace.to_jsonl() == GOLDEN_TRACE.read_text()


def test_golden_result_fields():
    result = run_golden()
    assert result.answer == "B"
    assert result.termination == "policy_answered"
    assert result.rounds_used == 2
    assert result.frames_observed == 3
    assert result.warnings == []
    assert [e.frame_time for e in result.memory] == [6.0, 7.0]


def test_repeat_run_is_byte_identical():
    assert run_golden().trace.to_jsonl() == run_golden().trace.to_jsonl()


def test_fusion_disabled_scores_candidates_by_intrinsic_only():
    result = run_golden(use_reward_fusion=False)
    for rec in result.trace.rounds:
        for cand in rec["candidates"]:
            assert cand["h"] == cand["r"]


# ============================================================
# Query updates and anchor refresh
# ============================================================

def test_query_update_adds_anchor_and_rescoring_waits_one_round():
    from videoscout.anchors import ClipHit
    result = run_golden(
        updates=[["wrench close-up"]],
        extra_hits={"wrench close-up":
                    [ClipHit(peak_time=3.0, start=2.0, end=4.0, similarity=0.7)]})
    r1, r2 = result.trace.rounds
    assert r1["queries_added"] == ["wrench close-up"]
    assert r1["anchors_added"] == [3.0]
    assert r1["anchor_count"] == 2
    # scoring happens before the update, so round 1 still sees one anchor
    by_node_r1 = {c["node"]: c for c in r1["candidates"]}
    assert by_node_r1[2]["u"] == 0.0
    # the new anchor set forces a full u recomputation next round
    by_node_r2 = {c["node"]: c for c in r2["candidates"]}
    assert by_node_r2[2]["u"] == 0.7
    assert by_node_r2[4]["u"] == 0.6


def test_update_queries_disabled_keeps_queries_and_anchors_fixed():
    result = run_golden(updates=[["wrench close-up"]],
                        update_queries_each_round=False)
    for rec in result.trace.rounds:
        assert rec["queries_added"] == []
        assert rec["anchors_added"] == []
        assert rec["anchor_count"] == 1


# ============================================================
# Termination and forced answers
# ============================================================

def test_round_limit_forces_answer_through_policy():
    result = run_golden(policy_texts=("{Segment: 2}", "C"), max_rounds=1)
    assert result.termination == "forced_by_round_limit"
    assert result.answer == "C"
    assert result.rounds_used == 1
    assert result.trace.final["forced"] == {"source": "policy"}


def test_frame_budget_checked_at_round_start():
    result = run_golden(policy_texts=("{Segment: 2}", "A"), max_total_frames=2)
    assert result.termination == "forced_by_frame_budget"
    assert result.rounds_used == 1
    assert result.frames_observed == 2


def test_forced_answer_falls_back_to_last_mentioned_option():
    video = VideoMeta.uniform("v", 8.0, 1.0)
    extractor = ScriptedExtractor([])
    reward = ScriptedReward([[(0, 10, "nothing of note"),
                              (1, 20, "the wrench cue points to option B here"),
                              (2, 30, "inconclusive")]])
    policy = ScriptedPolicy(["{Segment: 0}", "still unsure, need more context"])
    suite = scripted_suite(extractor, ScriptedRetriever(), reward, policy)
    config = EpisodeConfig(budget=ExpansionBudget(2, 0), max_rounds=1, seed=0)
    result = run_episode(video, QUESTION, OPTIONS, suite, config)
    assert result.answer == "B"
    assert result.trace.final["forced"]["source"] == "last_mentioned_option"
    assert "policy_text" in result.trace.final["forced"]


def test_forced_answer_defaults_to_first_option():
    video = VideoMeta.uniform("v", 8.0, 1.0)
    extractor = ScriptedExtractor([])
    reward = ScriptedReward([[(0, 10, "quiet"), (1, 20, "quiet"), (2, 30, "quiet")]])
    policy = ScriptedPolicy(["{Segment: 0}", "no idea"])
    suite = scripted_suite(extractor, ScriptedRetriever(), reward, policy)
    config = EpisodeConfig(budget=ExpansionBudget(2, 0), max_rounds=1, seed=0)
    result = run_episode(video, QUESTION, OPTIONS, suite, config)
    assert result.answer == "A"
    assert result.trace.final["forced"]["source"] == "first_option"


def test_unexpandable_root_terminates_with_warning():
    video = VideoMeta(video_id="flat", duration=8.0, frame_grid=(0.0, 8.0))
    extractor = ScriptedExtractor([])
    suite = scripted_suite(extractor, ScriptedRetriever(), ScriptedReward([]),
                           ScriptedPolicy([]))
    result = run_episode(video, QUESTION, OPTIONS, suite, EpisodeConfig(seed=0))
    assert result.termination == "forced_by_round_limit"
    assert result.rounds_used == 0
    assert result.answer == "A"
    assert any("no expandable leaf remains" in w for w in result.warnings)
    assert result.trace.rounds == []


# ============================================================
# Policy response handling
# ============================================================

def test_invalid_segment_label_reprompts_once():
    result = run_golden(policy_texts=("{Segment: 7}", "{Segment: 2}", "B"))
    r1 = result.trace.rounds[0]
    assert r1["retries"]["policy"] == 1
    assert r1["action"] == {"kind": "explore", "node": 3, "label": 2}
    assert any("absent segment 7" in w for w in r1["warnings"])
    assert result.answer == "B"


def test_unusable_policy_response_falls_back_to_highest_fused():
    result = run_golden(policy_texts=("hmm", "let me think more", "B"))
    r1 = result.trace.rounds[0]
    assert r1["retries"]["policy"] == 1
    assert r1["action"]["kind"] == "explore"
    assert r1["action"]["node"] == 3          # fused 0.609 beats 0.009 and 0.005
    assert r1["action"]["fallback"] is True
    assert any("exploring highest fused segment" in w for w in r1["warnings"])


# ============================================================
# Reward evaluation retries
# ============================================================

def segments_for(*bounds):
    from videoscout.core import SegmentInterval
    return tuple(SegmentInterval(a, b) for a, b in bounds)


def test_evaluate_children_merges_first_seen_across_attempts():
    request = RewardRequest(round_kind="first", round_index=1, video_duration=8.0,
                            question=QUESTION, options=OPTIONS,
                            segments=segments_for((0, 1), (1, 6), (6, 8)),
                            frames=(1.0, 6.0))
    reward = ScriptedReward([
        [(0, 10, "first")],
        [(0, 99, "overwritten? no"), (2, 30, "second")],
        [(5, 40, "stray label")],
    ])
    suite = scripted_suite(ScriptedExtractor([]), ScriptedRetriever(), reward,
                           ScriptedPolicy([]))
    response, retries, warnings = evaluate_children(suite, request)
    assert retries == 2
    assert [(s.label, s.score) for s in response.scores] == [(0, 10), (1, 0), (2, 30)]
    assert warnings == ["segment 1 missing from reward response; defaulted to 0"]


def test_evaluate_children_stops_as_soon_as_complete():
    request = RewardRequest(round_kind="first", round_index=1, video_duration=8.0,
                            question=QUESTION, options=OPTIONS,
                            segments=segments_for((0, 4), (4, 8)), frames=(4.0,))
    reward = ScriptedReward([[(0, 10, "a"), (1, 20, "b")], [(0, 99, "never")]])
    suite = scripted_suite(ScriptedExtractor([]), ScriptedRetriever(), reward,
                           ScriptedPolicy([]))
    response, retries, warnings = evaluate_children(suite, request)
    assert retries == 0 and warnings == []
    assert len(reward.responses) == 1         # second scripted reply unused


# ============================================================
# Failure propagation
# ============================================================

class ExplodingReward:
    def evaluate(self, request):
        raise BackendError("chat endpoint unreachable", retries=2)


def test_backend_failure_carries_partial_trace():
    video = VideoMeta.uniform("v", 8.0, 1.0)
    suite = scripted_suite(ScriptedExtractor([]), ScriptedRetriever(),
                           ExplodingReward(), ScriptedPolicy([]))
    with pytest.raises(EpisodeError) as excinfo:
        run_episode(video, QUESTION, OPTIONS, suite, EpisodeConfig(seed=0))
    err = excinfo.value
    assert "after 2 retries" in str(err)
    assert err.trace.header["type"] == "header"
    assert err.trace.init is not None
    assert err.trace.rounds == []


def test_raw_scores_outside_range_clamp_with_warning():
    video = VideoMeta.uniform("v", 8.0, 1.0)
    reward = ScriptedReward([[(0, -5, "low"), (1, 130, "high")]])
    policy = ScriptedPolicy(["B"])
    suite = scripted_suite(ScriptedExtractor([]), ScriptedRetriever(), reward, policy)
    config = EpisodeConfig(budget=ExpansionBudget(1, 0), seed=0)
    result = run_episode(video, QUESTION, OPTIONS, suite, config)
    rec = result.trace.rounds[0]
    assert [c["raw_score"] for c in rec["children"]] == [0, 100]
    by_node = {c["node"]: c for c in rec["candidates"]}
    assert by_node[1]["r"] == 0.0 and by_node[2]["r"] == 1.0
    assert sum("clamped" in w for w in rec["warnings"]) == 2


# ============================================================
# Config validation
# ============================================================

def test_config_rejects_bad_values():
    with pytest.raises(RejectedInput):
        EpisodeConfig(tau_c=0.0)
    with pytest.raises(RejectedInput):
        EpisodeConfig(max_rounds=0)
    with pytest.raises(RejectedInput):
        EpisodeConfig(memory_capacity=0)


def test_reward_request_history_passed_pre_append():
    """Round 2's request carries exactly round 1's records and presentation."""
    video, question, options, suite, config = build_golden_setup()
    run_episode(video, question, options, suite, config)
    first, second = suite.reward.requests
    assert first.round_kind == "first" and first.history == ()
    assert second.round_kind == "following"
    assert second.parent_label == 2 and second.candidate_count == 3
    assert [(rec.node_id, rec.score) for rec in second.history] == \
        [(1, 10), (2, 20), (3, 80)]
    assert [r[0] for r in GOLDEN_ROUND1] == [0, 1, 2]
