"""Simulated backend behavior: keyed RNG, relevance profiles, retrieval
windowing, reward scoring, and the scripted policy."""
import pytest

from videoscout.backends.base import (CandidateView, PolicyRequest, RewardRequest,
                                      hits_from_similarity)
from videoscout.backends.sim import (SimClipRetriever, SimPolicyModel, SimProfile,
                                     SimRewardModel, call_rng, relevance_profile)
from videoscout.core import SegmentInterval
from videoscout.errors import RejectedInput
from videoscout.simenv import EpisodeParams, generate_episode


def noiseless(seed=11, **kwargs):
    params = EpisodeParams(reward_noise_sigma=0.0, similarity_noise_sigma=0.0,
                           **kwargs)
    return generate_episode(seed, params)


# ============================================================
# Keyed RNG
# ============================================================

def test_call_rng_is_pure_in_its_identity():
    a = call_rng(7, "reward", 10.0, 20.0).normal(size=4)
    b = call_rng(7, "reward", 10.0, 20.0).normal(size=4)
    assert list(a) == list(b)


def test_call_rng_separates_identities_and_seeds():
    base = list(call_rng(7, "reward", 10.0, 20.0).normal(size=4))
    assert list(call_rng(7, "reward", 10.0, 21.0).normal(size=4)) != base
    assert list(call_rng(8, "reward", 10.0, 20.0).normal(size=4)) != base
    assert list(call_rng(7, "retrieve", 10.0, 20.0).normal(size=4)) != base


# ============================================================
# Relevance profile
# ============================================================

def test_relevance_profile_triangular_kernel():
    grid = [float(t) for t in range(0, 21)]
    values = relevance_profile(grid, [10.0], peak=0.9, falloff=8.0, baseline=0.05)
    assert values[10] == pytest.approx(0.9)
    assert values[14] == pytest.approx(0.9 * (1 - 4 / 8))
    assert values[2] == pytest.approx(0.05)       # beyond falloff: floor
    assert values[18] == pytest.approx(0.05)


def test_relevance_profile_takes_max_over_targets():
    grid = [0.0, 5.0, 10.0]
    values = relevance_profile(grid, [0.0, 10.0], peak=0.8, falloff=8.0, baseline=0.0)
    assert values[0] == pytest.approx(0.8)
    assert values[2] == pytest.approx(0.8)
    assert values[1] == pytest.approx(0.8 * (1 - 5 / 8))


def test_relevance_profile_without_targets_is_flat_baseline():
    values = relevance_profile([0.0, 1.0], [], peak=0.9, falloff=8.0, baseline=0.05)
    assert list(values) == [0.05, 0.05]


# ============================================================
# hits_from_similarity
# ============================================================

def test_hits_rank_by_similarity_with_time_tiebreak():
    grid = [0.0, 10.0, 20.0, 30.0]
    sims = [0.5, 0.9, 0.9, 0.1]
    hits = hits_from_similarity(grid, sims, top_k=3, window=8.0, duration=30.0)
    assert [h.peak_time for h in hits] == [10.0, 20.0, 0.0]
    assert [h.similarity for h in hits] == [0.9, 0.9, 0.5]


def test_hit_windows_clamp_to_video_bounds():
    hits = hits_from_similarity([0.0, 30.0], [0.9, 0.8], top_k=2,
                                window=8.0, duration=30.0)
    first, last = hits
    assert (first.start, first.end) == (0.0, 4.0)
    assert (last.start, last.end) == (26.0, 30.0)
    for h in hits:
        assert h.start <= h.peak_time <= h.end


# ============================================================
# Retriever
# ============================================================

def test_noiseless_retrieval_peaks_at_target_evidence():
    episode = noiseless()
    retriever = SimClipRetriever(episode)
    hits = retriever.retrieve(episode.initial_queries[0], 5)
    assert len(hits) == 5
    assert hits[0].peak_time == episode.evidence_times[0]
    assert hits[0].similarity == pytest.approx(0.9)


def test_unknown_query_returns_baseline_hits():
    episode = noiseless()
    hits = SimClipRetriever(episode).retrieve("totally unrelated phrase", 3)
    assert len(hits) == 3
    assert all(h.similarity == pytest.approx(episode.baseline_similarity)
               for h in hits)


def test_noisy_retrieval_is_deterministic_and_bounded():
    episode = generate_episode(21, EpisodeParams())
    retriever = SimClipRetriever(episode)
    first = retriever.retrieve(episode.initial_queries[0], 10)
    second = retriever.retrieve(episode.initial_queries[0], 10)
    assert first == second
    assert all(0.0 <= h.similarity <= 1.0 for h in first)


# ============================================================
# Reward model
# ============================================================

def reward_request(segments, question, options):
    return RewardRequest(round_kind="first", round_index=1, video_duration=1800.0,
                         question=question, options=tuple(options),
                         segments=tuple(segments), frames=(900.0,))


def test_noiseless_reward_is_evidence_fraction():
    episode = noiseless(seed=5)
    e0, e1 = episode.evidence_times
    model = SimRewardModel(episode)
    both = SegmentInterval(0.0, episode.video.duration)
    first_only = SegmentInterval(max(0.0, e0 - 1.0), e0 + 1.0)
    neither = None
    for a, b in [(0.0, 10.0), (500.0, 510.0), (1700.0, 1710.0)]:
        seg = SegmentInterval(a, b)
        if not any(seg.contains(t) for t in (e0, e1)):
            neither = seg
            break
    assert neither is not None, "could not find an evidence-free probe segment"
    response = model.evaluate(reward_request([both, first_only, neither],
                                             episode.question, episode.options))
    assert [s.score for s in response.scores] == [100, 50, 0]
    assert "e0, e1" in response.scores[0].explanation
    assert "e0" in response.scores[1].explanation
    assert "no planted evidence" in response.scores[2].explanation


def test_reward_scores_are_pure_functions_of_segment_bounds():
    episode = generate_episode(9, EpisodeParams())
    model = SimRewardModel(episode)
    seg = SegmentInterval(100.0, 400.0)
    r1 = model.evaluate(reward_request([seg], episode.question, episode.options))
    r2 = model.evaluate(reward_request([seg], episode.question, episode.options))
    assert r1.scores[0].score == r2.scores[0].score
    assert 0 <= r1.scores[0].score <= 100


def test_evidence_on_video_end_counts_for_last_segment():
    from dataclasses import replace
    episode = noiseless(seed=5)
    duration = episode.video.duration
    episode = replace(episode, evidence_times=(duration / 2, duration))
    model = SimRewardModel(episode)
    halves = [SegmentInterval(0.0, duration / 2), SegmentInterval(duration / 2, duration)]
    response = model.evaluate(reward_request(halves, episode.question, episode.options))
    assert [s.score for s in response.scores] == [0, 100]


# ============================================================
# Policy model
# ============================================================

def policy_request(memory_times, fused):
    candidates = tuple(
        CandidateView(label=i, interval=SegmentInterval(10.0 * i, 10.0 * i + 10.0),
                      fused_score=f, explanation="")
        for i, f in enumerate(fused))
    return PolicyRequest(question="q", options=("x", "y", "z", "w"),
                         video_duration=1800.0, memory_times=tuple(memory_times),
                         candidates=candidates)


def test_policy_answers_once_memory_holds_enough_evidence():
    episode = noiseless(seed=3)
    policy = SimPolicyModel(episode)
    near = [t + 1.5 for t in episode.evidence_times]      # inside tolerance 2.0
    assert policy.decide(policy_request(near, [0.2, 0.8])) == episode.correct_label


def test_policy_explores_highest_fused_until_threshold():
    episode = noiseless(seed=3)
    policy = SimPolicyModel(episode)
    partial = [episode.evidence_times[0]]                 # 1 of 2 pieces
    assert policy.decide(policy_request(partial, [0.2, 0.8, 0.5])) == "{Segment: 1}"


def test_policy_honors_custom_threshold():
    episode = noiseless(seed=3, answer_threshold=1)
    policy = SimPolicyModel(episode)
    partial = [episode.evidence_times[0]]
    assert policy.decide(policy_request(partial, [0.2, 0.8])) == episode.correct_label


# ============================================================
# Profile validation
# ============================================================

def test_profile_rejects_out_of_range_sigmas():
    with pytest.raises(RejectedInput):
        SimProfile(seed=0, reward_noise_sigma=0.5)
    with pytest.raises(RejectedInput):
        SimProfile(seed=0, similarity_noise_sigma=-0.1)
