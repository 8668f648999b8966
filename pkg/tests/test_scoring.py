import math
import random

import pytest
from hypothesis import given, strategies as st

from videoscout.core import SegmentInterval
from videoscout.errors import RejectedInput
from videoscout.scoring import (
    FusionContext, fuse, log_mean_exp, normalize_intrinsic, normalized_entropy,
    pooled_similarity, query_score, softmax,
)

from conftest import make_anchor_set

# High-precision reference values, derived independently with 60-digit
# arithmetic (see notes), then frozen here.
ENTROPY_09_01 = 0.8932029133344277
POOL_1_0_TAU01 = 0.9306898218339271
POOL_02_08_TAU01 = 0.7309328504577786


# ============================================================
# pooled similarity / query score
# ============================================================

def test_pool_constant_inputs_is_exact():
    for tau in (0.001, 0.1, 1.0, 1000.0):
        assert pooled_similarity([0.5, 0.5], tau) == 0.5


def test_pool_matches_high_precision_reference():
    assert abs(pooled_similarity([1.0, 0.0], 0.1) - POOL_1_0_TAU01) < 1e-12
    assert abs(pooled_similarity([0.2, 0.8], 0.1) - POOL_02_08_TAU01) < 1e-12


def test_pool_empty_is_zero():
    assert pooled_similarity([], 0.1) == 0.0


def test_pool_rejects_nonpositive_temperature():
    with pytest.raises(RejectedInput):
        pooled_similarity([0.5], 0.0)
    with pytest.raises(RejectedInput):
        log_mean_exp([0.5], -1.0)


def test_pool_limits():
    # tau -> inf approaches the mean; tau -> 0+ approaches the max.
    # The small-tau gap is tau*log(n), so the tight check uses n = 2.
    assert abs(pooled_similarity([0.3, 0.7, 0.5], 1000.0) - 0.5) < 1e-3
    assert abs(pooled_similarity([1.0, 0.0], 0.001) - 1.0) < 1e-3


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=12),
       st.sampled_from([0.01, 0.1, 1.0, 10.0]))
def test_pool_bounded_by_mean_and_max(phis, tau):
    u = pooled_similarity(phis, tau)
    mean = min(math.fsum(phis) / len(phis), max(phis))
    assert mean <= u <= max(phis)


def test_pool_monotone_in_each_similarity():
    base = [0.2, 0.5, 0.7]
    u0 = pooled_similarity(base, 0.1)
    for i in range(3):
        bumped = list(base)
        bumped[i] += 0.1
        assert pooled_similarity(bumped, 0.1) >= u0


def test_query_score_uses_anchor_membership():
    anchors = make_anchor_set([(5.0, 0.4), (30.0, 1.0), (60.0, 0.0)])
    seg = SegmentInterval(30.0, 60.0)
    assert abs(query_score(seg, anchors, 0.1) - 1.0) < 1e-12
    wide = SegmentInterval(25.0, 65.0)
    assert abs(query_score(wide, anchors, 0.1) - POOL_1_0_TAU01) < 1e-12
    assert query_score(SegmentInterval(70.0, 90.0), anchors, 0.1) == 0.0


# ============================================================
# normalized entropy
# ============================================================

def test_entropy_uniform_rewards():
    assert normalized_entropy([0.4, 0.4, 0.4]) == 1.0


def test_entropy_matches_high_precision_reference():
    assert abs(normalized_entropy([0.9, 0.1]) - ENTROPY_09_01) < 1e-12


def test_entropy_single_candidate_convention():
    assert normalized_entropy([0.7]) == 0.0


def test_entropy_rejects_empty():
    with pytest.raises(RejectedInput):
        normalized_entropy([])


def _entropy_brute(rewards):
    # direct formula, no max subtraction, reversed summation order
    exps = [math.exp(r) for r in reversed(rewards)]
    z = math.fsum(exps)
    ps = [e / z for e in exps]
    h = -math.fsum(p * math.log(p) for p in ps if p > 0)
    return h / math.log(len(rewards))


def test_entropy_equals_brute_force_on_grid():
    grid = [i / 10 for i in range(11)]
    for a in grid:
        for b in grid:
            assert abs(normalized_entropy([a, b]) - _entropy_brute([a, b])) < 1e-12
    rng = random.Random(4)
    for _ in range(500):
        n = rng.randint(3, 6)
        v = [rng.randrange(11) / 10 for _ in range(n)]
        assert abs(normalized_entropy(v) - _entropy_brute(v)) < 1e-12


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=10))
def test_entropy_in_unit_range(rewards):
    assert 0.0 <= normalized_entropy(rewards) <= 1.0


def test_entropy_shift_invariance():
    rng = random.Random(11)
    for _ in range(200):
        v = [rng.random() for _ in range(rng.randint(2, 8))]
        shift = rng.uniform(-5, 5)
        shifted = [x + shift for x in v]
        assert abs(normalized_entropy(v) - normalized_entropy(shifted)) < 1e-9
        p0, p1 = softmax(v), softmax(shifted)
        assert all(abs(a - b) < 1e-9 for a, b in zip(p0, p1))


# ============================================================
# fusion
# ============================================================

def test_fuse_single_candidate_trusts_reward():
    bundles, ctx = fuse([(0, 0.37, 0.9)], tau_c=0.1)
    assert ctx.entropy == 0.0
    assert bundles[0].fused == 0.37


def test_fuse_equal_rewards_trusts_query_score():
    bundles, ctx = fuse([(0, 0.5, 0.9), (1, 0.5, 0.2), (2, 0.5, 0.4)], tau_c=0.1)
    assert ctx.entropy == 1.0
    assert [b.fused for b in bundles] == [0.9, 0.2, 0.4]


def test_fuse_blend_is_the_documented_formula():
    cands = [(0, 0.6, 0.8), (1, 0.2, 0.3), (2, 0.9, 0.1)]
    bundles, ctx = fuse(cands, tau_c=0.1)
    for (nid, r, u), b in zip(cands, bundles):
        expect = (1 - ctx.entropy) * r + ctx.entropy * u
        assert abs(b.fused - expect) < 1e-15
        assert min(r, u) <= b.fused <= max(r, u)
    assert abs(sum(ctx.probabilities) - 1.0) < 1e-9
    assert ctx.candidate_count == 3


def test_fuse_midpoint_arithmetic():
    h = (1 - 0.5) * 0.6 + 0.5 * 0.8
    assert abs(h - 0.7) < 1e-15


def test_fuse_rejects_out_of_range_scores():
    with pytest.raises(RejectedInput):
        fuse([(0, 1.5, 0.5)], tau_c=0.1)
    with pytest.raises(RejectedInput):
        fuse([], tau_c=0.1)
    with pytest.raises(RejectedInput):
        fuse([(0, 0.5, 0.5)], tau_c=0.0)


def test_fuse_convexity_random():
    rng = random.Random(7)
    for _ in range(2000):
        n = rng.randint(1, 9)
        cands = [(i, rng.random(), rng.random()) for i in range(n)]
        bundles, _ = fuse(cands, tau_c=0.1)
        for (_, r, u), b in zip(cands, bundles):
            assert min(r, u) <= b.fused <= max(r, u)


def test_fuse_argmax_shift_invariant_within_unit_range():
    # shifting all rewards by a constant keeps them rankable; argmax of fused
    # must not move (entropy and probabilities are shift-invariant)
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(2, 6)
        rs = [rng.uniform(0.0, 0.7) for _ in range(n)]
        us = [rng.random() for _ in range(n)]
        b0, c0 = fuse(list(zip(range(n), rs, us)), tau_c=0.1)
        b1, c1 = fuse(list(zip(range(n), [r + 0.3 for r in rs], us)), tau_c=0.1)
        assert abs(c0.entropy - c1.entropy) < 1e-9
        assert max(range(n), key=lambda i: (b0[i].fused, -i)) == \
               max(range(n), key=lambda i: (b1[i].fused, -i))


def test_fuse_monotone_in_intrinsic():
    # raising one candidate's r never lowers its own fused score when the
    # entropy is held fixed by construction (two-candidate symmetric case)
    b0, _ = fuse([(0, 0.4, 0.5), (1, 0.6, 0.5)], tau_c=0.1)
    b1, _ = fuse([(0, 0.6, 0.5), (1, 0.4, 0.5)], tau_c=0.1)
    assert b1[0].fused >= b0[0].fused


# ============================================================
# normalize_intrinsic
# ============================================================

def test_normalize_intrinsic_endpoints():
    assert normalize_intrinsic(100) == (1.0, None)
    assert normalize_intrinsic(0) == (0.0, None)


def test_normalize_intrinsic_clamps_with_warning():
    value, warning = normalize_intrinsic(150)
    assert value == 1.0
    assert warning is not None
    value, warning = normalize_intrinsic(-3)
    assert value == 0.0
    assert warning is not None


def test_fusion_context_weights():
    ctx = FusionContext(tau_c=0.1, candidate_count=2, entropy=0.25,
                        probabilities=(0.5, 0.5))
    assert ctx.intrinsic_weight == 0.75
    assert ctx.query_weight == 0.25
