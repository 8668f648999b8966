"""Paired-seed ablation benchmarks over synthetic episodes.

Every arm runs the exact same generated episodes (seed base_seed + i), so
metric deltas are attributable to configuration alone.  Arms mirror the
engine's switchable behaviors: anchor-guided expansion off, fusion off,
query updates off.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .backends.sim import call_rng
from .engine import EpisodeConfig, EpisodeError, run_episode
from .errors import RejectedInput
from .expansion import ExpansionBudget
from .scoring import normalized_entropy
from .simenv import EpisodeParams, SyntheticEpisode, generate_episode, make_suite
from .trace import EpisodeTrace, round9

ARMS = ("full", "no_sge", "no_uarf", "no_qu")
HISTOGRAM_BINS = 20
HIGH_ENTROPY_THRESHOLD = 0.8
# Histogram entropies sharpen the softmax to temperature 0.1 (the same
# sharpness constant used for similarity pooling).  At temperature 1 over
# [0,1]-bounded scores the normalized entropy cannot drop below ~0.84 (the
# spread is capped at 1), so every round would land in the top bins and the
# histogram would show nothing.
ENTROPY_TEMPERATURE = 0.1


def arm_config(base: EpisodeConfig, arm: str) -> EpisodeConfig:
    """Derive one ablation arm's engine configuration from the base."""
    if arm == "full":
        return base
    if arm == "no_sge":
        return replace(base, budget=ExpansionBudget(base.budget.total_frames, 0))
    if arm == "no_uarf":
        return replace(base, use_reward_fusion=False)
    if arm == "no_qu":
        return replace(base, update_queries_each_round=False)
    raise RejectedInput(f"unknown arm {arm!r}; known arms: {', '.join(ARMS)}")


@dataclass(frozen=True)
class BenchParams:
    episodes: int = 200
    base_seed: int = 1337
    duration_range: tuple[float, float] = (1800.0, 7200.0)
    evidence_range: tuple[int, int] = (1, 4)
    tightness: float = 0.0
    reward_noise_sigma: float = 0.15
    similarity_noise_sigma: float = 0.1
    arms: tuple[str, ...] = ARMS
    workers: int = 1

    def __post_init__(self):
        if self.episodes < 1:
            raise RejectedInput(f"episodes must be >= 1, got {self.episodes}")
        lo, hi = self.duration_range
        if not 60.0 <= lo <= hi:
            raise RejectedInput(f"bad duration range [{lo}, {hi}]")
        elo, ehi = self.evidence_range
        if not 1 <= elo <= ehi <= 4:
            raise RejectedInput(f"bad evidence range [{elo}, {ehi}]")
        if not self.arms:
            raise RejectedInput("at least one arm required")
        for arm in self.arms:
            if arm not in ARMS:
                raise RejectedInput(f"unknown arm {arm!r}; known arms: {', '.join(ARMS)}")
        if self.workers < 1:
            raise RejectedInput(f"workers must be >= 1, got {self.workers}")


def sample_episode(params: BenchParams, index: int) -> SyntheticEpisode:
    """Episode i of a bench run; identical across arms by construction."""
    seed = params.base_seed + index
    rng = call_rng(seed, "bench-sample")
    lo, hi = params.duration_range
    duration = float(rng.integers(int(lo), int(hi) + 1))
    elo, ehi = params.evidence_range
    count = int(rng.integers(elo, ehi + 1))
    ep_params = EpisodeParams(
        duration=duration, evidence_count=count, tightness=params.tightness,
        reward_noise_sigma=params.reward_noise_sigma,
        similarity_noise_sigma=params.similarity_noise_sigma)
    return generate_episode(seed, ep_params)


@dataclass
class EpisodeOutcome:
    seed: int
    arm: str
    success: Optional[bool]     # None when the episode errored
    frames: int = 0
    rounds: int = 0
    termination: str = ""
    error: str = ""
    trace: Optional[EpisodeTrace] = None


def _run_one(episode: SyntheticEpisode, arm: str, base: EpisodeConfig) -> EpisodeOutcome:
    config = replace(arm_config(base, arm), seed=episode.seed)
    suite = make_suite(episode)
    try:
        result = run_episode(episode.video, episode.question, episode.options,
                             suite, config)
    except EpisodeError as exc:
        return EpisodeOutcome(seed=episode.seed, arm=arm, success=None,
                              error=str(exc), trace=exc.trace)
    return EpisodeOutcome(
        seed=episode.seed, arm=arm,
        success=result.answer == episode.correct_label,
        frames=result.frames_observed, rounds=result.rounds_used,
        termination=result.termination, trace=result.trace)


# ============================================================
# Trace analytics
# ============================================================

def _round_entropies(trace: EpisodeTrace) -> list[tuple[float, float]]:
    """(intrinsic, fused) normalized entropy per round of one trace."""
    pairs = []
    for record in trace.rounds:
        rows = record.get("candidates", [])
        if not rows:
            continue
        r_vec = [row["r"] / ENTROPY_TEMPERATURE for row in rows]
        h_vec = [row["h"] / ENTROPY_TEMPERATURE for row in rows]
        pairs.append((normalized_entropy(r_vec), normalized_entropy(h_vec)))
    return pairs


def entropy_histograms(traces: Iterable[EpisodeTrace]) -> dict:
    """Fixed 20-bin histograms on [0, 1] of per-round normalized entropy,
    computed over the intrinsic-reward vector and the fused-score vector."""
    intrinsic = [0] * HISTOGRAM_BINS
    fused = [0] * HISTOGRAM_BINS
    high_r = high_h = rounds = 0
    for trace in traces:
        for ent_r, ent_h in _round_entropies(trace):
            intrinsic[min(int(ent_r * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)] += 1
            fused[min(int(ent_h * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)] += 1
            high_r += ent_r > HIGH_ENTROPY_THRESHOLD
            high_h += ent_h > HIGH_ENTROPY_THRESHOLD
            rounds += 1
    return {
        "bins": HISTOGRAM_BINS,
        "rounds": rounds,
        "intrinsic": intrinsic,
        "fused": fused,
        "high_fraction": {
            "threshold": HIGH_ENTROPY_THRESHOLD,
            "intrinsic": round9(high_r / rounds) if rounds else 0.0,
            "fused": round9(high_h / rounds) if rounds else 0.0,
        },
    }


def resolution_by_round(traces: Iterable[EpisodeTrace]) -> dict:
    """Mean selected-segment width and coverage radius, keyed by round index."""
    acc: dict[int, list[float]] = {}
    for trace in traces:
        for record in trace.rounds:
            k = record["round"]
            a, b = record["selected"]["interval"]
            acc.setdefault(k, []).append(b - a)
    out = {}
    for k in sorted(acc):
        widths = acc[k]
        out[str(k)] = {"count": len(widths),
                       "mean_selected_width": round9(sum(widths) / len(widths))}
    return out


# ============================================================
# Bench driver
# ============================================================

@dataclass
class BenchResult:
    report: dict
    outcomes: dict = field(default_factory=dict)    # arm -> list[EpisodeOutcome]

    def to_json(self) -> str:
        return json.dumps(self.report, sort_keys=True, indent=2) + "\n"

    def table(self) -> str:
        rows = [f"{'arm':<10} {'episodes':>8} {'success':>8} {'frames':>8} "
                f"{'rounds':>7} {'errors':>7}"]
        for arm in self.report["arms_order"]:
            stats = self.report["arms"][arm]
            rows.append(
                f"{arm:<10} {stats['episodes']:>8} {stats['success_rate']:>8.3f} "
                f"{stats['mean_frames']:>8.2f} {stats['mean_rounds']:>7.2f} "
                f"{stats['errors']:>7}")
        return "\n".join(rows) + "\n"


@dataclass
class SweepResult:
    report: dict
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.report, sort_keys=True, indent=2) + "\n"

    def curve(self) -> str:
        """Plain-text success curve over the swept anchor budget."""
        rows = [f"{'B_s':>4} {'success':>8} {'frames':>8} {'rounds':>7}"]
        for row in self.report["rows"]:
            bar = "#" * int(round(row["success_rate"] * 40))
            rows.append(f"{row['anchor_frames']:>4} {row['success_rate']:>8.3f} "
                        f"{row['mean_frames']:>8.2f} {row['mean_rounds']:>7.2f}  |{bar}")
        return "\n".join(rows) + "\n"


def run_sweep(values: Sequence[int], params: BenchParams,
              base_config: Optional[EpisodeConfig] = None) -> SweepResult:
    """Anchor-budget sweep: rerun the same paired episodes at each B_s value.

    Values above the total frame budget clamp to it (with a warning); repeats
    collapse after clamping.
    """
    base = base_config if base_config is not None else EpisodeConfig()
    total = base.budget.total_frames
    warnings: list[str] = []
    swept: list[int] = []
    for v in values:
        if v < 0:
            raise RejectedInput(f"anchor budget must be >= 0, got {v}")
        if v > total:
            warnings.append(f"anchor budget {v} exceeds frame budget {total}; clamped")
            v = total
        if v not in swept:
            swept.append(v)
    if not swept:
        raise RejectedInput("sweep needs at least one anchor budget value")

    episodes = [sample_episode(params, i) for i in range(params.episodes)]

    def run_value(bs: int) -> dict:
        config = replace(base, budget=ExpansionBudget(total, bs))
        if params.workers > 1:
            with ThreadPoolExecutor(max_workers=params.workers) as pool:
                rows = list(pool.map(lambda ep: _run_one(ep, "full", config), episodes))
        else:
            rows = [_run_one(ep, "full", config) for ep in episodes]
        done = [o for o in rows if o.success is not None]
        n = len(done)
        return {
            "anchor_frames": bs,
            "episodes": n,
            "errors": len(rows) - n,
            "success_rate": round9(sum(1 for o in done if o.success) / n) if n else 0.0,
            "mean_frames": round9(sum(o.frames for o in done) / n) if n else 0.0,
            "mean_rounds": round9(sum(o.rounds for o in done) / n) if n else 0.0,
        }

    rows = [run_value(bs) for bs in swept]
    report = {
        "kind": "videoscout.sweep.v1",
        "params": {
            "episodes": params.episodes,
            "base_seed": params.base_seed,
            "duration_range": [params.duration_range[0], params.duration_range[1]],
            "evidence_range": [params.evidence_range[0], params.evidence_range[1]],
            "tightness": params.tightness,
            "reward_noise_sigma": params.reward_noise_sigma,
            "similarity_noise_sigma": params.similarity_noise_sigma,
        },
        "config": base.as_dict(),
        "rows": rows,
        "warnings": warnings,
    }
    return SweepResult(report=report, warnings=warnings)


def run_bench(params: BenchParams, base_config: Optional[EpisodeConfig] = None) -> BenchResult:
    base = base_config if base_config is not None else EpisodeConfig()
    arms = tuple(dict.fromkeys(params.arms))    # preserve order, drop repeats

    def run_index(i: int) -> dict[str, EpisodeOutcome]:
        episode = sample_episode(params, i)
        return {arm: _run_one(episode, arm, base) for arm in arms}

    if params.workers > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            per_episode = list(pool.map(run_index, range(params.episodes)))
    else:
        per_episode = [run_index(i) for i in range(params.episodes)]

    outcomes = {arm: [per_episode[i][arm] for i in range(params.episodes)]
                for arm in arms}

    arms_report = {}
    for arm in arms:
        rows = outcomes[arm]
        done = [o for o in rows if o.success is not None]
        errors = [o for o in rows if o.success is None]
        n = len(done)
        successes = sum(1 for o in done if o.success)
        terminations: dict[str, int] = {}
        for o in done:
            terminations[o.termination] = terminations.get(o.termination, 0) + 1
        traces = [o.trace for o in done if o.trace is not None]
        arms_report[arm] = {
            "episodes": n,
            "errors": len(errors),
            "degraded": bool(errors),
            "success_rate": round9(successes / n) if n else 0.0,
            "mean_frames": round9(sum(o.frames for o in done) / n) if n else 0.0,
            "mean_rounds": round9(sum(o.rounds for o in done) / n) if n else 0.0,
            "terminations": dict(sorted(terminations.items())),
            "entropy": entropy_histograms(traces),
            "resolution_by_round": resolution_by_round(traces),
        }

    deltas = {}
    if "full" in arms:
        reference = outcomes["full"]
        for arm in arms:
            if arm == "full":
                continue
            pairs = [(a, b) for a, b in zip(outcomes[arm], reference)
                     if a.success is not None and b.success is not None]
            if not pairs:
                deltas[arm] = None
                continue
            n = len(pairs)
            deltas[arm] = {
                "episodes": n,
                "success_rate": round9(sum(int(a.success) - int(b.success)
                                           for a, b in pairs) / n),
                "mean_frames": round9(sum(a.frames - b.frames for a, b in pairs) / n),
                "mean_rounds": round9(sum(a.rounds - b.rounds for a, b in pairs) / n),
            }

    report = {
        "kind": "videoscout.bench.v1",
        "params": {
            "episodes": params.episodes,
            "base_seed": params.base_seed,
            "duration_range": [params.duration_range[0], params.duration_range[1]],
            "evidence_range": [params.evidence_range[0], params.evidence_range[1]],
            "tightness": params.tightness,
            "reward_noise_sigma": params.reward_noise_sigma,
            "similarity_noise_sigma": params.similarity_noise_sigma,
        },
        "config": base.as_dict(),
        "arms_order": list(arms),
        "arms": arms_report,
        "paired_deltas_vs_full": deltas,
    }
    return BenchResult(report=report, outcomes=outcomes)
