"""Command line: run episodes, benchmarks, and anchor-budget sweeps; inspect
traces; serve the HTTP API.

Configuration precedence is per key: flags > config file > defaults.  Exit
codes: 0 success, 1 runtime failure (backend/episode errors), 2 invalid
input (bad flags, unreadable files, schema mismatches).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .backends.base import BackendSuite
from .bench import ARMS, BenchParams, run_bench, run_sweep
from .config import load_config_file, resolve_backend_profile, resolve_engine_config
from .engine import EpisodeConfig, EpisodeError, run_episode
from .errors import BackendError, RejectedInput
from .simenv import EpisodeParams, generate_episode, make_suite
from .trace import EpisodeTrace, TraceFormatError, load_trace, render_trace


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("engine")
    group.add_argument("--config", metavar="PATH", help="flat YAML config file")
    group.add_argument("--seed", type=int, default=None)
    group.add_argument("--total-frames", type=int, default=None,
                       help="frames sampled per expansion (B)")
    group.add_argument("--anchor-frames", type=int, default=None,
                       help="frames reserved for anchors (B_s)")
    group.add_argument("--tau-c", type=float, default=None,
                       help="softmax pooling temperature")
    group.add_argument("--memory-capacity", type=int, default=None)
    group.add_argument("--retrieval-top-k", type=int, default=None)
    group.add_argument("--max-rounds", type=int, default=None)
    group.add_argument("--max-total-frames", type=int, default=None)
    group.add_argument("--fusion", action=argparse.BooleanOptionalAction,
                       default=None, help="blend query scores into rewards")
    group.add_argument("--query-updates", action=argparse.BooleanOptionalAction,
                       default=None, help="refresh queries/anchors every round")


def _add_sim_flags(parser: argparse.ArgumentParser, bench: bool) -> None:
    group = parser.add_argument_group("simulated world")
    if bench:
        group.add_argument("--duration-range", metavar="LO:HI", default=None,
                           help="episode duration bounds in seconds")
        group.add_argument("--evidence-range", metavar="LO:HI", default=None,
                           help="evidence count bounds")
    else:
        group.add_argument("--duration", type=float, default=1800.0)
        group.add_argument("--evidence", type=int, default=2)
        group.add_argument("--answer-threshold", type=int, default=None)
    group.add_argument("--tightness", type=float, default=0.0,
                       help="0 spreads evidence uniformly; 1 clusters it")
    group.add_argument("--sigma-reward", type=float, default=0.15)
    group.add_argument("--sigma-similarity", type=float, default=0.1)


def _engine_overrides(args: argparse.Namespace) -> dict:
    return {
        "total_frames": args.total_frames,
        "anchor_frames": args.anchor_frames,
        "tau_c": args.tau_c,
        "memory_capacity": args.memory_capacity,
        "retrieval_top_k": args.retrieval_top_k,
        "max_rounds": args.max_rounds,
        "max_total_frames": args.max_total_frames,
        "seed": args.seed,
        "use_reward_fusion": args.fusion,
        "update_queries_each_round": args.query_updates,
    }


def _load_file_map(args: argparse.Namespace) -> dict:
    return load_config_file(args.config) if args.config else {}


def _parse_range(text: str, kind: type) -> tuple:
    try:
        lo, hi = text.split(":")
        return (kind(lo), kind(hi))
    except ValueError:
        raise RejectedInput(f"expected LO:HI, got {text!r}")


def _write_text(path: str, text: str) -> None:
    out = Path(path)
    if out.parent and not out.parent.exists():
        raise RejectedInput(f"output directory does not exist: {out.parent}")
    out.write_text(text)


# ============================================================
# run
# ============================================================

def _live_inputs(args: argparse.Namespace):
    from .backends.http import (ChatClient, EmbeddingsClient, HttpClipRetriever,
                                HttpPolicyModel, HttpQueryExtractor,
                                HttpSegmentRewardModel)
    from .backends.manifests import load_embedding_manifest, load_frame_manifest
    from .core import VideoMeta

    for name in ("frames_manifest", "embeddings_manifest", "question_file"):
        path = getattr(args, name)
        if not Path(path).exists():
            raise RejectedInput(f"{name.replace('_', '-')} not found: {path}")
    store = load_frame_manifest(args.frames_manifest)
    index = load_embedding_manifest(args.embeddings_manifest)
    doc = json.loads(Path(args.question_file).read_text())
    if not isinstance(doc, dict) or "question" not in doc or "options" not in doc:
        raise RejectedInput(
            f"question file must hold {{question, options}}: {args.question_file}")

    file_map = _load_file_map(args)
    overrides = {"kind": "http", "endpoint": args.endpoint, "model_name": args.model_name}
    profile = resolve_backend_profile(file_map, overrides)
    chat = ChatClient(profile)
    embeddings = EmbeddingsClient(profile)
    suite = BackendSuite(
        extractor=HttpQueryExtractor(chat),
        retriever=HttpClipRetriever(embeddings, index),
        reward=HttpSegmentRewardModel(chat, store),
        policy=HttpPolicyModel(chat, store),
        deterministic=False,
        retry_budget=profile.retry_budget,
    )
    video = VideoMeta(video_id=store.video_id, duration=store.duration,
                      frame_grid=tuple(store.times))
    return video, str(doc["question"]), list(doc["options"]), suite, None


def _sim_inputs(args: argparse.Namespace, config: EpisodeConfig):
    params = EpisodeParams(
        duration=args.duration,
        evidence_count=args.evidence,
        tightness=args.tightness,
        reward_noise_sigma=args.sigma_reward,
        similarity_noise_sigma=args.sigma_similarity,
        answer_threshold=args.answer_threshold,
    )
    episode = generate_episode(config.seed, params)
    suite = make_suite(episode)
    return episode.video, episode.question, episode.options, suite, episode


def cmd_run(args: argparse.Namespace) -> int:
    file_map = _load_file_map(args)
    config = resolve_engine_config(file_map, _engine_overrides(args))

    manifest_flags = [args.frames_manifest, args.embeddings_manifest, args.question_file]
    if any(manifest_flags) and not all(manifest_flags):
        raise RejectedInput("live mode needs --frames-manifest, --embeddings-manifest "
                            "and --question-file together")
    live = all(manifest_flags)
    if live:
        video, question, options, suite, episode = _live_inputs(args)
    else:
        video, question, options, suite, episode = _sim_inputs(args, config)

    trace: Optional[EpisodeTrace] = None
    try:
        result = run_episode(video, question, options, suite, config)
        trace = result.trace
    except EpisodeError as exc:
        # The partial trace still gets flushed so the failure is inspectable.
        if args.out and exc.trace is not None:
            _write_text(args.out, exc.trace.to_jsonl())
            print(f"partial trace written to {args.out}", file=sys.stderr)
        print(f"episode failed: {exc}", file=sys.stderr)
        return 1
    if args.out:
        _write_text(args.out, trace.to_jsonl())

    print(f"answer: {result.answer}")
    if episode is not None:
        verdict = "correct" if result.answer == episode.correct_label else "wrong"
        print(f"expected: {episode.correct_label} ({verdict})")
    print(f"termination: {result.termination}")
    print(f"rounds: {result.rounds_used}")
    print(f"frames observed: {result.frames_observed}")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.out:
        print(f"trace written to {args.out}")
    if args.render:
        print()
        print(render_trace(result.trace), end="")
    return 0


# ============================================================
# bench / sweep
# ============================================================

def _bench_params(args: argparse.Namespace, arms: tuple) -> BenchParams:
    kwargs = {}
    if args.duration_range:
        kwargs["duration_range"] = _parse_range(args.duration_range, float)
    if args.evidence_range:
        kwargs["evidence_range"] = _parse_range(args.evidence_range, int)
    return BenchParams(
        episodes=args.episodes,
        base_seed=args.base_seed,
        tightness=args.tightness,
        reward_noise_sigma=args.sigma_reward,
        similarity_noise_sigma=args.sigma_similarity,
        arms=arms,
        workers=args.workers,
        **kwargs,
    )


def cmd_bench(args: argparse.Namespace) -> int:
    file_map = _load_file_map(args)
    config = resolve_engine_config(file_map, _engine_overrides(args))
    arms = tuple(args.arm) if args.arm else ARMS
    params = _bench_params(args, arms)
    result = run_bench(params, config)
    print(result.table(), end="")
    degraded = [arm for arm in arms if result.report["arms"][arm]["degraded"]]
    for arm in degraded:
        errors = result.report["arms"][arm]["errors"]
        print(f"warning: arm {arm} degraded ({errors} episode errors)", file=sys.stderr)
    if args.out:
        _write_text(args.out, result.to_json())
        print(f"report written to {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    file_map = _load_file_map(args)
    config = resolve_engine_config(file_map, _engine_overrides(args))
    try:
        values = [int(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError:
        raise RejectedInput(f"--values must be comma-separated integers, got {args.values!r}")
    params = _bench_params(args, ("full",))
    result = run_sweep(values, params, config)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(result.curve(), end="")
    if args.out:
        _write_text(args.out, result.to_json())
        print(f"report written to {args.out}")
    return 0


# ============================================================
# show / serve
# ============================================================

def cmd_show(args: argparse.Namespace) -> int:
    path = Path(args.trace)
    if not path.exists():
        print(f"trace file not found: {path}", file=sys.stderr)
        return 2
    try:
        trace, problems = load_trace(path)
    except TraceFormatError as exc:
        print(f"unreadable trace: {exc}", file=sys.stderr)
        return 2
    print(render_trace(trace), end="")
    for problem in problems:
        print(f"notice: {problem}", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ============================================================
# entry point
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="videoscout",
        description="Long-video question answering by anchor-guided tree search.")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one episode and write its trace")
    _add_engine_flags(run)
    _add_sim_flags(run, bench=False)
    live = run.add_argument_group("live inputs")
    live.add_argument("--frames-manifest", metavar="PATH")
    live.add_argument("--embeddings-manifest", metavar="PATH")
    live.add_argument("--question-file", metavar="PATH")
    live.add_argument("--endpoint", default=None)
    live.add_argument("--model-name", default=None)
    run.add_argument("--out", metavar="PATH", help="trace file to write")
    run.add_argument("--render", action="store_true",
                     help="print the round-by-round rendering")
    run.set_defaults(handler=cmd_run)

    bench = commands.add_parser("bench", help="paired-seed ablation benchmark")
    _add_engine_flags(bench)
    _add_sim_flags(bench, bench=True)
    bench.add_argument("--episodes", type=int, default=200)
    bench.add_argument("--base-seed", type=int, default=1337)
    bench.add_argument("--arm", action="append", choices=ARMS,
                       help="repeatable; default: all arms")
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out", metavar="PATH", help="report file to write")
    bench.set_defaults(handler=cmd_bench)

    sweep = commands.add_parser("sweep", help="anchor-budget (B_s) sweep")
    _add_engine_flags(sweep)
    _add_sim_flags(sweep, bench=True)
    sweep.add_argument("--values", default="0,1,2,3,4,5,6",
                       help="comma-separated anchor budgets")
    sweep.add_argument("--episodes", type=int, default=60)
    sweep.add_argument("--base-seed", type=int, default=1337)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", metavar="PATH", help="report file to write")
    sweep.set_defaults(handler=cmd_sweep)

    show = commands.add_parser("show", help="render a trace file")
    show.add_argument("trace", metavar="TRACE")
    show.set_defaults(handler=cmd_show)

    serve = commands.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except RejectedInput as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
