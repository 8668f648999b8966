"""HTTP service over the episode engine and benchmark drivers.

Thin by design: every endpoint validates its body, builds the same objects
the command line builds, and calls straight into the core package.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .bench import BenchParams, run_bench, run_sweep
from .config import resolve_engine_config
from .engine import EpisodeConfig, EpisodeError, run_episode
from .errors import RejectedInput
from .schemas import (BenchRequest, BenchResponse, EngineSettings,
                      EpisodeSettings, HealthResponse, RunRequest, RunResponse,
                      SweepRequest, SweepResponse, TraceRenderRequest,
                      TraceRenderResponse)
from .simenv import EpisodeParams, generate_episode, make_suite
from .trace import TraceFormatError, parse_trace, render_trace

app = FastAPI(title="videoscout", version=__version__)


def engine_config(settings: EngineSettings, seed: int) -> EpisodeConfig:
    overrides = settings.model_dump()
    overrides["seed"] = seed
    return resolve_engine_config({}, overrides)


def episode_params(settings: EpisodeSettings) -> EpisodeParams:
    return EpisodeParams(
        duration=settings.duration,
        evidence_count=settings.evidence_count,
        tightness=settings.tightness,
        reward_noise_sigma=settings.reward_noise_sigma,
        similarity_noise_sigma=settings.similarity_noise_sigma,
        answer_threshold=settings.answer_threshold,
    )


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/episodes/run", response_model=RunResponse)
def episodes_run(request: RunRequest) -> RunResponse:
    try:
        params = episode_params(request.episode)
        config = engine_config(request.engine, request.seed)
        episode = generate_episode(request.seed, params)
        suite = make_suite(episode)
        result = run_episode(episode.video, episode.question, episode.options,
                             suite, config)
    except RejectedInput as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except EpisodeError as exc:
        raise HTTPException(status_code=502, detail=str(exc))
    return RunResponse(
        answer=result.answer,
        correct_answer=episode.correct_label,
        success=result.answer == episode.correct_label,
        termination=result.termination,
        rounds_used=result.rounds_used,
        frames_observed=result.frames_observed,
        warnings=result.warnings,
        trace=result.trace.to_jsonl() if request.include_trace else None,
    )


def _bench_params(request: BenchRequest | SweepRequest) -> BenchParams:
    return BenchParams(
        episodes=request.episodes,
        base_seed=request.base_seed,
        duration_range=request.duration_range,
        evidence_range=request.evidence_range,
        tightness=request.tightness,
        reward_noise_sigma=request.reward_noise_sigma,
        similarity_noise_sigma=request.similarity_noise_sigma,
        arms=tuple(request.arms) if isinstance(request, BenchRequest) else ("full",),
        workers=request.workers,
    )


@app.post("/bench/run", response_model=BenchResponse)
def bench_run(request: BenchRequest) -> BenchResponse:
    try:
        params = _bench_params(request)
        config = engine_config(request.engine, params.base_seed)
        result = run_bench(params, config)
    except RejectedInput as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return BenchResponse(report=result.report, table=result.table())


@app.post("/sweep/run", response_model=SweepResponse)
def sweep_run(request: SweepRequest) -> SweepResponse:
    try:
        params = _bench_params(request)
        config = engine_config(request.engine, params.base_seed)
        result = run_sweep(request.values, params, config)
    except RejectedInput as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return SweepResponse(report=result.report, curve=result.curve(),
                         warnings=result.warnings)


@app.post("/traces/render", response_model=TraceRenderResponse)
def traces_render(request: TraceRenderRequest) -> TraceRenderResponse:
    try:
        trace, problems = parse_trace(request.trace_text)
    except TraceFormatError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return TraceRenderResponse(rendered=render_trace(trace), problems=problems)
