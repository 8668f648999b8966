"""Request/response bodies for the HTTP service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from .bench import ARMS


class EngineSettings(BaseModel):
    """Engine overrides; unset fields keep their defaults."""
    total_frames: Optional[int] = Field(default=None, ge=1)
    anchor_frames: Optional[int] = Field(default=None, ge=0)
    tau_c: Optional[float] = Field(default=None, gt=0)
    memory_capacity: Optional[int] = Field(default=None, ge=1)
    retrieval_top_k: Optional[int] = Field(default=None, ge=1)
    max_rounds: Optional[int] = Field(default=None, ge=1)
    max_total_frames: Optional[int] = Field(default=None, ge=1)
    use_reward_fusion: Optional[bool] = None
    update_queries_each_round: Optional[bool] = None


class EpisodeSettings(BaseModel):
    """Synthetic-world parameters for one simulated episode."""
    duration: float = Field(default=1800.0, ge=60.0)
    evidence_count: int = Field(default=2, ge=1, le=4)
    tightness: float = Field(default=0.0, ge=0.0, le=1.0)
    reward_noise_sigma: float = Field(default=0.15, ge=0.0, lt=0.5)
    similarity_noise_sigma: float = Field(default=0.1, ge=0.0, lt=0.5)
    answer_threshold: Optional[int] = Field(default=None, ge=1, le=4)


class RunRequest(BaseModel):
    seed: int = 0
    episode: EpisodeSettings = EpisodeSettings()
    engine: EngineSettings = EngineSettings()
    include_trace: bool = False


class RunResponse(BaseModel):
    answer: str
    correct_answer: str
    success: bool
    termination: str
    rounds_used: int
    frames_observed: int
    warnings: list[str]
    trace: Optional[str] = None


class BenchRequest(BaseModel):
    episodes: int = Field(default=200, ge=1)
    base_seed: int = 1337
    arms: list[str] = Field(default=list(ARMS))
    duration_range: tuple[float, float] = (1800.0, 7200.0)
    evidence_range: tuple[int, int] = (1, 4)
    tightness: float = Field(default=0.0, ge=0.0, le=1.0)
    reward_noise_sigma: float = Field(default=0.15, ge=0.0, lt=0.5)
    similarity_noise_sigma: float = Field(default=0.1, ge=0.0, lt=0.5)
    workers: int = Field(default=1, ge=1)
    engine: EngineSettings = EngineSettings()


class BenchResponse(BaseModel):
    report: dict
    table: str


class SweepRequest(BaseModel):
    values: list[int] = Field(default=[0, 1, 2, 3, 4, 5, 6])
    episodes: int = Field(default=60, ge=1)
    base_seed: int = 1337
    duration_range: tuple[float, float] = (1800.0, 7200.0)
    evidence_range: tuple[int, int] = (1, 4)
    tightness: float = Field(default=0.0, ge=0.0, le=1.0)
    reward_noise_sigma: float = Field(default=0.15, ge=0.0, lt=0.5)
    similarity_noise_sigma: float = Field(default=0.1, ge=0.0, lt=0.5)
    workers: int = Field(default=1, ge=1)
    engine: EngineSettings = EngineSettings()


class SweepResponse(BaseModel):
    report: dict
    curve: str
    warnings: list[str]


class TraceRenderRequest(BaseModel):
    trace_text: str


class TraceRenderResponse(BaseModel):
    rendered: str
    problems: list[str]


class HealthResponse(BaseModel):
    status: str
    version: str
