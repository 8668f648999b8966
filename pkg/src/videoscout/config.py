"""Flat key/value configuration files.

Keys mirror the engine and backend dataclass field names one-to-one so a
config file reads like the objects it populates.  Resolution order for every
key independently: explicit override (command-line flag) > config file >
built-in default.  Secrets never live here; the API token comes exclusively
from the environment (see backends.http.TOKEN_ENV_VAR).
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional

import yaml

from .backends.base import BackendProfile
from .engine import EpisodeConfig
from .errors import RejectedInput
from .expansion import ExpansionBudget

_ENGINE_KEYS = {
    "total_frames": int,
    "anchor_frames": int,
    "tau_c": float,
    "memory_capacity": int,
    "retrieval_top_k": int,
    "max_rounds": int,
    "max_total_frames": int,
    "seed": int,
    "use_reward_fusion": bool,
    "update_queries_each_round": bool,
}

_BACKEND_KEYS = {
    "kind": str,
    "endpoint": str,
    "model_name": str,
    "request_temperature": float,
    "timeout": float,
    "retry_budget": int,
}

KNOWN_KEYS = {**_ENGINE_KEYS, **_BACKEND_KEYS}

_FORBIDDEN_KEYS = ("token", "api_token", "api_key", "secret")


def _coerce(key: str, value: object, target: type) -> object:
    if target is bool:
        if isinstance(value, bool):
            return value
        raise RejectedInput(f"config key {key!r} must be true or false, got {value!r}")
    if target is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise RejectedInput(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RejectedInput(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if target is str:
        if not isinstance(value, str):
            raise RejectedInput(f"config key {key!r} must be text, got {value!r}")
        return value
    raise AssertionError(key)


def load_config_file(path: str | Path) -> dict:
    """Parse and validate a flat config mapping; unknown keys are errors."""
    p = Path(path)
    if not p.exists():
        raise RejectedInput(f"config file not found: {p}")
    raw = yaml.safe_load(p.read_text())
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise RejectedInput(f"config file must hold a flat key: value mapping: {p}")
    out: dict = {}
    for key, value in raw.items():
        if not isinstance(key, str):
            raise RejectedInput(f"config keys must be text, got {key!r}")
        if any(marker in key.lower() for marker in _FORBIDDEN_KEYS):
            raise RejectedInput(
                f"config key {key!r} looks like a secret; tokens are read from "
                f"the environment only")
        if key not in KNOWN_KEYS:
            known = ", ".join(sorted(KNOWN_KEYS))
            raise RejectedInput(f"unknown config key {key!r}; known keys: {known}")
        out[key] = _coerce(key, value, KNOWN_KEYS[key])
    return out


def _resolved(key: str, overrides: Mapping, file_map: Mapping) -> Optional[object]:
    if overrides.get(key) is not None:
        return overrides[key]
    if key in file_map:
        return file_map[key]
    return None


def resolve_engine_config(file_map: Mapping, overrides: Optional[Mapping] = None) -> EpisodeConfig:
    """EpisodeConfig with per-key precedence: overrides > file > defaults."""
    overrides = overrides or {}
    defaults = EpisodeConfig()
    picked = {}
    for key in _ENGINE_KEYS:
        picked[key] = _resolved(key, overrides, file_map)
    budget = ExpansionBudget(
        total_frames=picked["total_frames"] if picked["total_frames"] is not None
        else defaults.budget.total_frames,
        anchor_frames=picked["anchor_frames"] if picked["anchor_frames"] is not None
        else defaults.budget.anchor_frames,
    )
    kwargs = {"budget": budget}
    for key in ("tau_c", "memory_capacity", "retrieval_top_k", "max_rounds",
                "max_total_frames", "seed", "use_reward_fusion",
                "update_queries_each_round"):
        if picked[key] is not None:
            kwargs[key] = picked[key]
    return EpisodeConfig(**kwargs)


def resolve_backend_profile(file_map: Mapping, overrides: Optional[Mapping] = None) -> BackendProfile:
    """BackendProfile with the same per-key precedence."""
    overrides = overrides or {}
    kwargs = {}
    for key in _BACKEND_KEYS:
        value = _resolved(key, overrides, file_map)
        if value is not None:
            kwargs[key] = value
    return BackendProfile(**kwargs)
