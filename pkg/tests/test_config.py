"""Config file loading and per-key precedence resolution."""
import pytest

from videoscout.config import (KNOWN_KEYS, load_config_file, resolve_backend_profile,
                               resolve_engine_config)
from videoscout.engine import EpisodeConfig
from videoscout.errors import RejectedInput


def write_config(tmp_path, text):
    p = tmp_path / "run.yaml"
    p.write_text(text)
    return p


# ============================================================
# load_config_file
# ============================================================

def test_missing_file_is_rejected(tmp_path):
    with pytest.raises(RejectedInput, match="not found"):
        load_config_file(tmp_path / "absent.yaml")


def test_empty_file_yields_empty_mapping(tmp_path):
    assert load_config_file(write_config(tmp_path, "")) == {}


def test_non_mapping_file_is_rejected(tmp_path):
    with pytest.raises(RejectedInput, match="flat key: value mapping"):
        load_config_file(write_config(tmp_path, "- a\n- b\n"))


def test_unknown_key_names_the_known_set(tmp_path):
    with pytest.raises(RejectedInput) as excinfo:
        load_config_file(write_config(tmp_path, "budget_frames: 32\n"))
    message = str(excinfo.value)
    assert "unknown config key 'budget_frames'" in message
    assert "total_frames" in message and "retry_budget" in message


def test_secret_like_keys_are_refused(tmp_path):
    for key in ("api_token", "API_KEY", "service_secret", "token"):
        with pytest.raises(RejectedInput, match="environment only"):
            load_config_file(write_config(tmp_path, f"{key}: abc\n"))


def test_non_string_key_is_rejected(tmp_path):
    with pytest.raises(RejectedInput, match="keys must be text"):
        load_config_file(write_config(tmp_path, "3: 4\n"))


def test_values_are_type_checked(tmp_path):
    ok = load_config_file(write_config(
        tmp_path, "max_rounds: 9\ntau_c: 0.25\nuse_reward_fusion: false\n"
                  "endpoint: http://box:8000/v1\n"))
    assert ok == {"max_rounds": 9, "tau_c": 0.25, "use_reward_fusion": False,
                  "endpoint": "http://box:8000/v1"}

    with pytest.raises(RejectedInput, match="must be an integer"):
        load_config_file(write_config(tmp_path, "max_rounds: fast\n"))
    with pytest.raises(RejectedInput, match="must be a number"):
        load_config_file(write_config(tmp_path, "tau_c: warm\n"))
    with pytest.raises(RejectedInput, match="must be text"):
        load_config_file(write_config(tmp_path, "model_name: 7\n"))


def test_bool_is_not_accepted_where_int_expected(tmp_path):
    with pytest.raises(RejectedInput, match="must be an integer"):
        load_config_file(write_config(tmp_path, "seed: true\n"))
    with pytest.raises(RejectedInput, match="must be true or false"):
        load_config_file(write_config(tmp_path, "use_reward_fusion: 1\n"))


def test_int_is_accepted_where_float_expected(tmp_path):
    loaded = load_config_file(write_config(tmp_path, "tau_c: 1\n"))
    assert loaded == {"tau_c": 1.0}
    assert isinstance(loaded["tau_c"], float)


# ============================================================
# Precedence: overrides > file > defaults
# ============================================================

def test_engine_defaults_without_inputs():
    config = resolve_engine_config({})
    assert config == EpisodeConfig()


def test_file_values_override_defaults():
    config = resolve_engine_config({"max_rounds": 3, "total_frames": 12,
                                    "anchor_frames": 4, "tau_c": 0.2})
    assert config.max_rounds == 3
    assert config.budget.total_frames == 12
    assert config.budget.anchor_frames == 4
    assert config.tau_c == 0.2
    # untouched keys keep defaults
    assert config.memory_capacity == EpisodeConfig().memory_capacity


def test_flag_overrides_beat_file_per_key():
    file_map = {"max_rounds": 3, "seed": 7, "total_frames": 12}
    config = resolve_engine_config(file_map, {"max_rounds": 5, "anchor_frames": 2})
    assert config.max_rounds == 5          # flag wins
    assert config.seed == 7                # file survives for other keys
    assert config.budget.total_frames == 12
    assert config.budget.anchor_frames == 2


def test_none_override_does_not_mask_file_value():
    config = resolve_engine_config({"max_rounds": 3}, {"max_rounds": None})
    assert config.max_rounds == 3


def test_invalid_combination_still_validated():
    with pytest.raises(RejectedInput):
        resolve_engine_config({"total_frames": 2, "anchor_frames": 5})


def test_backend_profile_resolution():
    file_map = {"kind": "http", "endpoint": "http://a/v1", "model_name": "m",
                "retry_budget": 4}
    profile = resolve_backend_profile(file_map, {"model_name": "m2"})
    assert profile.kind == "http"
    assert profile.endpoint == "http://a/v1"
    assert profile.model_name == "m2"
    assert profile.retry_budget == 4


def test_backend_profile_defaults_to_simulated():
    assert resolve_backend_profile({}).kind == "simulated"


def test_known_keys_cover_engine_and_backend_surface():
    assert {"total_frames", "anchor_frames", "tau_c", "memory_capacity",
            "retrieval_top_k", "max_rounds", "max_total_frames", "seed",
            "use_reward_fusion", "update_queries_each_round",
            "kind", "endpoint", "model_name", "request_temperature",
            "timeout", "retry_budget"} == set(KNOWN_KEYS)
