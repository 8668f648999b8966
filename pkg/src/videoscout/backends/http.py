"""Live HTTP backends speaking an OpenAI-compatible wire format.

Two endpoints are used: POST {endpoint}/chat/completions for the extractor,
reward, and policy models (text plus data-URL image parts), and POST
{endpoint}/embeddings for the retrieval adapter.  The auth token is read
from an environment variable only; it never appears in configuration files.

Retry behavior: transport failures, non-2xx statuses, and malformed
response envelopes are retried up to the profile's retry budget with a
deterministic exponential backoff (0.5 s, 1 s, ...).  The sleeper is
injectable so contract tests run without real delays.
"""
from __future__ import annotations

import os
import time
from typing import Callable, Optional, Sequence

import httpx

from ..core import Timestamp
from ..errors import BackendError, ContractViolation
from .base import (BackendProfile, PolicyRequest, RewardRequest,
                   RewardResponse, hits_from_similarity)
from .manifests import EmbeddingIndex, FrameStore, unit_normalize
from .parsing import parse_query_payload, parse_reward_payload
from . import prompts

TOKEN_ENV_VAR = "VIDEOSCOUT_API_TOKEN"


def _backoff_delay(attempt: int) -> float:
    return 0.5 * (2 ** attempt)


class _BaseClient:
    def __init__(self, profile: BackendProfile,
                 transport: Optional[httpx.BaseTransport] = None,
                 sleeper: Optional[Callable[[float], None]] = None,
                 token_env: str = TOKEN_ENV_VAR):
        if profile.kind != "http":
            raise BackendError("HTTP client requires an http backend profile")
        headers = {}
        token = os.environ.get(token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self.profile = profile
        self._sleep = sleeper if sleeper is not None else time.sleep
        self._client = httpx.Client(base_url=profile.endpoint, timeout=profile.timeout,
                                    headers=headers, transport=transport)

    def _post_json(self, path: str, payload: dict, extract: Callable[[dict], object]) -> object:
        attempts = self.profile.retry_budget + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt > 0:
                self._sleep(_backoff_delay(attempt - 1))
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport: {exc}"
                continue
            if response.status_code // 100 != 2:
                last_error = f"status {response.status_code}"
                continue
            try:
                return extract(response.json())
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                last_error = f"malformed envelope: {exc}"
                continue
        raise BackendError(f"{path} failed after {attempts} attempts ({last_error})",
                           retries=self.profile.retry_budget)

    def close(self):
        self._client.close()


class ChatClient(_BaseClient):
    def complete(self, content: object) -> str:
        """One user turn; content is a string or a list of typed parts."""
        payload = {
            "model": self.profile.model_name,
            "temperature": self.profile.request_temperature,
            "messages": [{"role": "user", "content": content}],
        }
        text = self._post_json("/chat/completions", payload,
                               lambda doc: doc["choices"][0]["message"]["content"])
        if not isinstance(text, str):
            raise BackendError("completion content is not text",
                               retries=self.profile.retry_budget)
        return text


class EmbeddingsClient(_BaseClient):
    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        payload = {"model": self.profile.model_name, "input": list(texts)}

        def extract(doc: dict) -> list[list[float]]:
            data = sorted(doc["data"], key=lambda d: d["index"])
            vectors = [d["embedding"] for d in data]
            if len(vectors) != len(texts):
                raise ValueError("embedding count mismatch")
            return vectors

        return self._post_json("/embeddings", payload, extract)


def _image_parts(frame_store: Optional[FrameStore],
                 times: Sequence[Timestamp]) -> list[dict]:
    if frame_store is None:
        return []
    return [{"type": "image_url", "image_url": {"url": frame_store.image_payload(t)}}
            for t in times]


def _content_with_images(prompt: str, frame_store: Optional[FrameStore],
                         times: Sequence[Timestamp]) -> object:
    parts = _image_parts(frame_store, times)
    if not parts:
        return prompt
    return [{"type": "text", "text": prompt}] + parts


class HttpQueryExtractor:
    """Query generation and update through the chat endpoint.

    Malformed payloads are retried, then degrade: generation returns an
    empty list (the episode proceeds anchor-free), update raises a backend
    error that the anchor layer converts into a warning.
    """

    def __init__(self, chat: ChatClient):
        self._chat = chat

    def _parse_attempts(self, prompt: str, on_exhausted: str) -> list[str]:
        attempts = self._chat.profile.retry_budget + 1
        for attempt in range(attempts):
            text = self._chat.complete(prompt)
            try:
                return parse_query_payload(text)
            except ContractViolation:
                continue
        if on_exhausted == "degrade":
            return []
        raise BackendError(f"query payload malformed after {attempts} attempts",
                           retries=self._chat.profile.retry_budget)

    def generate_queries(self, question: str, options: Sequence[str]) -> list[str]:
        prompt = prompts.render_query_generation(question=question, options=options)
        return self._parse_attempts(prompt, on_exhausted="degrade")

    def update_queries(self, question: str, options: Sequence[str],
                       observed_frames: Sequence[Timestamp],
                       history_lines: Sequence[str]) -> list[str]:
        prompt = prompts.render_query_update(
            frame_times=observed_frames, question=question, options=options,
            history_queries=history_lines)
        return self._parse_attempts(prompt, on_exhausted="raise")


class HttpClipRetriever:
    """Embeds the query remotely, scores it against the local per-frame
    embedding manifest, and windows the top peaks into clips."""

    def __init__(self, embeddings: EmbeddingsClient, index: EmbeddingIndex,
                 clip_window: float = 8.0):
        self._embeddings = embeddings
        self._index = index
        self._window = clip_window

    def retrieve(self, query_text: str, top_k: int):
        vector = unit_normalize(self._embeddings.embed([query_text])[0])
        cosines = self._index.matrix @ vector
        # cosine in [-1,1] -> similarity in [0,1], commensurate with rewards
        similarities = [min(max((c + 1.0) / 2.0, 0.0), 1.0) for c in cosines]
        return hits_from_similarity(self._index.times, similarities, top_k,
                                    self._window, self._index.duration)


class HttpSegmentRewardModel:
    def __init__(self, chat: ChatClient, frame_store: Optional[FrameStore] = None):
        self._chat = chat
        self._frame_store = frame_store

    def evaluate(self, request: RewardRequest) -> RewardResponse:
        prompt = prompts.render_reward_request(request)
        content = _content_with_images(prompt, self._frame_store, request.frames)
        attempts = self._chat.profile.retry_budget + 1
        for attempt in range(attempts):
            text = self._chat.complete(content)
            try:
                scores, _problems = parse_reward_payload(
                    text, range(len(request.segments)))
            except ContractViolation:
                continue
            if scores:
                # partial results are legitimate: the engine owns the
                # retry/default decision for missing labels
                return RewardResponse(scores=scores, retries=attempt)
        raise BackendError(f"reward payload malformed after {attempts} attempts",
                           retries=self._chat.profile.retry_budget)


class HttpPolicyModel:
    def __init__(self, chat: ChatClient, frame_store: Optional[FrameStore] = None):
        self._chat = chat
        self._frame_store = frame_store

    def decide(self, request: PolicyRequest) -> str:
        prompt = prompts.render_policy_request(request)
        content = _content_with_images(prompt, self._frame_store, request.memory_times)
        return self._chat.complete(content)
