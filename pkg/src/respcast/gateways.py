"""Clients for embedding and chat-completion services, plus offline mocks.

The HTTP clients speak the OpenAI-compatible JSON schema so one client
covers every hosted model; endpoint, model name, and auth are configured.
The mock gateways are deterministic so the whole test suite and the
``--mock`` CLI mode run offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx
import numpy as np

MOCK_DENSE_DIM = 64

# steers the embedding model toward the response being represented rather
# than the quoted thread context around it
DEFAULT_EMBED_INSTRUCTION = (
    "Represent the target social media post for retrieval, focusing on the "
    "response text rather than the quoted context."
)


class GatewayError(Exception):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """Transport-level failure that survived the retry policy."""


class RateLimitError(GatewayError):
    pass


class ConfigurationError(GatewayError):
    """Gateway response inconsistent with its configuration (e.g. dimension)."""


class MissingFixtureError(GatewayError):
    """Strict scripted mock hit a prompt fingerprint with no fixture."""


@dataclass(frozen=True)
class EmbeddingRequest:
    text: str
    instruction: str = DEFAULT_EMBED_INSTRUCTION

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("text must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.8
    seed: int | None = None
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.system_prompt, self.user_prompt)


@dataclass(frozen=True)
class ChatResult:
    text: str
    finish_reason: str = "stop"
    refused: bool = False


@dataclass
class RetryPolicy:
    attempts: int = 3
    backoff_seconds: float = 0.5

    def __post_init__(self) -> None:
        if self.attempts < 0:
            raise ValueError("retries must be >= 0")


@dataclass
class GatewayConfig:
    endpoint: str
    model: str
    auth_env_var: str | None = None
    timeout: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    rate_limit_per_second: float | None = None
    dimension: int | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def auth_token(self) -> str | None:
        if self.auth_env_var:
            return os.environ.get(self.auth_env_var)
        return None


def fingerprint(system_prompt: str, user_prompt: str) -> str:
    digest = hashlib.sha256()
    digest.update(system_prompt.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(user_prompt.encode("utf-8"))
    return digest.hexdigest()[:16]


class _TokenBucket:
    """Simple token bucket; shared by concurrent callers of one gateway."""

    def __init__(self, rate_per_second: float | None) -> None:
        self._rate = rate_per_second
        self._tokens = rate_per_second or 0.0
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self._rate is None:
            return
        with self._lock:
            while True:
                now = time.monotonic()
                self._tokens = min(self._rate, self._tokens + (now - self._last) * self._rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                time.sleep((1.0 - self._tokens) / self._rate)


class _HttpGatewayBase:
    def __init__(self, config: GatewayConfig, transport: httpx.BaseTransport | None = None) -> None:
        self.config = config
        self._bucket = _TokenBucket(config.rate_limit_per_second)
        headers = {}
        token = config.auth_token()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=config.endpoint, timeout=config.timeout, headers=headers, transport=transport
        )

    def _post(self, path: str, payload: dict) -> dict:
        policy = self.config.retry
        last_exc: Exception | None = None
        for attempt in range(policy.attempts + 1):
            self._bucket.acquire()
            try:
                response = self._client.post(path, json=payload)
                if response.status_code == 429:
                    raise RateLimitError("rate limited")
                response.raise_for_status()
                return response.json()
            except (httpx.TransportError, httpx.HTTPStatusError, RateLimitError) as exc:
                last_exc = exc
                if attempt < policy.attempts:
                    time.sleep(policy.backoff_seconds * (2**attempt))
        raise TransportError(f"request failed after {policy.attempts + 1} attempts: {last_exc}")


class HttpEmbeddingGateway(_HttpGatewayBase):
    """OpenAI-compatible /embeddings client."""

    def embed_dense(self, request: EmbeddingRequest) -> np.ndarray:
        text = request.text
        if request.instruction:
            text = f"{request.instruction}\n\n{text}"
        data = self._post("/embeddings", {"model": self.config.model, "input": [text]})
        vector = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        if self.config.dimension is not None and vector.shape[0] != self.config.dimension:
            raise ConfigurationError(
                f"expected dimension {self.config.dimension}, got {vector.shape[0]}"
            )
        return vector


class HttpChatGateway(_HttpGatewayBase):
    """OpenAI-compatible /chat/completions client."""

    def chat_complete(self, request: ChatRequest) -> ChatResult:
        payload: dict = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        data = self._post("/chat/completions", payload)
        choice = data["choices"][0]
        text = choice["message"]["content"] or ""
        finish = choice.get("finish_reason", "stop")
        return ChatResult(text=text, finish_reason=finish, refused=not text)


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text.lower())


class MockEmbeddingGateway:
    """Deterministic offline embedding gateway.

    Profiles:
      * ``bow`` (default): hashed-token bag-of-words projected to 64 dims
        and L2-normalized; preserves coarse lexical similarity, so
        retrieval tests stay meaningful offline.
      * ``random``: text hashed to a seed, pseudo-random unit vector;
        no similarity structure at all.
    """

    def __init__(self, profile: str = "bow", dimension: int = MOCK_DENSE_DIM) -> None:
        if profile not in ("bow", "random"):
            raise ValueError(f"unknown mock profile {profile!r}")
        self.profile = profile
        self.dimension = dimension
        self.log: list[EmbeddingRequest] = []

    def embed_dense(self, request: EmbeddingRequest) -> np.ndarray:
        self.log.append(request)
        if self.profile == "random":
            seed = int.from_bytes(
                hashlib.sha256(request.text.encode("utf-8")).digest()[:8], "big"
            )
            rng = np.random.default_rng(seed)
            vector = rng.standard_normal(self.dimension)
        else:
            vector = np.zeros(self.dimension)
            for token in _tokenize(f"{request.instruction} {request.text}"):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                index = int.from_bytes(digest[:4], "big") % self.dimension
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                vector[index] += sign
        norm = np.linalg.norm(vector)
        if norm == 0:
            vector[0] = 1.0
            norm = 1.0
        return vector / norm


class MockChatGateway:
    """Scripted chat gateway replaying fixtures keyed by prompt fingerprint.

    Modes:
      * ``scripted``: look up ``fixtures[fingerprint]``; in strict mode a
        miss raises :class:`MissingFixtureError`, otherwise falls back to
        the default completion.
      * ``echo``: return a deterministic digest of the request, embedding
        the seed so tests can verify it was plumbed through.
    """

    def __init__(
        self,
        fixtures: dict[str, str] | None = None,
        mode: str = "scripted",
        strict: bool = False,
        default: str = "",
        fail_first: int = 0,
    ) -> None:
        if mode not in ("scripted", "echo"):
            raise ValueError(f"unknown mock mode {mode!r}")
        self.fixtures = dict(fixtures or {})
        self.mode = mode
        self.strict = strict
        self.default = default
        self.fail_first = fail_first
        self.calls = 0
        self.log: list[ChatRequest] = []

    @classmethod
    def from_fixture_file(cls, path: str, **kwargs) -> "MockChatGateway":
        with open(path, encoding="utf-8") as fh:
            return cls(fixtures=json.load(fh), **kwargs)

    def chat_complete(self, request: ChatRequest) -> ChatResult:
        self.calls += 1
        if self.fail_first >= self.calls:
            raise TransportError("injected failure")
        self.log.append(request)
        if self.mode == "echo":
            seed_part = f" seed={request.seed}" if request.seed is not None else ""
            return ChatResult(text=f"echo[{request.fingerprint}]{seed_part}")
        fp = request.fingerprint
        if fp in self.fixtures:
            return ChatResult(text=self.fixtures[fp])
        if self.strict:
            raise MissingFixtureError(fp)
        return ChatResult(text=self.default, refused=not self.default)


_EMOTIONS = (
    "joy",
    "trust",
    "fear",
    "surprise",
    "sadness",
    "disgust",
    "anger",
    "anticipation",
)


class OfflineChatGateway:
    """Heuristic deterministic responder covering every prompt kind the
    pipeline issues, so end-to-end runs need no network at all.

    Dispatch is by instruction phrases that the engine's prompts carry; the
    completion for a given request is a pure function of the request.
    """

    def __init__(self, handlers: dict[str, Callable[[ChatRequest], str]] | None = None) -> None:
        self.log: list[ChatRequest] = []
        self.handlers = handlers or {}

    def chat_complete(self, request: ChatRequest) -> ChatResult:
        self.log.append(request)
        combined = request.system_prompt + "\n" + request.user_prompt
        for marker, handler in self.handlers.items():
            if marker in combined:
                return ChatResult(text=handler(request))
        if "YES or NO" in combined:
            return ChatResult(text=self._judge(request))
        if "JSON array" in combined and '"head"' in combined:
            return ChatResult(text="[]")
        if "scale from 1 to 10" in combined:
            return ChatResult(text="7")
        if "comma-separated" in combined and "emotions" in combined:
            digest = hashlib.sha256(request.user_prompt.encode("utf-8")).digest()
            return ChatResult(text=_EMOTIONS[digest[0] % len(_EMOTIONS)])
        return ChatResult(text=self._generate(request))

    @staticmethod
    def _judge(request: ChatRequest) -> str:
        # one YES per listed candidate line
        lines = [ln for ln in request.user_prompt.splitlines() if re.match(r"^\d+\.", ln)]
        return "\n".join(f"{i + 1}. YES" for i in range(len(lines))) if lines else "YES"

    @staticmethod
    def _generate(request: ChatRequest) -> str:
        digest = hashlib.sha256(
            (request.user_prompt + str(request.seed)).encode("utf-8")
        ).hexdigest()[:10]
        return f"Honestly, this is exactly what our community expected. ({digest})"
