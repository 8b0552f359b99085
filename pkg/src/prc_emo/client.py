"""Chat-completion and embedding clients with caching, retries, and stubs.

Two backends per service: an HTTP client speaking the common
chat-completions wire format, and a deterministic offline stub. The stub
chat backend answers recognition prompts with the first label of their
label statement; the stub embedder maps text to a hashed token-frequency
vector. Both are pure functions of their inputs, so stub pipelines are
reproducible byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError, ServiceError, TransientServiceError

log = logging.getLogger("prc_emo.client")

ENV_API_BASE = "PRC_EMO_API_BASE"
ENV_API_KEY = "PRC_EMO_API_KEY"

DEFAULT_EMBED_DIM = 256


@dataclass(frozen=True)
class ChatRequest:
    user_text: str
    model_id: str = "stub-chat"
    system_text: Optional[str] = None
    temperature: float = 0.0
    max_output_tokens: int = 512

    def __post_init__(self) -> None:
        if not self.user_text:
            raise DataError("chat request user_text must be non-empty")
        if self.temperature < 0:
            raise DataError("temperature must be >= 0")


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)
    cached: bool = False


def cache_key(req: ChatRequest) -> str:
    """Stable digest over every field that affects the response."""
    payload = json.dumps(
        [req.model_id, req.system_text, req.user_text, req.temperature, req.max_output_tokens],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only JSONL cache keyed by request digest."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[str, TokenUsage]] = {}
        if self.path.exists():
            for lineno, line in enumerate(
                self.path.read_text(encoding="utf-8").splitlines(), start=1
            ):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{self.path}:{lineno}: corrupt cache line: {exc}") from exc
                self._entries[rec["key"]] = (
                    rec["text"],
                    TokenUsage(rec.get("prompt_tokens", 0), rec.get("completion_tokens", 0)),
                )

    def get(self, key: str) -> Optional[tuple[str, TokenUsage]]:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, text: str, usage: TokenUsage) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = (text, usage)
            record = {
                "key": key,
                "text": text,
                "prompt_tokens": usage.prompt_tokens,
                "completion_tokens": usage.completion_tokens,
            }
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _with_retries(
    fn: Callable[[], object],
    *,
    max_retries: int,
    backoff_s: float,
    sleep: Callable[[float], None],
    what: str,
):
    attempt = 0
    while True:
        try:
            return fn()
        except TransientServiceError as exc:
            attempt += 1
            if attempt > max_retries:
                raise ServiceError(
                    f"{what}: giving up after {max_retries} retries: {exc}"
                ) from exc
            delay = backoff_s * (2 ** (attempt - 1))
            log.warning("%s: retry %d/%d after transient error: %s", what, attempt, max_retries, exc)
            sleep(delay)


def _digest8(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]


def _approx_tokens(text: str) -> int:
    return len(text.split())


# -- chat backends -----------------------------------------------------------


class StubChatBackend:
    """Rule-based offline responder keyed off the prompt templates.

    Recognition prompts get the first label of their label statement;
    subtopic and dialogue-generation prompts get well-formed synthetic
    output; everything else gets a short digest-tagged note.
    """

    name = "stub"

    _LABEL_LINE = "Choose exactly one label from:"
    _SUBTOPIC_MARKER = "conversation subtopics"
    _DIALOGUE_MARKER = "two-person dialogue"
    _THEMES = (
        "a schedule change", "an unexpected bill", "a shared project", "a checkup",
        "a long commute", "a family visit", "a missed call", "a new routine",
        "an old promise", "a noisy neighbor",
    )

    def complete(self, req: ChatRequest) -> tuple[str, TokenUsage]:
        text = self._respond(req.user_text)
        return text, TokenUsage(_approx_tokens(req.user_text), _approx_tokens(text))

    def _respond(self, prompt: str) -> str:
        if self._LABEL_LINE in prompt:
            return self._first_label(prompt)
        if self._SUBTOPIC_MARKER in prompt:
            return self._subtopics(prompt)
        if self._DIALOGUE_MARKER in prompt:
            return self._dialogue(prompt)
        tag = _digest8(prompt)
        if "overtly expresses" in prompt:
            return f"Stub explicit-emotion reading {tag}."
        if "does not directly express" in prompt:
            return f"Stub implicit-emotion reading {tag}."
        if "characteristic description" in prompt:
            return f"Stub speaker sketch {tag}."
        return f"Stub response {tag}."

    def _first_label(self, prompt: str) -> str:
        for line in prompt.splitlines():
            if line.startswith(self._LABEL_LINE):
                options = line[len(self._LABEL_LINE) :].split(",")
                if options and options[0].strip():
                    return options[0].strip()
        raise ServiceError("stub chat: label statement line not found")

    @staticmethod
    def _field(prompt: str, key: str) -> str:
        for line in prompt.splitlines():
            if line.startswith(key):
                return line[len(key) :].strip()
        return ""

    def _subtopics(self, prompt: str) -> str:
        match = re.search(r"List (\d+) distinct", prompt)
        count = int(match.group(1)) if match else 30
        domain = self._field(prompt, "Domain:") or "general"
        offset = len(re.findall(r"^- ", prompt, flags=re.MULTILINE))
        lines = []
        for i in range(1, count + 1):
            idx = offset + i
            theme = self._THEMES[(idx - 1) % len(self._THEMES)]
            lines.append(f"{i}. {domain} scenario {idx:03d}: talking through {theme}")
        return "\n".join(lines)

    def _dialogue(self, prompt: str) -> str:
        subtopic = self._field(prompt, "Subtopic:") or "a everyday moment"
        emphasis = [
            e.strip()
            for e in self._field(prompt, "Emphasize these emotions:").split(",")
            if e.strip()
        ] or ["neutral"]
        lines = []
        for i in range(6):
            speaker = "A" if i % 2 == 0 else "B"
            emotion = emphasis[i % len(emphasis)]
            lines.append(
                f"Speaker {speaker} [{emotion}]: Turn {i + 1} about {subtopic}; "
                f"I mostly feel {emotion} about it."
            )
        return "\n".join(lines)


class HttpChatBackend:
    """Chat-completions-style HTTP backend (POST {base}/chat/completions)."""

    name = "http"

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        session=None,
        timeout: float = 60.0,
    ):
        self.base_url = (base_url or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        if not self.base_url:
            raise ServiceError(f"no chat endpoint configured (set {ENV_API_BASE})")
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self.timeout = timeout

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, req: ChatRequest) -> tuple[str, TokenUsage]:
        messages = []
        if req.system_text:
            messages.append({"role": "system", "content": req.system_text})
        messages.append({"role": "user", "content": req.user_text})
        payload = {
            "model": req.model_id,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        body = _post_json(
            self.session,
            f"{self.base_url}/chat/completions",
            payload,
            self._headers(),
            self.timeout,
        )
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ServiceError(f"malformed chat response body: {exc}") from exc
        if not isinstance(text, str):
            raise ServiceError("chat response content is not a string")
        usage = body.get("usage") or {}
        return text, TokenUsage(
            int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))
        )


def _post_json(session, url: str, payload: dict, headers: dict, timeout: float) -> dict:
    import requests

    try:
        resp = session.post(url, json=payload, headers=headers, timeout=timeout)
    except (requests.ConnectionError, requests.Timeout) as exc:
        raise TransientServiceError(f"network failure calling {url}: {exc}") from exc
    if resp.status_code in (401, 403):
        raise ServiceError(f"authentication failed against {url} ({resp.status_code})")
    if resp.status_code == 429 or resp.status_code >= 500:
        raise TransientServiceError(f"{url} returned {resp.status_code}")
    if resp.status_code != 200:
        raise ServiceError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
    try:
        body = resp.json()
    except ValueError as exc:
        raise ServiceError(f"non-JSON response from {url}") from exc
    if not isinstance(body, dict):
        raise ServiceError(f"unexpected response shape from {url}")
    return body


class ChatClient:
    """Cache + retry + concurrency wrapper around a chat backend.

    Shareable across threads; at most ``max_concurrency`` requests are in
    flight, and a cache hit bypasses the backend entirely.
    """

    def __init__(
        self,
        backend,
        cache: Optional[ResponseCache] = None,
        *,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        max_concurrency: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.cache = cache
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(max_concurrency)

    def chat(self, req: ChatRequest) -> ChatResponse:
        key = cache_key(req)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return ChatResponse(text=hit[0], usage=hit[1], cached=True)
        with self._gate:
            text, usage = _with_retries(
                lambda: self.backend.complete(req),
                max_retries=self.max_retries,
                backoff_s=self.backoff_s,
                sleep=self._sleep,
                what=f"chat({req.model_id})",
            )
        if self.cache is not None:
            self.cache.put(key, text, usage)
        return ChatResponse(text=text, usage=usage, cached=False)


# -- embedders ---------------------------------------------------------------


class StubEmbedder:
    """Hashed token-frequency projection to a fixed dimension.

    Pure function of the text: tokens are counted into hash buckets with a
    hash-derived sign. Identical strings always produce identical vectors.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM):
        if dim < 2:
            raise DataError("embedding dimension must be >= 2")
        self.dim = dim
        self.embedder_id = f"stub-hash-{dim}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise DataError("embed() requires at least one text")
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = re.findall(r"[\w']+", text.lower()) or [text]
            for token in tokens:
                digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
                idx = int.from_bytes(digest[:4], "big") % self.dim
                out[row, idx] += 1.0 if digest[4] & 1 else -1.0
            if not out[row].any():
                # signed buckets can cancel; fall back to hashing the raw text
                digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
                out[row, int.from_bytes(digest[:4], "big") % self.dim] = 1.0
        return out


class HttpEmbedder:
    """HTTP embedding backend (POST {base}/embeddings with {"input": [...]})."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: str = "default-embed",
        session=None,
        timeout: float = 60.0,
        *,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = (base_url or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        if not self.base_url:
            raise ServiceError(f"no embedding endpoint configured (set {ENV_API_BASE})")
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._sleep = sleep
        self.embedder_id = f"http:{model}"
        self._dim: Optional[int] = None

    @property
    def dim(self) -> int:
        if self._dim is None:
            self.embed(["dimension probe"])
        assert self._dim is not None
        return self._dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise DataError("embed() requires at least one text")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "input": list(texts)}
        body = _with_retries(
            lambda: _post_json(
                self.session, f"{self.base_url}/embeddings", payload, headers, self.timeout
            ),
            max_retries=self.max_retries,
            backoff_s=self.backoff_s,
            sleep=self._sleep,
            what="embed",
        )
        try:
            rows = [item["embedding"] for item in body["data"]]
        except (KeyError, TypeError) as exc:
            raise ServiceError(f"malformed embedding response body: {exc}") from exc
        if len(rows) != len(texts):
            raise ServiceError(
                f"embedding service returned {len(rows)} vectors for {len(texts)} inputs"
            )
        matrix = np.asarray(rows, dtype=np.float64)
        if matrix.ndim != 2:
            raise ServiceError("embedding vectors have inconsistent dimensions")
        if self._dim is None:
            self._dim = int(matrix.shape[1])
        elif matrix.shape[1] != self._dim:
            raise ServiceError(
                f"embedding dimension drifted from {self._dim} to {matrix.shape[1]}"
            )
        return matrix
