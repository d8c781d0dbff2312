"""Completion agents: live HTTP endpoint, record/replay cache, oracle and faulty.

Every agent exposes ``complete(request) -> str``. The HTTP agent speaks the
OpenAI-compatible chat-completions wire format; the cache is a JSON-lines
file keyed by a digest of the request.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol

import httpx

from gsce.corpus import CorpusFile, Maneuver, oracle_program, render_query

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "GSCE_API_KEY"
FAULTS = ("flip_z_sign", "ignore_body_frame", "emit_prose")


class LLMError(RuntimeError):
    """The agent could not produce a response."""


class CacheCollisionError(RuntimeError):
    """Two different requests hashed to the same cache key."""


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 2048
    repeat_index: int = 0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.repeat_index < 0:
            raise ValueError("repeat_index must be >= 0")


def _canonical(request: ChatRequest) -> str:
    return json.dumps(asdict(request), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def cache_key(request: ChatRequest) -> str:
    """Stable hex digest of every request field, independent of field order."""
    return hashlib.sha256(_canonical(request).encode("utf-8")).hexdigest()


class Agent(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


def complete(agent: Agent, request: ChatRequest) -> str:
    return agent.complete(request)


# -- cache ------------------------------------------------------------------


@dataclass(frozen=True)
class CacheRecord:
    request_hash: str
    response_text: str
    model: str
    timestamp: str
    request: dict


class ResponseCache:
    """Append-only JSON-lines store of responses.

    ``path`` may be a file or a directory; a directory holds ``responses.jsonl``.
    """

    FILENAME = "responses.jsonl"

    def __init__(self, path: str | Path):
        path = Path(path)
        if path.is_dir() or not path.suffix:
            path = path / self.FILENAME
        self.path = path
        self._lock = threading.Lock()
        self._records: dict[str, CacheRecord] = {}
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        rec = CacheRecord(**json.loads(line))
                    except (json.JSONDecodeError, TypeError) as exc:
                        raise ValueError(f"{path}:{lineno}: bad cache record: {exc}") from None
                    self._check(rec)
                    self._records[rec.request_hash] = rec

    def _check(self, rec: CacheRecord) -> None:
        old = self._records.get(rec.request_hash)
        if old is not None and old.request != rec.request:
            raise CacheCollisionError(f"cache key {rec.request_hash} maps to two different requests")

    def __len__(self) -> int:
        return len(self._records)

    def get(self, request: ChatRequest) -> str | None:
        rec = self._records.get(cache_key(request))
        if rec is None:
            return None
        if rec.request != json.loads(_canonical(request)):
            raise CacheCollisionError(f"cache key {rec.request_hash} maps to two different requests")
        return rec.response_text

    def put(self, request: ChatRequest, response_text: str) -> CacheRecord:
        rec = CacheRecord(
            request_hash=cache_key(request),
            response_text=response_text,
            model=request.model,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            request=json.loads(_canonical(request)),
        )
        with self._lock:
            self._check(rec)
            if rec.request_hash in self._records:
                return self._records[rec.request_hash]
            self._records[rec.request_hash] = rec
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(asdict(rec), ensure_ascii=False) + "\n")
        return rec


# -- agents -----------------------------------------------------------------


class ReplayAgent:
    """Serve responses from a cache.

    In strict mode a miss is an error. Otherwise a miss is forwarded to
    ``fallback`` and its answer recorded, which is how live runs are captured.
    """

    def __init__(self, cache: ResponseCache, strict: bool = True, fallback: Agent | None = None):
        self.cache = cache
        self.strict = strict
        self.fallback = fallback

    def complete(self, request: ChatRequest) -> str:
        hit = self.cache.get(request)
        if hit is not None:
            return hit
        if self.strict or self.fallback is None:
            raise LLMError(f"cache miss for request {cache_key(request)[:12]}")
        text = self.fallback.complete(request)
        self.cache.put(request, text)
        return text


def recording(agent: Agent, cache: ResponseCache) -> ReplayAgent:
    return ReplayAgent(cache, strict=False, fallback=agent)


_TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class HttpAgent:
    """OpenAI-compatible ``POST {base_url}/chat/completions`` client.

    Transient failures (connection errors, timeouts, 429 and 5xx) are retried
    with exponential backoff and jitter up to ``max_attempts`` tries in total.
    At most ``max_concurrency`` requests are in flight at once, and
    ``min_interval`` seconds separate consecutive request starts.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        max_concurrency: int = 4,
        min_interval: float = 0.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.min_interval = min_interval
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._pace_lock = threading.Lock()
        self._next_start = 0.0
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _pace(self) -> None:
        if self.min_interval <= 0:
            return
        with self._pace_lock:
            now = time.monotonic()
            wait = self._next_start - now
            self._next_start = max(now, self._next_start) + self.min_interval
        if wait > 0:
            time.sleep(wait)

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        }
        last = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            with self._slots:
                self._pace()
                try:
                    resp = self._client.post(self.url, json=payload, headers=self._headers())
                except httpx.TimeoutException:
                    last = "request timed out"
                except httpx.TransportError as exc:
                    last = f"transport error: {type(exc).__name__}"
                else:
                    if resp.status_code == 200:
                        return _parse_completion(resp)
                    last = f"HTTP {resp.status_code}"
                    if resp.status_code not in _TRANSIENT_STATUS:
                        raise LLMError(f"{last} from {self.url}")
            if attempt < self.max_attempts:
                delay = self.backoff * 2 ** (attempt - 1) * (1 + 0.1 * random.random())
                log.warning("attempt %d/%d failed (%s); retrying in %.2fs", attempt, self.max_attempts, last, delay)
                time.sleep(delay)
        raise LLMError(f"{last} after {self.max_attempts} attempts")


def _parse_completion(resp: httpx.Response) -> str:
    try:
        choice = resp.json()["choices"][0]
        content = choice["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise LLMError("malformed chat-completions response") from None
    if choice.get("finish_reason") == "length":
        raise LLMError("response truncated at max_tokens")
    if not isinstance(content, str):
        raise LLMError("response has no text content")
    return content


class _CorpusLookup:
    def __init__(self, corpus: CorpusFile):
        self._by_query: dict[str, list[Maneuver]] = {}
        for task in corpus.tasks:
            if task.maneuvers is not None:
                self._by_query.setdefault(task.query, task.maneuvers)

    def maneuvers(self, request: ChatRequest) -> list[Maneuver]:
        try:
            return self._by_query[request.user_text]
        except KeyError:
            raise LLMError("query is not a task of the oracle's corpus") from None


def _fence(code: str) -> str:
    return f"```skillscript\n{code.rstrip()}\n```"


class OracleAgent(_CorpusLookup):
    """Answers every corpus query with a correct program. Ignores the prompt."""

    def complete(self, request: ChatRequest) -> str:
        return _fence(oracle_program(self.maneuvers(request)))


class FaultyAgent(_CorpusLookup):
    """Answers with a deterministically wrong program.

    * ``flip_z_sign``: every vertical displacement has its sign flipped.
    * ``ignore_body_frame``: body-frame moves are applied as world moves.
    * ``emit_prose``: a plain-language answer with no code.
    """

    def __init__(self, corpus: CorpusFile, fault: str):
        if fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}; expected one of {', '.join(FAULTS)}")
        super().__init__(corpus)
        self.fault = fault

    def complete(self, request: ChatRequest) -> str:
        maneuvers = self.maneuvers(request)
        if self.fault == "emit_prose":
            steps = render_query(maneuvers).rstrip(".")
            return (
                "Sure! To complete this task the drone should take off first, and then "
                f"{steps[0].lower() + steps[1:]}. Let me know if you need anything else."
            )
        if self.fault == "flip_z_sign":
            return _fence(oracle_program(maneuvers, flip_z=True))
        return _fence(oracle_program(maneuvers, ignore_body_frame=True))


__all__ = [
    "Agent",
    "CacheCollisionError",
    "CacheRecord",
    "ChatRequest",
    "FaultyAgent",
    "HttpAgent",
    "LLMError",
    "OracleAgent",
    "ReplayAgent",
    "ResponseCache",
    "cache_key",
    "complete",
    "recording",
]
