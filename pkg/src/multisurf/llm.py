"""Model backend contract: request digests, replay cache, live HTTP client, response parsing."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import re
import string
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from .errors import (
    CacheMiss,
    ConfigError,
    CorruptCacheLine,
    EndpointError,
    MissingCredential,
    ProfileParse,
    Timeout,
)
from .prompt import RenderedPrompt

log = logging.getLogger(__name__)

API_KEY_ENV = "MULTISURF_API_KEY"
DEFAULT_MODEL_ID = "gpt-4o"
CANONICAL_VERSION = 1


@dataclass(frozen=True)
class ModelRequest:
    model_id: str
    prompt: RenderedPrompt
    temperature: float = 0.0
    max_output_tokens: int = 256

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    backend: str  # "live" | "replay"
    latency: float  # seconds
    request_digest: str


def canonical_form(request: ModelRequest) -> str:
    """Canonical JSON text of a request; attachment payloads enter only by SHA-256."""
    doc = {
        "v": CANONICAL_VERSION,
        "model_id": request.model_id,
        "temperature": float(request.temperature),
        "max_output_tokens": int(request.max_output_tokens),
        "text": request.prompt.text,
        "attachments": [
            [a.role, a.label_hint, hashlib.sha256(a.bytes).hexdigest()]
            for a in request.prompt.attachments
        ],
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


def cache_key(request: ModelRequest) -> str:
    return hashlib.sha256(canonical_form(request).encode("utf-8")).hexdigest()


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


# -- replay cache ---------------------------------------------------------------

@dataclass(frozen=True)
class CacheEntry:
    digest: str
    model_id: str
    text: str
    recorded_at: str
    canonical: str | None = None

    def to_json(self) -> str:
        obj = {
            "digest": self.digest,
            "model_id": self.model_id,
            "text": self.text,
            "recorded_at": self.recorded_at,
        }
        if self.canonical is not None:
            obj["canonical"] = self.canonical
        return json.dumps(obj, ensure_ascii=False, sort_keys=True)


_HEX64 = re.compile(r"^[0-9a-f]{64}$")


def _entry_from_line(line: str, lineno: int) -> CacheEntry:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptCacheLine(lineno, str(exc)) from exc
    if not isinstance(obj, dict):
        raise CorruptCacheLine(lineno, "not a JSON object")
    try:
        digest, model_id, text, recorded_at = (
            obj["digest"], obj["model_id"], obj["text"], obj["recorded_at"]
        )
    except KeyError as exc:
        raise CorruptCacheLine(lineno, f"missing field {exc}") from exc
    if not isinstance(digest, str) or not _HEX64.match(digest):
        raise CorruptCacheLine(lineno, "digest is not 64 lowercase hex characters")
    if not all(isinstance(v, str) for v in (model_id, text, recorded_at)):
        raise CorruptCacheLine(lineno, "model_id, text and recorded_at must be strings")
    return CacheEntry(digest, model_id, text, recorded_at, obj.get("canonical"))


class ReplayCache:
    """Recorded responses keyed by request digest, persisted as JSON lines.

    Reads are lock-free; appends are serialized by a lock and written
    through to ``path`` (when set) one line at a time. The first entry for a
    digest wins if a file holds duplicates.
    """

    def __init__(self, path: Path | str | None = None, entries: Iterable[CacheEntry] = ()):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        for e in entries:
            self._entries.setdefault(e.digest, e)

    @classmethod
    def load(cls, path, missing_ok: bool = False) -> "ReplayCache":
        path = Path(path)
        if not path.exists():
            if missing_ok:
                return cls(path)
            raise ConfigError(f"replay cache {path} does not exist")
        entries = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                entries.append(_entry_from_line(line, lineno))
        return cls(path, entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, digest: str) -> bool:
        return digest in self._entries

    def __iter__(self):
        return iter(list(self._entries.values()))

    def get(self, digest: str) -> CacheEntry | None:
        return self._entries.get(digest)

    def record(self, request: ModelRequest, text: str, recorded_at: str | None = None) -> CacheEntry:
        digest = cache_key(request)
        entry = CacheEntry(
            digest, request.model_id, text, recorded_at or _now_rfc3339(), canonical_form(request)
        )
        with self._lock:
            if digest in self._entries:
                return self._entries[digest]
            self._entries[digest] = entry
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(entry.to_json() + "\n")
        return entry

    def verify(self) -> list[str]:
        """Digests whose stored canonical form no longer hashes to the digest."""
        bad = []
        for e in self._entries.values():
            if e.canonical is None:
                continue
            if hashlib.sha256(e.canonical.encode("utf-8")).hexdigest() != e.digest:
                bad.append(e.digest)
        return bad

    def prune(self, model_id: str) -> int:
        """Drop every entry recorded for ``model_id`` and rewrite the file."""
        with self._lock:
            keep = {d: e for d, e in self._entries.items() if e.model_id != model_id}
            removed = len(self._entries) - len(keep)
            self._entries = keep
            if self.path is not None:
                self.save()
        return removed

    def save(self, path=None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ConfigError("cache has no path")
        body = "".join(e.to_json() + "\n" for e in self._entries.values())
        target.write_text(body, encoding="utf-8")


# -- backends -----------------------------------------------------------------

@dataclass
class BackendConfig:
    """How requests reach a model.

    ``mode`` is ``replay`` (cache only, never touches the network), ``live``
    (HTTP only) or ``record`` (serve cache hits, otherwise call the endpoint
    and append the answer to the cache).
    """

    mode: str = "replay"
    model_id: str = DEFAULT_MODEL_ID
    endpoint_url: str | None = None
    cache_path: Path | None = None
    max_in_flight: int = 4
    requests_per_second: float | None = None
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    temperature: float = 0.0
    max_output_tokens: int = 256

    def __post_init__(self):
        if self.mode not in ("live", "replay", "record"):
            raise ConfigError(f"unknown backend mode {self.mode!r}")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.cache_path is not None:
            self.cache_path = Path(self.cache_path)


class TokenBucket:
    def __init__(self, rate: float, capacity: float | None = None,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.rate = float(rate)
        self.capacity = float(capacity if capacity is not None else max(1.0, rate))
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class Backend:
    kind = "abstract"
    model_id = DEFAULT_MODEL_ID
    max_in_flight = 1
    temperature = 0.0
    max_output_tokens = 256

    def make_request(self, prompt: RenderedPrompt) -> ModelRequest:
        return ModelRequest(self.model_id, prompt, self.temperature, self.max_output_tokens)

    def send(self, request: ModelRequest) -> ModelResponse:  # pragma: no cover - interface
        raise NotImplementedError

    def close(self) -> None:
        pass


class ReplayBackend(Backend):
    kind = "replay"

    def __init__(self, cache: ReplayCache, model_id: str = DEFAULT_MODEL_ID,
                 temperature: float = 0.0, max_output_tokens: int = 256, max_in_flight: int = 4):
        self.cache = cache
        self.model_id = model_id
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.max_in_flight = max_in_flight

    def send(self, request: ModelRequest) -> ModelResponse:
        start = time.perf_counter()
        digest = cache_key(request)
        entry = self.cache.get(digest)
        if entry is None:
            raise CacheMiss(digest)
        return ModelResponse(entry.text, "replay", time.perf_counter() - start, digest)


_MAGIC = (
    (b"\x89PNG\r\n\x1a\n", "image/png"),
    (b"\xff\xd8\xff", "image/jpeg"),
    (b"%PDF", "application/pdf"),
)


def _media_type(role: str, payload: bytes) -> str:
    for magic, mime in _MAGIC:
        if payload.startswith(magic):
            return mime
    if role == "csv":
        return "text/csv"
    if role == "document":
        return "text/plain"
    return "application/octet-stream"


def build_payload(request: ModelRequest) -> dict:
    """Chat-completion JSON body: one user message of ordered text, image and file parts."""
    parts: list[dict] = [{"type": "text", "text": request.prompt.text}]
    for i, att in enumerate(request.prompt.attachments):
        mime = _media_type(att.role, att.bytes)
        data_url = f"data:{mime};base64," + base64.b64encode(att.bytes).decode("ascii")
        if att.role == "exemplar":
            parts.append({"type": "text", "text": f"Example of {att.label_hint}:"})
        if mime.startswith("image/"):
            parts.append({"type": "image_url", "image_url": {"url": data_url}})
        else:
            ext = {"text/csv": "csv", "application/pdf": "pdf"}.get(mime, "txt")
            parts.append({"type": "file", "file": {"filename": f"{att.role}{i}.{ext}", "file_data": data_url}})
    return {
        "model": request.model_id,
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
        "messages": [{"role": "user", "content": parts}],
    }


def _response_text(body: dict) -> str:
    content = body["choices"][0]["message"]["content"]
    if isinstance(content, list):
        return "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise TypeError("message content is neither text nor a part list")
    return content


class LiveBackend(Backend):
    """HTTP chat-completion client with bounded retries, in-flight cap and rate limit."""

    kind = "live"

    def __init__(self, config: BackendConfig, cache: ReplayCache | None = None,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        api_key = os.environ.get(API_KEY_ENV, "").strip()
        if not api_key:
            raise MissingCredential(f"environment variable {API_KEY_ENV} is not set")
        if not config.endpoint_url:
            raise ConfigError("live backend needs an endpoint URL")
        self.config = config
        self.model_id = config.model_id
        self.temperature = config.temperature
        self.max_output_tokens = config.max_output_tokens
        self.max_in_flight = config.max_in_flight
        self.cache = cache
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(config.max_in_flight)
        self._bucket = TokenBucket(config.requests_per_second, sleep=sleep) if config.requests_per_second else None
        self._client = httpx.Client(
            transport=transport,
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    def close(self) -> None:
        self._client.close()

    def send(self, request: ModelRequest) -> ModelResponse:
        digest = cache_key(request)
        if self.cache is not None:
            entry = self.cache.get(digest)
            if entry is not None:
                return ModelResponse(entry.text, "replay", 0.0, digest)
        start = time.perf_counter()
        with self._gate:
            text = self._post_with_retries(build_payload(request))
        latency = time.perf_counter() - start
        if self.cache is not None:
            self.cache.record(request, text)
        return ModelResponse(text, "live", latency, digest)

    def _post_with_retries(self, payload: dict) -> str:
        last: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                resp = self._client.post(self.config.endpoint_url, json=payload)
            except httpx.TimeoutException as exc:
                last = Timeout(f"request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last = EndpointError(None, str(exc))
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = EndpointError(resp.status_code, resp.text)
                log.warning("transient status %s (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise EndpointError(resp.status_code, resp.text)
            try:
                return _response_text(resp.json())
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise EndpointError(resp.status_code, f"malformed response: {resp.text}") from exc
        assert last is not None
        raise last


def open_backend(config: BackendConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep) -> Backend:
    if config.mode == "replay":
        if config.cache_path is None:
            raise ConfigError("replay mode needs a cache path")
        return ReplayBackend(ReplayCache.load(config.cache_path), config.model_id,
                             config.temperature, config.max_output_tokens, config.max_in_flight)
    cache = None
    if config.mode == "record":
        if config.cache_path is None:
            raise ConfigError("record mode needs a cache path")
        cache = ReplayCache.load(config.cache_path, missing_ok=True)
    return LiveBackend(config, cache=cache, transport=transport, sleep=sleep)


def send(request: ModelRequest, backend: Backend | BackendConfig) -> ModelResponse:
    if isinstance(backend, BackendConfig):
        b = open_backend(backend)
        try:
            return b.send(request)
        finally:
            b.close()
    return backend.send(request)


# -- response parsing ---------------------------------------------------------

_TRIM = string.whitespace + string.punctuation + "“”‘’«»…。"


@dataclass(frozen=True)
class ParsedLabel:
    outcome: str  # "exact" | "salvaged" | "off_class"
    label: str | None
    raw_text: str

    @property
    def compliant(self) -> bool:
        return self.outcome == "exact"


def parse_class_label(response_text: str, class_labels: Sequence[str]) -> ParsedLabel:
    """Map a model answer onto one of ``class_labels``.

    Exact (after trimming whitespace/punctuation and case-folding) wins;
    otherwise a unique label occurring as a substring is salvaged; anything
    else is off-class.
    """
    if not class_labels:
        raise ValueError("class_labels must be non-empty")
    loose = response_text.strip().casefold()
    for label in class_labels:
        if label.strip().casefold() == loose:
            return ParsedLabel("exact", label, response_text)
    trimmed = response_text.strip(_TRIM).casefold()
    for label in class_labels:
        if label.strip(_TRIM).casefold() == trimmed:
            return ParsedLabel("exact", label, response_text)

    hits = []
    for label in class_labels:
        key = label.strip(_TRIM).casefold()
        if key and key in loose:
            hits.append(label)
    if len(hits) == 1:
        return ParsedLabel("salvaged", hits[0], response_text)
    return ParsedLabel("off_class", None, response_text)


@dataclass(frozen=True)
class ProfileText:
    equipment: str
    method_sentence: str
    usage_sentence: str
    fallback: bool
    raw_text: str = field(repr=False)


_LABELED = re.compile(
    r"^[\s\-*#>\d.)]*\**\s*(equipment|method|(?:origin(?:al)?\s+)?usage)\s*\**\s*[:：]\s*\**\s*(.*?)\s*$",
    re.IGNORECASE | re.MULTILINE,
)
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def parse_profile_text(response_text: str) -> ProfileText:
    found: dict[str, str] = {}
    for m in _LABELED.finditer(response_text):
        key = m.group(1).lower()
        key = "usage" if key.endswith("usage") else key
        value = m.group(2).strip()
        if value and key not in found:
            found[key] = value
    if len(found) == 3:
        return ProfileText(found["equipment"], found["method"], found["usage"], False, response_text)

    sentences = [s.strip() for s in _SENTENCE_END.split(response_text.strip()) if s.strip()]
    if len(sentences) < 3:
        raise ProfileParse(response_text)
    return ProfileText(sentences[0], sentences[1], " ".join(sentences[2:]), True, response_text)
