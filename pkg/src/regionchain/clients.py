"""Model and OCR clients.

Two model clients implement the same ``complete(request) -> str`` contract:

* :class:`ScriptedModelClient` replays responses from a fixture file and is
  what tests and offline runs use.
* :class:`HttpModelClient` posts chat-style requests to an inference server,
  with retries and a fair cap on in-flight requests.

Wire format of the HTTP route ``POST {endpoint}/completions``::

    request  {"messages": [{"role": "user",
                            "parts": [{"image_ref": "..."}, ..., {"text": "..."}]}],
              "temperature": 0.0,
              "max_output_chars": 2048}
    response {"text": "..."}

Image parts precede the text part; cropped regions are separate image parts
whose ref carries a ``#crop=x1,y1,x2,y2`` suffix (see :func:`crop_ref`).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import requests

from .core import BBox, OcrPage
from .errors import ClientError, ConstructionError, FixtureMissError, UsageError
from .records import iter_lines

log = logging.getLogger(__name__)

AUTH_TOKEN_ENV = "REGIONCHAIN_AUTH_TOKEN"
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ModelRequest:
    prompt: str
    image_refs: tuple[str, ...] = ()
    temperature: float = 0.0
    max_output_chars: int = 2048

    def __post_init__(self) -> None:
        if not self.prompt or not self.prompt.strip():
            raise UsageError("model request prompt must be non-empty")
        if self.temperature < 0:
            raise UsageError("temperature must be >= 0")
        object.__setattr__(self, "image_refs", tuple(self.image_refs))

    @property
    def digest(self) -> str:
        return request_digest(self.prompt, self.image_refs)


def request_digest(prompt: str, image_refs: Sequence[str] = ()) -> str:
    payload = json.dumps([prompt, list(image_refs)], ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def crop_ref(image_path: str, box: BBox) -> str:
    return f"{image_path}#crop={box.x1},{box.y1},{box.x2},{box.y2}"


class ModelClient(Protocol):
    def complete(self, req: ModelRequest) -> str: ...


class OcrClient(Protocol):
    def ocr(self, image_ref: str) -> OcrPage: ...


# --------------------------------------------------------------------------
# Scripted (fixture) clients
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FixtureRule:
    key_kind: str
    key: tuple[str, ...]
    response: str

    def matches(self, req: ModelRequest) -> bool:
        if self.key_kind == "digest":
            return self.key[0] == req.digest
        return all(k in req.prompt for k in self.key)


class ScriptedModelClient:
    """Replays fixture responses.

    Fixture lines are ``{"key_kind": "digest"|"substring", "key": ..., "response": ...}``.
    A ``substring`` key may be a string or a list of strings that must all
    occur in the prompt. Digest rules win over substring rules; among
    substring rules the first in file order wins.
    """

    def __init__(self, rules: Iterable[FixtureRule]):
        self._digests: dict[str, str] = {}
        self._substrings: list[FixtureRule] = []
        for rule in rules:
            if rule.key_kind == "digest":
                self._digests.setdefault(rule.key[0], rule.response)
            elif rule.key_kind == "substring":
                self._substrings.append(rule)
            else:
                raise ConstructionError(f"unknown fixture key_kind {rule.key_kind!r}")
        self.calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> ScriptedModelClient:
        rules = []
        for rec in records:
            key = rec.get("key")
            keys = (key,) if isinstance(key, str) else tuple(key or ())
            if not keys or not all(isinstance(k, str) and k for k in keys):
                raise ConstructionError(f"fixture rule needs a non-empty key: {rec!r}")
            if not isinstance(rec.get("response"), str):
                raise ConstructionError(f"fixture rule needs a text response: {rec!r}")
            rules.append(FixtureRule(rec.get("key_kind", "substring"), keys, rec["response"]))
        return cls(rules)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ScriptedModelClient:
        return cls.from_records(rec for _, rec in iter_lines(path))

    def complete(self, req: ModelRequest) -> str:
        with self._lock:
            self.calls += 1
        digest = req.digest
        if digest in self._digests:
            return self._digests[digest]
        for rule in self._substrings:
            if rule.matches(req):
                return rule.response
        raise FixtureMissError(digest, req.prompt)


class FixtureOcrClient:
    """Serves precomputed OCR pages keyed by image path."""

    def __init__(self, pages: Iterable[OcrPage]):
        self._pages = {p.image_path: p for p in pages}

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> FixtureOcrClient:
        pages = []
        for lineno, rec in iter_lines(path):
            try:
                pages.append(OcrPage.from_record(rec))
            except ConstructionError as exc:
                raise ConstructionError(f"{path}:{lineno}: {exc}") from None
        return cls(pages)

    def ocr(self, image_ref: str) -> OcrPage:
        page = self._pages.get(image_ref.split("#", 1)[0])
        if page is None:
            raise ClientError(f"no OCR page for image {image_ref!r}")
        return page


# --------------------------------------------------------------------------
# HTTP client
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str
    timeout_ms: int = 60_000
    max_retries: int = 3
    max_concurrent: int = 4
    auth_token: str | None = field(default=None, repr=False)
    backoff_ms: int = 500

    def __post_init__(self) -> None:
        if not self.endpoint:
            raise UsageError("endpoint is required")
        if self.timeout_ms <= 0:
            raise UsageError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise UsageError("max_retries must be >= 0")
        if self.max_concurrent < 1:
            raise UsageError("max_concurrent must be >= 1")
        if self.backoff_ms < 0:
            raise UsageError("backoff_ms must be >= 0")


class FairSemaphore:
    """Counting semaphore that admits waiters in arrival order."""

    def __init__(self, value: int):
        self._value = value
        self._lock = threading.Lock()
        self._waiters: deque[threading.Event] = deque()

    def acquire(self) -> None:
        with self._lock:
            if self._value > 0 and not self._waiters:
                self._value -= 1
                return
            ev = threading.Event()
            self._waiters.append(ev)
        ev.wait()

    def release(self) -> None:
        with self._lock:
            if self._waiters:
                # Hand the slot straight to the oldest waiter.
                self._waiters.popleft().set()
            else:
                self._value += 1

    def __enter__(self) -> FairSemaphore:
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()


class HttpModelClient:
    def __init__(self, config: ClientConfig, *, sleep=time.sleep):
        self.config = config
        self._slots = FairSemaphore(config.max_concurrent)
        self._sleep = sleep
        self._url = config.endpoint.rstrip("/") + "/completions"

    def payload(self, req: ModelRequest) -> dict:
        parts: list[dict] = [{"image_ref": ref} for ref in req.image_refs]
        parts.append({"text": req.prompt})
        return {
            "messages": [{"role": "user", "parts": parts}],
            "temperature": req.temperature,
            "max_output_chars": req.max_output_chars,
        }

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = self.config.auth_token or os.environ.get(AUTH_TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, req: ModelRequest) -> str:
        body = self.payload(req)
        attempts = self.config.max_retries + 1
        last: str = ""
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.config.backoff_ms / 1000 * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = requests.post(
                        self._url,
                        json=body,
                        headers=self._headers(),
                        timeout=self.config.timeout_ms / 1000,
                    )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("request to %s failed (attempt %d/%d): %s", self._url, attempt + 1, attempts, last)
                continue
            if resp.status_code in RETRY_STATUSES:
                last = f"HTTP {resp.status_code}"
                log.warning("%s from %s (attempt %d/%d)", last, self._url, attempt + 1, attempts)
                continue
            if resp.status_code != 200:
                raise ClientError(f"HTTP {resp.status_code} from {self._url}: {resp.text[:500]}")
            try:
                text = resp.json()["text"]
            except (ValueError, KeyError, TypeError):
                raise ClientError(f"malformed response from {self._url}: {resp.text[:500]}") from None
            if not isinstance(text, str):
                raise ClientError(f"response text from {self._url} is not a string")
            return text
        raise ClientError(f"{self._url} failed after {attempts} attempts: {last}")
