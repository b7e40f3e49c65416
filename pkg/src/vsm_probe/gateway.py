"""Chat-completion transport: live HTTP, replay cache, scripted responders.

Every backend exposes ``complete(request) -> ChatResponse`` and must be
safe to call from several threads at once.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import httpx

from .errors import AuthError, CacheMiss, InvalidPolicy, TransportError

if TYPE_CHECKING:
    from .protocol import PromptText

log = logging.getLogger(__name__)

MIN_MAX_TOKENS = 64


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 512

    def __post_init__(self):
        if self.max_tokens < MIN_MAX_TOKENS:
            raise ValueError(f"max_tokens must be >= {MIN_MAX_TOKENS}")

    def to_dict(self) -> dict:
        return {"temperature": self.temperature, "top_p": self.top_p, "max_tokens": self.max_tokens}


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: float = 1.0
    multiplier: float = 2.0

    def delay(self, attempt: int) -> float:
        """Sleep before retry number ``attempt`` (1-based)."""
        return self.backoff * self.multiplier ** (attempt - 1)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: str = field(default="", repr=False)
    timeout: float = 60.0
    max_in_flight: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    send_seed: bool = True

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    prompt: "PromptText"
    seed: int
    sampling: SamplingParams = field(default_factory=SamplingParams)


@dataclass(frozen=True)
class ChatResponse:
    raw_text: str
    backend: str
    latency: float = 0.0
    attempt_count: int = 1


def cache_key(request: ChatRequest) -> str:
    """sha256 over model, prompt bytes, seed and sampling parameters."""
    payload = {
        "model": request.model_name,
        "prompt": request.prompt.text,
        "seed": int(request.seed),
        "sampling": request.sampling.to_dict(),
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# HTTP


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` client.

    Retries timeouts, connection failures, 5xx and 429 with exponential
    backoff. 401/403 raise AuthError straight away. If the server rejects
    the ``seed`` field with a 400, the seed is dropped for the rest of the
    session; it is still part of the cache key and the run records.
    """

    name = "http"

    def __init__(self, endpoint: EndpointConfig, client: httpx.Client | None = None, sleep=time.sleep):
        self.endpoint = endpoint
        self._client = client or httpx.Client(timeout=endpoint.timeout)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight)
        self._send_seed = endpoint.send_seed
        self.url = endpoint.base_url.rstrip("/") + "/chat/completions"

    def _body(self, request: ChatRequest) -> dict:
        body = {
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.prompt.text}],
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
            "max_tokens": request.sampling.max_tokens,
        }
        if self._send_seed:
            body["seed"] = int(request.seed)
        return body

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.endpoint.api_key:
            headers["Authorization"] = f"Bearer {self.endpoint.api_key}"
        return headers

    def complete(self, request: ChatRequest) -> ChatResponse:
        policy = self.endpoint.retry
        start = time.monotonic()
        last_error = "no attempt made"
        attempt = 0
        with self._slots:
            while attempt < policy.attempts:
                attempt += 1
                try:
                    resp = self._client.post(self.url, json=self._body(request), headers=self._headers())
                except httpx.TimeoutException as exc:
                    last_error = f"timeout: {exc}"
                except httpx.TransportError as exc:
                    last_error = f"transport: {exc}"
                else:
                    status = resp.status_code
                    if status in (401, 403):
                        raise AuthError(f"endpoint refused credentials (HTTP {status})")
                    if status == 400 and self._send_seed and "seed" in resp.text.lower():
                        log.warning("endpoint rejected the seed parameter; continuing without it")
                        self._send_seed = False
                        attempt -= 1
                        continue
                    if status == 429 or status >= 500:
                        last_error = f"HTTP {status}"
                    elif status >= 400:
                        raise TransportError(f"HTTP {status}: {resp.text[:200]}")
                    else:
                        return ChatResponse(
                            raw_text=_content(resp),
                            backend=self.name,
                            latency=time.monotonic() - start,
                            attempt_count=attempt,
                        )
                if attempt < policy.attempts:
                    self._sleep(policy.delay(attempt))
        raise TransportError(f"giving up after {attempt} attempts ({last_error})")

    def close(self):
        self._client.close()


def _content(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed completion payload: {exc}") from None
    return "" if content is None else str(content)


# --------------------------------------------------------------------------
# replay cache


class ReplayCache:
    """Content-addressed store of raw responses, one file per cache key.

    Layout: ``<root>/<key[:2]>/<key>.txt`` holding the UTF-8 response.
    Writes go to a temporary file and are renamed into place, so readers
    never observe a partial entry.
    """

    def __init__(self, root):
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.txt"

    def get(self, key: str) -> str | None:
        try:
            return self.path(key).read_bytes().decode("utf-8")
        except FileNotFoundError:
            return None

    def put(self, key: str, raw_text: str) -> None:
        target = self.path(key)
        if target.exists():
            return
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(raw_text.encode("utf-8"))
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __contains__(self, key: str) -> bool:
        return self.path(key).exists()

    def __len__(self) -> int:
        if not self.root.exists():
            return 0
        return sum(1 for _ in self.root.glob("*/*.txt"))


class ReplayBackend:
    """Serve responses from a ReplayCache.

    With an ``upstream`` backend, misses are forwarded and the answer is
    stored (record mode). Without one, a miss raises CacheMiss in strict
    mode or yields an empty response otherwise.
    """

    name = "replay"

    def __init__(self, cache: ReplayCache, upstream=None, strict: bool = True):
        self.cache = cache if isinstance(cache, ReplayCache) else ReplayCache(cache)
        self.upstream = upstream
        self.strict = strict

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = cache_key(request)
        cached = self.cache.get(key)
        if cached is not None:
            return ChatResponse(raw_text=cached, backend=self.name)
        if self.upstream is not None:
            response = self.upstream.complete(request)
            self.cache.put(key, response.raw_text)
            return response
        if self.strict:
            raise CacheMiss(key)
        return ChatResponse(raw_text="", backend=self.name)


# --------------------------------------------------------------------------
# scripted responders


def _answer(option: int, reason: str) -> str:
    return json.dumps({"option": option, "reason": reason})


@dataclass(frozen=True)
class FixedOption:
    option: int

    def __post_init__(self):
        if self.option not in (1, 2, 3, 4, 5):
            raise InvalidPolicy(f"fixed option must be 1..5, got {self.option}")

    def respond(self, request: ChatRequest) -> str:
        return _answer(self.option, "scripted fixed choice")


@dataclass(frozen=True)
class UniformRandom:
    seed: int

    def respond(self, request: ChatRequest) -> str:
        rng = random.Random(f"{self.seed}:{cache_key(request)}")
        return _answer(rng.randint(1, 5), "scripted uniform choice")


@dataclass(frozen=True)
class NationProfile:
    """Answer per nation from a table ``{nation: {question_id: option}}``.

    Questions missing from a nation's table get ``default``.
    """

    table: dict
    default: int = 3

    def __post_init__(self):
        from .protocol import Nation

        normalized = {}
        for nation, answers in self.table.items():
            try:
                key = Nation.parse(nation)
            except ValueError as exc:
                raise InvalidPolicy(str(exc)) from None
            row = {}
            for qid, opt in dict(answers).items():
                if int(opt) not in (1, 2, 3, 4, 5) or not 1 <= int(qid) <= 24:
                    raise InvalidPolicy(f"bad profile entry {nation}: q{qid} -> {opt}")
                row[int(qid)] = int(opt)
            normalized[key] = row
        object.__setattr__(self, "table", normalized)
        if self.default not in (1, 2, 3, 4, 5):
            raise InvalidPolicy("default option must be 1..5")

    def respond(self, request: ChatRequest) -> str:
        prompt = request.prompt
        option = self.table.get(prompt.identity.nation, {}).get(prompt.question_id, self.default)
        return _answer(option, f"scripted profile for {prompt.identity.nation.value}")


@dataclass(frozen=True)
class Malformed:
    """Emit unparseable prose with probability ``rate``, else defer to ``base``."""

    rate: float
    seed: int = 0
    base: object = FixedOption(3)

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise InvalidPolicy("malformed rate must lie in [0, 1]")

    def respond(self, request: ChatRequest) -> str:
        draw = random.Random(f"malformed:{self.seed}:{cache_key(request)}").random()
        if draw < self.rate:
            return "I'm sorry, but I cannot choose a single option for this question."
        return self.base.respond(request)


_POLICIES = (FixedOption, UniformRandom, NationProfile, Malformed)


class ScriptedBackend:
    name = "scripted"

    def __init__(self, policy):
        if not isinstance(policy, _POLICIES):
            raise InvalidPolicy(f"unsupported responder policy {policy!r}")
        self.policy = policy

    def complete(self, request: ChatRequest) -> ChatResponse:
        return ChatResponse(raw_text=self.policy.respond(request), backend=self.name)


def scripted_responder(policy) -> ScriptedBackend:
    """Backend answering from a deterministic policy instead of a model.

    ``policy`` is a policy object or a spec string: ``fixed:K``,
    ``uniform:SEED``, ``malformed:RATE[:SEED]`` or ``profile:PATH`` where
    PATH is a JSON file ``{nation: {question_id: option}}``.
    """
    if isinstance(policy, str):
        policy = parse_policy(policy)
    return ScriptedBackend(policy)


def parse_policy(spec: str):
    kind, _, arg = spec.partition(":")
    try:
        if kind == "fixed":
            return FixedOption(int(arg))
        if kind == "uniform":
            return UniformRandom(int(arg or 0))
        if kind == "malformed":
            rate, _, seed = arg.partition(":")
            return Malformed(float(rate), int(seed or 0))
        if kind == "profile":
            with open(arg, encoding="utf-8") as fh:
                return NationProfile(json.load(fh))
    except (ValueError, OSError) as exc:
        raise InvalidPolicy(f"cannot build policy from {spec!r}: {exc}") from None
    raise InvalidPolicy(f"unknown policy {spec!r}")
