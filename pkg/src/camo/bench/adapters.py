"""Model adapters.  Each call is a single, history-free request.

* :class:`HttpAdapter` posts one user message to a chat-completion endpoint.
* :class:`ReplayAdapter` serves recorded responses from a directory.
* :class:`StubAdapter` answers from a keyword heuristic (for tests, not a detector).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from camo.bench.prompts import code_of
from camo.errors import CamoError


class AdapterUnavailable(CamoError):
    pass


class AdapterSpecError(CamoError):
    pass


@dataclass(frozen=True)
class RequestKey:
    """Identifies one query; only the replay adapter uses it, to pick a file."""

    sample_id: str
    kind: str
    trial: int
    attempt: int = 1


@dataclass(frozen=True)
class Completion:
    text: str
    request: dict | None = None
    response: dict | None = None


class Adapter(Protocol):
    adapter_id: str
    offline: bool

    def complete(self, prompt: str, key: RequestKey) -> Completion: ...


# --- stub -------------------------------------------------------------------

STUB_KEYWORDS = ("strcpy", "strcat", "sprintf", "gets", "memcpy", "malloc", "alloca [")


@dataclass
class StubAdapter:
    heuristic: str = "keyword"
    keywords: tuple[str, ...] = STUB_KEYWORDS
    offline: bool = True

    def __post_init__(self) -> None:
        if self.heuristic != "keyword":
            raise AdapterSpecError(f"unknown stub heuristic {self.heuristic!r}")

    @property
    def adapter_id(self) -> str:
        return f"stub:{self.heuristic}"

    def complete(self, prompt: str, key: RequestKey) -> Completion:
        code = code_of(prompt)
        for kw in self.keywords:
            if kw in code:
                return Completion(f"No, the code is insecure because it uses {kw.strip(' [')}.")
        return Completion("Yes, the code is secure.")


# --- replay -----------------------------------------------------------------


@dataclass
class ReplayAdapter:
    """Reads ``<sample>__<kind>__<trial>.txt``; re-asks read ``...__<trial>.retry<N>.txt``."""

    directory: Path
    offline: bool = True

    def __post_init__(self) -> None:
        self.directory = Path(self.directory)
        if not self.directory.is_dir():
            raise AdapterSpecError(f"replay directory not found: {self.directory}")

    @property
    def adapter_id(self) -> str:
        return f"replay:{self.directory.name}"

    def path_for(self, key: RequestKey) -> Path:
        stem = f"{key.sample_id}__{key.kind}__{key.trial}"
        if key.attempt > 1:
            stem += f".retry{key.attempt - 1}"
        return self.directory / f"{stem}.txt"

    def complete(self, prompt: str, key: RequestKey) -> Completion:
        p = self.path_for(key)
        try:
            return Completion(p.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise AdapterUnavailable(f"no recorded response {p.name}") from exc


# --- http -------------------------------------------------------------------


@dataclass
class HttpAdapter:
    base_url: str
    model: str
    auth_env: str
    temperature: float | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    offline: bool = False
    extra: dict = field(default_factory=dict)
    raw_dir: Path | None = None

    @property
    def adapter_id(self) -> str:
        return f"http:{self.model}"

    @property
    def endpoint(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def build_request(self, prompt: str) -> dict:
        """Payload for one fresh session: a single user message, nothing else."""
        body: dict = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        if self.temperature is not None:
            body["temperature"] = self.temperature
        body.update(self.extra)
        return body

    def complete(self, prompt: str, key: RequestKey) -> Completion:
        token = os.environ.get(self.auth_env)
        if not token:
            raise AdapterUnavailable(f"environment variable {self.auth_env} is not set")
        body = self.build_request(prompt)
        headers = {"Authorization": f"Bearer {token}"}
        last: Exception | None = None
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            for attempt in range(self.max_retries + 1):
                if attempt:
                    self.sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    resp = client.post(self.endpoint, json=body, headers=headers)
                except httpx.TransportError as exc:
                    last = exc
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = AdapterUnavailable(f"HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise AdapterUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    data = resp.json()
                    text = data["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise AdapterUnavailable(f"unexpected response shape: {exc}") from exc
                return Completion(text or "", body, data)
        raise AdapterUnavailable(f"gave up after {self.max_retries + 1} attempts: {last}")


def adapter_from_spec(spec: str, config: dict | None = None) -> Adapter:
    """``stub:keyword``, ``replay:DIR`` or ``http:NAME`` (settings under ``[adapters.NAME]``)."""
    kind, _, arg = spec.partition(":")
    if kind == "stub":
        return StubAdapter(arg or "keyword")
    if kind == "replay":
        if not arg:
            raise AdapterSpecError("replay adapter needs a directory: replay:DIR")
        return ReplayAdapter(Path(arg))
    if kind == "http":
        section = ((config or {}).get("adapters") or {}).get(arg)
        if not section:
            raise AdapterSpecError(f"no [adapters.{arg}] section in the config file")
        if "api_key" in section or "token" in section:
            raise AdapterSpecError("credentials belong in the environment, not the config file")
        try:
            return HttpAdapter(
                base_url=section["base_url"],
                model=section["model"],
                auth_env=section["auth_env"],
                temperature=section.get("temperature"),
                timeout=float(section.get("timeout", 60.0)),
                max_retries=int(section.get("max_retries", 3)),
            )
        except KeyError as exc:
            raise AdapterSpecError(f"[adapters.{arg}] is missing {exc}") from exc
    raise AdapterSpecError(f"unknown adapter {spec!r}; expected stub:, replay: or http:")
