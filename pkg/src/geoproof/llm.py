"""Chat-model clients: a scripted replay client and an HTTP chat-completions client."""

from __future__ import annotations

import json
import logging
import os
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

log = logging.getLogger(__name__)

Turn = tuple[str, str]  # (role, text)
Key = tuple[int, int, int]  # (problem id, run, retry)

API_KEY_ENV = "GEOPROOF_LLM_API_KEY"


class TransportError(RuntimeError):
    pass


class LlmClient(ABC):
    @abstractmethod
    def complete(self, system: str, conversation: Sequence[Turn], key: Key | None = None) -> str:
        """Reply to the conversation; ``key`` identifies the attempt for scripted clients."""


class ReplayClient(LlmClient):
    """Return scripted responses.

    ``script`` maps ``(problem_id, run, retry)`` to a response text or to a
    callable of the conversation.  Missing keys fall back to ``default`` when
    given, otherwise raise :class:`TransportError`.
    """

    def __init__(self, script: Mapping[Key, str | Callable[[Sequence[Turn]], str]], default: str | None = None):
        self.script = dict(script)
        self.default = default
        self.calls: list[tuple[Key | None, list[Turn]]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_directory(cls, path: str | Path, default: str | None = None) -> "ReplayClient":
        """Load ``<problem>_<run>_<retry>.txt`` files."""
        script = {}
        for f in sorted(Path(path).glob("*.txt")):
            parts = f.stem.split("_")
            if len(parts) == 3 and all(p.isdigit() for p in parts):
                script[tuple(int(p) for p in parts)] = f.read_text(encoding="utf-8")
        return cls(script, default)

    def complete(self, system, conversation, key=None):
        with self._lock:
            self.calls.append((key, list(conversation)))
        entry = self.script.get(key) if key is not None else None
        if entry is None:
            if self.default is None:
                raise TransportError(f"no scripted response for {key}")
            entry = self.default
        return entry(conversation) if callable(entry) else entry


class HttpChatClient(LlmClient):
    """Client for OpenAI-style ``/chat/completions`` endpoints.

    Every raw request and response is appended to ``audit_path`` when set.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        temperature: float = 1.0,
        api_key_env: str = API_KEY_ENV,
        timeout_s: float = 600.0,
        audit_path: str | Path | None = None,
        extra: Mapping[str, object] | None = None,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self.audit_path = Path(audit_path) if audit_path else None
        self.extra = dict(extra or {})
        self.session = session or requests.Session()
        self._lock = threading.Lock()

    def _audit(self, record: dict) -> None:
        if self.audit_path is None:
            return
        with self._lock, open(self.audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def complete(self, system, conversation, key=None):
        token = os.environ.get(self.api_key_env)
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "system", "content": system}] + [{"role": r, "content": t} for r, t in conversation],
            **self.extra,
        }
        try:
            resp = self.session.post(f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout_s)
        except requests.RequestException as exc:
            self._audit({"key": key, "request": body, "error": str(exc)})
            raise TransportError(str(exc)) from exc
        self._audit({"key": key, "request": body, "status": resp.status_code, "response": resp.text})
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed response: {resp.text[:200]}") from exc
