"""LLM backends: a scripted mock for tests and an HTTP chat-completions client."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from typing import Protocol

import requests

from ..errors import LlmUnavailable

DEFAULT_API_KEY_ENV = "LLM_API_KEY"

CANNED_COMPLETION = """```signatures
```
```SUMMARY
No diagnosis was scripted for this prompt.
```
```COMPONENTS
PRIMARY SET
unknown
END PRIMARY SET
```
"""


class LlmClient(Protocol):
    model_name: str
    exclusive: bool

    def complete(self, prompt: str, temperature: float = 0.0) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockLlm:
    """Replays completions keyed by the SHA-256 of the prompt.

    ``script`` maps prompt hashes to completions; the ``"default"`` entry (or
    a built-in canned reply) answers anything else. Every call is recorded.
    """

    exclusive = False

    def __init__(self, script: dict[str, str] | None = None, model_name: str = "mock"):
        self.script = dict(script or {})
        self.model_name = model_name
        self.calls: list[tuple[str, float]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockLlm":
        with open(path, encoding="utf-8") as fh:
            script = json.load(fh)
        if not isinstance(script, dict) or not all(isinstance(v, str) for v in script.values()):
            raise ValueError(f"{path}: mock script must map prompt hashes to completion strings")
        return cls(script)

    def complete(self, prompt: str, temperature: float = 0.0) -> str:
        with self._lock:
            self.calls.append((prompt, temperature))
        return self.script.get(prompt_hash(prompt), self.script.get("default", CANNED_COMPLETION))


class HttpLlm:
    """Single-message chat completion against an OpenAI-compatible endpoint.

    The API key is read from the environment variable named by ``api_key_env``.
    """

    exclusive = False

    def __init__(self, endpoint: str, model_name: str, api_key_env: str = DEFAULT_API_KEY_ENV,
                 timeout: float = 120.0):
        self.endpoint = endpoint
        self.model_name = model_name
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, prompt: str, temperature: float = 0.0) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.model_name, "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}]}
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, TypeError, ValueError) as exc:
            raise LlmUnavailable(exc) from exc
