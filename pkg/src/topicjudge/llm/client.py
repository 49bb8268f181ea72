"""Chat-completion clients: HTTP with bounded retry, and offline replay."""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from typing import Callable

from ..errors import TransportError

RETRYABLE_STATUS = (429, 500, 502, 503, 504)
DEFAULT_API_KEY_ENV = "TOPICJUDGE_API_KEY"


class HttpChatClient:
    """Minimal OpenAI-compatible chat client with exponential backoff.

    Credentials come from the environment, never from config files. Requests
    use temperature 0 so responses are as reproducible as the endpoint
    allows.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_seconds: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self.sleep = sleep
        self.network_calls = 0

    def complete(self, prompt: str) -> str:
        body = json.dumps(
            {
                "model": self.model_id,
                "temperature": 0,
                "messages": [{"role": "user", "content": prompt}],
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            request = urllib.request.Request(
                f"{self.base_url}/chat/completions", data=body, headers=headers
            )
            self.network_calls += 1
            try:
                with urllib.request.urlopen(request, timeout=self.timeout) as response:
                    payload = json.loads(response.read().decode("utf-8"))
                try:
                    return payload["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError) as exc:
                    raise TransportError(f"unexpected completion payload: {payload!r}") from exc
            except urllib.error.HTTPError as exc:
                if exc.code not in RETRYABLE_STATUS:
                    raise TransportError(f"chat endpoint returned HTTP {exc.code}") from exc
                last_error = exc
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last_error = exc
            if attempt + 1 < self.max_attempts:
                self.sleep(self.backoff_seconds * 2**attempt)
        raise TransportError(
            f"chat completion failed after {self.max_attempts} attempts: {last_error}"
        )


class ReplayClient:
    """Offline stand-in: every live call is an error.

    Used with a transcript directory that already covers the pool, so cache
    lookups satisfy all requests and the run is a pure function of its
    inputs.
    """

    def __init__(self, model_id: str):
        self.model_id = model_id
        self.network_calls = 0

    def complete(self, prompt: str) -> str:
        raise TransportError(
            "replay mode has no transcript for this prompt; "
            "regenerate transcripts or configure a live endpoint"
        )
