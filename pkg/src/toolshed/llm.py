"""Minimal completion-model client and prompt rendering helpers.

The live client talks to an OpenAI-style chat completions endpoint configured
through ``TOOLSHED_LLM_ENDPOINT`` / ``TOOLSHED_LLM_KEY`` / ``TOOLSHED_LLM_MODEL``.
Everything that consumes completions accepts any ``Callable[[str], str]``, so
tests inject canned functions and never touch the network.
"""

from __future__ import annotations

import os
import re
from typing import Callable, Mapping

from .errors import ConfigurationError, ProviderError

CompletionFn = Callable[[str], str]

ENV_LLM_ENDPOINT = "TOOLSHED_LLM_ENDPOINT"
ENV_LLM_KEY = "TOOLSHED_LLM_KEY"
ENV_LLM_MODEL = "TOOLSHED_LLM_MODEL"

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def render_prompt(template: str, values: Mapping[str, object]) -> str:
    """Fill ``{name}`` slots in a template.

    Plain substring substitution rather than ``str.format`` so that literal
    braces in template bodies (JSON examples and the like) never need
    escaping. Unknown placeholders are an error; unused values are fine.
    """
    missing = [name for name in _PLACEHOLDER.findall(template) if name not in values]
    if missing:
        raise ConfigurationError(f"template placeholders without values: {sorted(set(missing))}")
    rendered = template
    for name, value in values.items():
        rendered = rendered.replace("{" + name + "}", str(value))
    return rendered


class HttpCompletionClient:
    """Completion client for an OpenAI-style ``/chat/completions`` endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        max_attempts: int = 3,
        timeout: float = 60.0,
        transport: Callable[[str, dict, dict], dict] | None = None,
    ) -> None:
        if not endpoint or not model:
            raise ConfigurationError("completion client needs both an endpoint and a model")
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.max_attempts = max(1, max_attempts)
        self.timeout = timeout
        self._transport = transport or self._http_post

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None) -> "HttpCompletionClient | None":
        """Build a client from the environment, or None when unconfigured."""
        env = os.environ if environ is None else environ
        endpoint = env.get(ENV_LLM_ENDPOINT, "")
        model = env.get(ENV_LLM_MODEL, "")
        if not endpoint or not model:
            return None
        return cls(endpoint=endpoint, model=model, api_key=env.get(ENV_LLM_KEY))

    def _http_post(self, url: str, headers: dict, payload: dict) -> dict:
        import requests

        response = requests.post(url, headers=headers, json=payload, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def __call__(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                body = self._transport(self.endpoint, headers, payload)
            except Exception as exc:  # transport failures are retryable
                last_error = exc
                continue
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderError(
                    f"completion response missing expected fields: {exc}",
                    attempts=attempt,
                    retryable=False,
                ) from exc
        raise ProviderError(
            f"completion request failed after {self.max_attempts} attempt(s): {last_error}",
            attempts=self.max_attempts,
            retryable=True,
        ) from last_error


def parse_listed_lines(text: str) -> list[str]:
    """Extract list items from free-form model output.

    Accepts numbered lines (``1. foo`` / ``2) bar``), bulleted lines
    (``- foo``), or plain one-item-per-line text. Surrounding quotes are
    stripped, blank lines dropped.
    """
    items: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        stripped = re.sub(r"^(?:\d+[.)]\s*|[-*]\s+)", "", stripped)
        stripped = stripped.strip().strip("\"'").strip()
        if stripped:
            items.append(stripped)
    return items
