"""HTTP chat-completions transport with a pluggable stub for tests.

Requests carry {model, messages, temperature}; authentication is a bearer
token read from the environment variable named by the endpoint config (the
key itself is never logged or stored). Retries apply only to transport
failures and 5xx responses.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

from .templates import PromptTemplate, parse_fields, render_prompt

ENV_BASE = "LM_API_BASE"
ENV_KEY = "LM_API_KEY"
ENV_MODEL = "LM_MODEL"


class TransportError(RuntimeError):
    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


@dataclass
class LMEndpoint:
    base_url: str
    model_name: str
    api_key_ref: str = ENV_KEY
    timeout: float = 120.0
    max_retries: int = 2
    max_concurrency: int = 4


def endpoint_from_env() -> LMEndpoint | None:
    base = os.environ.get(ENV_BASE)
    model = os.environ.get(ENV_MODEL)
    if not base or not model:
        return None
    return LMEndpoint(base_url=base, model_name=model)


class HttpChatTransport:
    """Callable (messages, temperature) -> completion text."""

    def __init__(self, endpoint: LMEndpoint, session: requests.Session | None = None):
        self.endpoint = endpoint
        self.session = session or requests.Session()

    def __call__(self, messages: list[dict], temperature: float = 0.0) -> str:
        ep = self.endpoint
        url = ep.base_url.rstrip("/") + "/chat/completions"
        headers = {}
        key = os.environ.get(ep.api_key_ref, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {"model": ep.model_name, "messages": messages, "temperature": temperature}
        last = "no attempt made"
        for attempt in range(1, ep.max_retries + 2):
            try:
                resp = self.session.post(url, json=payload, headers=headers, timeout=ep.timeout)
            except requests.RequestException as e:
                last = f"transport failure: {type(e).__name__}"
                continue
            if resp.status_code >= 500:
                last = f"server error {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"request rejected with status {resp.status_code}", attempt)
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError) as e:
                raise TransportError(f"malformed completion response: {e}", attempt) from e
        raise TransportError(last, ep.max_retries + 1)


class StubTransport:
    """Canned or computed completions for tests; records every request."""

    def __init__(self, responses=None, fn=None):
        self.responses = list(responses) if responses is not None else None
        self.fn = fn
        self.calls: list[list[dict]] = []

    def __call__(self, messages: list[dict], temperature: float = 0.0) -> str:
        self.calls.append(messages)
        if self.fn is not None:
            return self.fn(messages)
        if not self.responses:
            raise TransportError("stub has no responses left")
        return self.responses.pop(0)


def stub_completion(**fields: str) -> str:
    """Well-formed completion text for the given output fields."""
    parts = [f"[[ ## {name} ## ]]\n{value}\n" for name, value in fields.items()]
    return "\n".join(parts) + "\n[[ ## completed ## ]]\n"


class LMClient:
    """Renders templates, runs completions, and parses the output fields."""

    def __init__(self, transport, max_concurrency: int = 4, temperature: float = 0.0):
        self.transport = transport
        self.max_concurrency = max(1, int(max_concurrency))
        self.temperature = temperature

    def complete(self, template: PromptTemplate, values: dict[str, str]) -> dict[str, str]:
        system, user = render_prompt(template, values)
        messages = [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ]
        text = self.transport(messages, temperature=self.temperature)
        return parse_fields(text, template.output_names)

    def complete_many(self, template: PromptTemplate, values_list: list[dict[str, str]]) -> list[dict[str, str]]:
        """Bounded-concurrency batch of independent completions, in order."""
        if not values_list:
            return []
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
            return list(pool.map(lambda v: self.complete(template, v), values_list))
