"""Chat-completion backend.

Wire format (POST ``endpoint_url``)::

    request:  {"model": str, "messages": [{"role": "user", "content": str}],
               "temperature": float}
    response: {"choices": [{"message": {"content": str}}, ...], ...}

The bearer token, when present, comes from the environment variable named
by ``LlmBackendConfig.auth_token_env_var``.
"""
from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from pathlib import Path

import httpx

from ..model import LlmBackendConfig, RatingScale
from .base import AgentContext, AgentError
from .prompts import render_prompt

log = logging.getLogger(__name__)

_INT_TOKEN = re.compile(r"\d+")


class TransportError(AgentError):
    pass


class AuthError(AgentError):
    pass


class ParseError(AgentError):
    pass


class NoRatingFound(ValueError):
    pass


def parse_rating(response_text: str, scale: RatingScale = RatingScale()) -> int:
    """First whole-number token in the text that lies on the scale.

    Digit runs are taken whole, so "10" is read as ten, never as "1".
    """
    for tok in _INT_TOKEN.findall(response_text or ""):
        value = int(tok)
        if 1 <= value <= scale.levels_max:
            return value
    raise NoRatingFound(f"no rating in 1..{scale.levels_max} found in {response_text!r}")


class AuditLog:
    """Append-only JSONL of raw request/response pairs; safe across threads."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def write(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line)


class ChatClient:
    def __init__(self, cfg: LlmBackendConfig, audit: AuditLog | None = None):
        self.cfg = cfg
        self.audit = audit
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self._http = httpx.Client(timeout=cfg.timeout_ms / 1000.0)

    def close(self) -> None:
        self._http.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.cfg.auth_token_env_var)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, prompt: str, seed: int | None = None) -> str:
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        last_exc = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                with self._slots:
                    resp = self._http.post(self.cfg.endpoint_url, json=body, headers=self._headers())
            except httpx.HTTPError as exc:
                last_exc = exc
                log.warning("request to %s failed (attempt %d): %s", self.cfg.endpoint_url, attempt + 1, exc)
                time.sleep(min(2.0, 0.1 * 2**attempt))
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint refused credentials: HTTP {resp.status_code}")
            if resp.status_code >= 500 or resp.status_code == 429:
                last_exc = TransportError(f"HTTP {resp.status_code}")
                time.sleep(min(2.0, 0.1 * 2**attempt))
                continue
            if resp.status_code != 200:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed chat-completion response: {exc}") from None
            if self.audit is not None:
                self.audit.write({"seed": seed, "request": body, "response": resp.json()})
            return content
        raise TransportError(f"giving up after {self.cfg.max_retries + 1} attempts: {last_exc}")


def llm_rate(
    cfg: LlmBackendConfig,
    prompt: str,
    n_samples: int,
    seed: int,
    scale: RatingScale = RatingScale(),
    client: ChatClient | None = None,
) -> list[int]:
    """Request ``n_samples`` independent ratings for one prompt, in order.

    A reply with no usable rating is re-asked up to ``cfg.max_retries``
    times before raising ParseError.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    own = client is None
    client = client or ChatClient(cfg)
    try:
        out = []
        for i in range(n_samples):
            for attempt in range(cfg.max_retries + 1):
                text = client.complete(prompt, seed=seed)
                try:
                    out.append(parse_rating(text, scale))
                    break
                except NoRatingFound:
                    log.warning("sample %d: unparseable reply %r (attempt %d)", i, text, attempt + 1)
            else:
                raise ParseError(f"sample {i}: no valid rating after {cfg.max_retries + 1} replies")
        return out
    finally:
        if own:
            client.close()


class LlmBackend:
    def __init__(self, cfg: LlmBackendConfig, audit_path=None):
        self.cfg = cfg
        self.backend_id = "llm"
        self.client = ChatClient(cfg, AuditLog(audit_path) if audit_path else None)

    def rate(self, ctx: AgentContext, scenario, seeds) -> list[int]:
        prompt = render_prompt(ctx, scenario)
        return llm_rate(self.cfg, prompt, len(seeds), ctx.rng_seed, ctx.scale, self.client)

    def close(self) -> None:
        self.client.close()
