"""Chat-completion backends: generic HTTP, deterministic mock, fixture replay."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from ..errors import BackendError, FixtureMissError
from .prompts import PromptRequest


@dataclass
class BackendConfig:
    kind: str = "mock"                     # http_chat | mock | fixture
    endpoint: str = ""
    credentials_env: str = "ATF_API_KEY"
    model: str = "offline-mock"
    temperature: float = 0.0               # pinned; scoring relies on it
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    cache_dir: str | None = None
    fixture_path: str | None = None
    max_inflight: int = 4

    def __post_init__(self) -> None:
        if self.temperature != 0.0:
            raise ValueError("temperature is fixed at 0.0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class ChatBackend(Protocol):
    def complete(self, request: PromptRequest) -> str: ...


class HttpChatBackend:
    """POSTs a plain JSON chat-completion request; no vendor SDK."""

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise ValueError("http_chat backend requires an endpoint")
        self.config = config

    def complete(self, request: PromptRequest) -> str:
        token = os.environ.get(self.config.credentials_env, "")
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.config.temperature,
        }
        try:
            resp = requests.post(self.config.endpoint, json=body, headers=headers,
                                 timeout=self.config.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"backend returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion payload: {exc}") from exc


_WORD = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> set[str]:
    return set(_WORD.findall(text.lower()))


def mock_overlap_score(question: str, header: str, description: str) -> float:
    """Deterministic relevance proxy: question-token coverage by the column text."""
    q = _tokens(question)
    if not q:
        return 0.0
    col = _tokens(header) | _tokens(description)
    return len(q & col) / len(q)


class MockChatBackend:
    """Offline stand-in with fixed keyword rules. No I/O, no randomness."""

    def complete(self, request: PromptRequest) -> str:
        handler = {
            "entity_type": self._entity,
            "essential_columns": self._essential,
            "column_descriptions": self._descriptions,
            "column_scoring": self._scoring,
        }.get(request.template)
        if handler is None:
            raise BackendError(f"mock cannot serve template {request.template!r}")
        return handler(request.fields)

    @staticmethod
    def _entity(fields: dict) -> str:
        q = fields.get("question", "").lower()
        if re.search(r"\bwho\b|\bwhom\b|\bwhose\b", q):
            dist = {"person": 0.9, "organization": 0.3, "other": 0.1}
        elif re.search(r"\bwhen\b|\bdate\b|\byear\b", q):
            dist = {"date": 0.9, "number": 0.4, "other": 0.1}
        elif re.search(r"\bhow many\b|\bhow much\b|\bnumber\b|\btotal\b|\baverage\b", q):
            dist = {"number": 0.9, "other": 0.2}
        elif re.search(r"\bwhere\b|\bcity\b|\bcountry\b|\blocation\b", q):
            dist = {"location": 0.9, "other": 0.2}
        else:
            dist = {"other": 0.6, "number": 0.3}
        return json.dumps(dist)

    @staticmethod
    def _essential(fields: dict) -> str:
        question = fields.get("question", "")
        headers = fields.get("header_list", [])
        q = _tokens(question)
        scored = [(len(q & _tokens(h)), i, h) for i, h in enumerate(headers)]
        keep = [h for overlap, _, h in sorted(scored, key=lambda s: (-s[0], s[1]))
                if overlap > 0][:3]
        return json.dumps(keep)

    @staticmethod
    def _descriptions(fields: dict) -> str:
        lines = []
        for header, samples in fields.get("column_samples", []):
            shown = ", ".join(samples[:2])
            lines.append(f"{header}: Column {header} with values like {shown}")
        return "\n".join(lines)

    @staticmethod
    def _scoring(fields: dict) -> str:
        question = fields.get("question", "")
        lines = []
        for header, description in fields.get("column_descriptions", []):
            score = mock_overlap_score(question, header, description)
            lines.append(f"{header}: {score!r}")
        return "\n".join(lines)


@dataclass
class Fixture:
    """Recorded backend behavior for deterministic replay."""

    responses: dict[str, str] = field(default_factory=dict)
    prompts: dict[str, str] = field(default_factory=dict)
    embeddings: dict[str, list[float]] = field(default_factory=dict)
    row_scores: dict[str, list[float]] | None = None

    @classmethod
    def load(cls, path: str | Path) -> "Fixture":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(obj, list):
            obj = {"llm": obj}
        fixture = cls()
        for entry in obj.get("llm", []):
            fixture.responses[entry["key"]] = entry["response"]
            if "prompt" in entry:
                fixture.prompts[entry["key"]] = entry["prompt"]
        fixture.embeddings = {k: list(map(float, v))
                              for k, v in obj.get("embeddings", {}).items()}
        rs = obj.get("row_scores")
        if rs is not None:
            fixture.row_scores = {k: list(map(float, v)) for k, v in rs.items()}
        return fixture


class FixtureChatBackend:
    """Replays recorded responses; any unrecorded key is a hard error."""

    def __init__(self, fixture: Fixture):
        self.fixture = fixture

    def complete(self, request: PromptRequest) -> str:
        try:
            return self.fixture.responses[request.key]
        except KeyError:
            raise FixtureMissError(
                f"no recorded response for template {request.template!r} "
                f"key {request.key[:16]}… (prompt drift?)"
            ) from None
