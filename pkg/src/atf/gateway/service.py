"""The model gateway: prompt rendering, caching, retries, parsing, fallbacks.

Every score handed back to callers is clamped to [0, 1] no matter how the
backend misbehaves; structural failures degrade to the documented fallbacks
with a warning rather than aborting a run.
"""

from __future__ import annotations

import ast
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import BackendError, FixtureMissError, ParseError
from .backends import BackendConfig, ChatBackend
from .cache import ResponseCache
from .embeddings import EmbeddingBackend
from .prompts import PromptRequest, build_request

logger = logging.getLogger(__name__)

CANONICAL_ENTITY_TYPES = ("person", "organization", "date", "number", "location", "other")


@dataclass(frozen=True)
class EntityDistribution:
    """Confidence per answer entity type, plus the argmax type."""

    scores: dict[str, float]
    argmax: str

    def __post_init__(self) -> None:
        if not self.scores:
            raise ValueError("entity distribution must be non-empty")
        if self.argmax not in self.scores:
            raise ValueError("argmax must be one of the scored types")
        if self.scores[self.argmax] < max(self.scores.values()):
            raise ValueError("argmax must attain the maximum confidence")


@dataclass(frozen=True)
class ColumnDescription:
    column: str
    text: str
    synthetic: bool = False


def _first_json_object(text: str) -> dict:
    start = text.find("{")
    if start < 0:
        raise ParseError("no JSON object in response")
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                try:
                    obj = json.loads(text[start:i + 1])
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON object: {exc}") from exc
                if not isinstance(obj, dict):
                    raise ParseError("expected a JSON object")
                return obj
    raise ParseError("unbalanced JSON object in response")


def _parse_name_list(text: str) -> list[str]:
    start, end = text.find("["), text.rfind("]")
    if start < 0 or end <= start:
        raise ParseError("no list in response")
    snippet = text[start:end + 1]
    try:
        value = ast.literal_eval(snippet)
        if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
            return list(value)
    except (ValueError, SyntaxError):
        pass
    quoted = re.findall(r"""["']([^"']+)["']""", snippet)
    if quoted:
        return quoted
    if snippet.strip() == "[]":
        return []
    raise ParseError("response list is not a list of strings")


def _parse_keyed_lines(text: str, names: Sequence[str]) -> dict[str, str]:
    """Parse ``name: value`` lines, matching the longest known name first.

    Column names may themselves contain colons or spaces, so a plain
    first-colon split is not safe.
    """
    by_length = sorted(names, key=len, reverse=True)
    lower_map = {n.lower(): n for n in names}
    out: dict[str, str] = {}
    for raw_line in text.splitlines():
        line = raw_line.strip().lstrip("-*").strip()
        if not line or ":" not in line:
            continue
        matched = None
        for name in by_length:
            prefix = f"{name}:"
            if line.startswith(prefix) or line.lower().startswith(prefix.lower()):
                matched = name
                value = line[len(prefix):].strip()
                break
        if matched is None:
            head, _, value = line.partition(":")
            matched = lower_map.get(head.strip().lower())
            value = value.strip()
        if matched is not None and matched not in out:
            out[matched] = value
    return out


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def match_headers(names: Sequence[str], headers: Sequence[str]) -> tuple[list[str], list[str]]:
    """Resolve backend-returned names against real headers.

    Exact match first, then case-insensitive on trimmed text; unmatched
    names are reported back to the caller, not silently kept.
    """
    folded = {h.strip().lower(): h for h in headers}
    matched: list[str] = []
    dropped: list[str] = []
    for name in names:
        if name in headers:
            target = name
        else:
            target = folded.get(name.strip().lower())
        if target is None:
            dropped.append(name)
        elif target not in matched:
            matched.append(target)
    return matched, dropped


class ModelGateway:
    """Single entry point for all language-model and embedding traffic."""

    def __init__(self, chat: ChatBackend, embedder: EmbeddingBackend,
                 config: BackendConfig | None = None,
                 cache: ResponseCache | None = None):
        self.chat = chat
        self.embedder = embedder
        self.config = config or BackendConfig()
        self.cache = cache or ResponseCache(self.config.cache_dir)
        self._inflight = threading.Semaphore(self.config.max_inflight)
        self.backend_calls = 0

    # -- low-level call path ---------------------------------------------

    def _request(self, template: str, salt: str = "", **fields) -> PromptRequest:
        return build_request(template, self.config.model, self.config.temperature,
                             salt=salt, **fields)

    def _complete(self, request: PromptRequest) -> str:
        cached = self.cache.get(request.key)
        if cached is not None:
            return cached
        last: BackendError | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                with self._inflight:
                    self.backend_calls += 1
                    response = self.chat.complete(request)
                self.cache.put(request.key, response)
                return response
            except FixtureMissError:
                raise
            except BackendError as exc:
                last = exc
                if attempt < self.config.max_retries and self.config.backoff_base > 0:
                    time.sleep(self.config.backoff_base * (2 ** attempt))
        raise last if last is not None else BackendError("backend call failed")

    # -- operations --------------------------------------------------------

    def predict_entity_type(self, question: str,
                            warnings: list[str] | None = None) -> EntityDistribution:
        """Predict the expected answer entity type as a confidence distribution.

        Falls back to a uniform distribution over the canonical types after
        exhausted retries, recording a warning.
        """
        if not question:
            raise ValueError("question must be non-empty")
        request = self._request("entity_type", question=question)
        try:
            raw = self._complete(request)
            obj = _first_json_object(raw)
            scores = {str(k): clamp01(float(v)) for k, v in obj.items()
                      if isinstance(v, (int, float))}
            if not scores:
                raise ParseError("entity response had no numeric confidences")
        except (BackendError, ParseError) as exc:
            if warnings is not None:
                warnings.append(f"entity_fallback_uniform: {exc}")
            uniform = 1.0 / len(CANONICAL_ENTITY_TYPES)
            return EntityDistribution(
                scores={name: uniform for name in CANONICAL_ENTITY_TYPES},
                argmax="other",
            )
        best = max(scores.items(), key=lambda kv: (kv[1], -list(scores).index(kv[0])))
        return EntityDistribution(scores=scores, argmax=best[0])

    def extract_essential_columns(self, question: str, headers: Sequence[str],
                                  entity_hint: str | None = None,
                                  warnings: list[str] | None = None) -> list[str]:
        """Ask for must-keep columns; unmatched names are dropped and logged."""
        if not headers:
            raise ValueError("headers must be non-empty")
        request = self._request(
            "essential_columns",
            question=question,
            columns=", ".join(headers),
            entity_hint=entity_hint or "unknown",
            header_list=list(headers),
        )
        try:
            raw = self._complete(request)
            names = _parse_name_list(raw)
        except (BackendError, ParseError) as exc:
            if warnings is not None:
                warnings.append(f"essential_fallback_empty: {exc}")
            return []
        matched, dropped = match_headers(names, headers)
        for name in dropped:
            logger.warning("essential column %r does not match any header", name)
            if warnings is not None:
                warnings.append(f"essential_unmatched_dropped: {name}")
        return matched

    def generate_column_descriptions(
            self, question: str, entity_hint: str | None,
            column_samples: Sequence[tuple[str, Sequence[str]]],
            warnings: list[str] | None = None) -> list[ColumnDescription]:
        """One natural-language description per column.

        Columns the backend skipped get synthetic ``values like: …`` text and
        are flagged.
        """
        for header, samples in column_samples:
            if not samples:
                raise ValueError(f"column {header!r} has no sampled values")
        lines = [f"{h} (Examples: {', '.join(v)})" for h, v in column_samples]
        request = self._request(
            "column_descriptions",
            question=question,
            entity_hint=entity_hint or "unknown",
            columns_with_examples="\n".join(lines),
            column_samples=[(h, list(v)) for h, v in column_samples],
        )
        raw = self._complete(request)
        names = [h for h, _ in column_samples]
        parsed = _parse_keyed_lines(raw, names)
        out = []
        for header, samples in column_samples:
            text = parsed.get(header, "").strip()
            if text:
                out.append(ColumnDescription(column=header, text=text))
            else:
                if warnings is not None:
                    warnings.append(f"description_synthetic: {header}")
                out.append(ColumnDescription(
                    column=header,
                    text=f"values like: {', '.join(samples)}",
                    synthetic=True,
                ))
        return out

    def score_columns_once(self, question: str, entity_hint: str | None,
                           descriptions: Sequence[ColumnDescription],
                           iteration: int = 0,
                           warnings: list[str] | None = None) -> dict[str, float]:
        """One scoring pass over all columns; scores clamped to [0, 1].

        The iteration index salts the cache key, otherwise repeated passes
        would collapse into one cached response.
        """
        request = self._request(
            "column_scoring",
            salt=f"iter:{iteration}",
            question=question,
            entity_hint=entity_hint or "unknown",
            columns_with_descriptions="\n".join(f"{d.column}: {d.text}" for d in descriptions),
            column_descriptions=[(d.column, d.text) for d in descriptions],
        )
        raw = self._complete(request)
        names = [d.column for d in descriptions]
        parsed = _parse_keyed_lines(raw, names)
        scores: dict[str, float] = {}
        for name in names:
            value = parsed.get(name)
            if value is None:
                scores[name] = 0.0
                if warnings is not None:
                    warnings.append(f"score_missing_zeroed: {name} (iter {iteration})")
                continue
            match = re.search(r"-?\d+(?:\.\d+)?", value)
            if match is None:
                scores[name] = 0.0
                if warnings is not None:
                    warnings.append(f"score_unparseable_zeroed: {name} (iter {iteration})")
                continue
            scores[name] = clamp01(float(match.group()))
        return scores

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise BackendError("embed called with no texts")
        return self.embedder.embed(texts)
