"""Variance-adjusted aggregation of repeated scoring passes plus embedding
similarity, producing the dual-score pairs that feed clustering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyIterations, KeyMismatch
from .gateway.embeddings import cosine


@dataclass
class IterationRecord:
    """Per-column score lists across scoring passes."""

    scores: dict[str, list[float]] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def add_pass(self, pass_scores: Mapping[str, float]) -> None:
        for column, score in pass_scores.items():
            self.scores.setdefault(column, []).append(float(score))

    def n_effective(self, column: str) -> int:
        return len(self.scores.get(column, []))


@dataclass(frozen=True)
class ColumnScorePair:
    """The 2-D relevance representation of one column."""

    column: str
    llm_final: float
    emb_norm: float
    mu: float = 0.0
    sigma: float = 0.0
    emb_raw: float = 0.0

    @property
    def mean_score(self) -> float:
        return (self.llm_final + self.emb_norm) / 2.0

    @property
    def point(self) -> tuple[float, float]:
        return (self.llm_final, self.emb_norm)


def aggregate_scores(scores: Sequence[float]) -> tuple[float, float, float]:
    """Mean, population standard deviation, and the variance-discounted final
    score ``mu / (1 + sigma)`` for one column's score list."""
    if not scores:
        raise EmptyIterations("no scores to aggregate")
    n = len(scores)
    mu = sum(scores) / n
    sigma = math.sqrt(sum((s - mu) ** 2 for s in scores) / n)
    return mu, sigma, mu * (1.0 / (1.0 + sigma))


def aggregate_iterations(record: IterationRecord,
                         columns: Sequence[str] | None = None
                         ) -> dict[str, tuple[float, float, float]]:
    """Aggregate every column's passes into (mu, sigma, llm_final).

    Columns that never appeared in any pass score 0 and are flagged; columns
    present in some passes aggregate over the passes that returned them.
    """
    names = list(columns) if columns is not None else list(record.scores)
    if not names:
        raise EmptyIterations("no columns to aggregate")
    out: dict[str, tuple[float, float, float]] = {}
    for name in names:
        scores = record.scores.get(name, [])
        if not scores:
            record.flags.append(f"no_iterations_zeroed: {name}")
            out[name] = (0.0, 0.0, 0.0)
        else:
            out[name] = aggregate_scores(scores)
    return out


def embedding_similarity(question_vec: np.ndarray,
                         column_vecs: Mapping[str, np.ndarray]) -> dict[str, float]:
    """Raw cosine between the question vector and each column vector."""
    return {name: cosine(question_vec, vec) for name, vec in column_vecs.items()}


def column_text(header: str, description: str) -> str:
    return f"{header}: {description}"


def minmax_normalize(scores: Mapping[str, float]) -> dict[str, float]:
    """Min-max normalize to [0, 1]; a constant input maps everything to 0.5."""
    if not scores:
        raise KeyMismatch("no scores to normalize")
    values = list(scores.values())
    lo, hi = min(values), max(values)
    if hi == lo:
        return {name: 0.5 for name in scores}
    span = hi - lo
    return {name: (value - lo) / span for name, value in scores.items()}


def build_score_pairs(agg: Mapping[str, tuple[float, float, float]],
                      emb_norm: Mapping[str, float],
                      headers: Sequence[str],
                      emb_raw: Mapping[str, float] | None = None
                      ) -> list[ColumnScorePair]:
    """Zip aggregated LLM scores with normalized embedding scores.

    Output order is the original header order regardless of map ordering.
    """
    if set(agg) != set(emb_norm):
        raise KeyMismatch(
            f"column sets differ: {sorted(set(agg) ^ set(emb_norm))}"
        )
    missing = [h for h in headers if h not in agg]
    if missing or len(headers) != len(agg):
        raise KeyMismatch(f"headers and score maps differ: {missing}")
    pairs = []
    for header in headers:
        mu, sigma, final = agg[header]
        pairs.append(ColumnScorePair(
            column=header,
            llm_final=final,
            emb_norm=emb_norm[header],
            mu=mu,
            sigma=sigma,
            emb_raw=emb_raw.get(header, 0.0) if emb_raw else 0.0,
        ))
    return pairs
