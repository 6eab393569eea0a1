"""Embedding backends: seeded feature-hashing (offline) and fixture replay."""

from __future__ import annotations

import zlib
from typing import Protocol, Sequence

import numpy as np

from ..errors import BackendError


class EmbeddingBackend(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def _l2_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


class HashingEmbedder:
    """Seeded feature hashing of character 3-grams into a fixed dimension.

    Deterministic across processes (crc32, not Python's salted hash); unit
    L2 norm per vector. A shared gram table keeps repeated grams cheap.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._salt = f"{seed}:".encode("utf-8")
        self._gram_slots: dict[str, tuple[int, float]] = {}

    def _slot(self, gram: str) -> tuple[int, float]:
        cached = self._gram_slots.get(gram)
        if cached is None:
            h = zlib.crc32(self._salt + gram.encode("utf-8"))
            cached = (h % self.dim, 1.0 if (h >> 17) & 1 else -1.0)
            self._gram_slots[gram] = cached
        return cached

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise BackendError("embed called with no texts")
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            t = text.lower()
            grams = [t[i:i + 3] for i in range(len(t) - 2)] if len(t) >= 3 else ([t] if t else [])
            for gram in grams:
                idx, sign = self._slot(gram)
                out[row, idx] += sign
        return _l2_rows(out)


class FixtureEmbedder:
    """Replays recorded text -> vector pairs; unrecorded text is a hard error."""

    def __init__(self, mapping: dict[str, list[float]]):
        if not mapping:
            raise BackendError("fixture embedder has no recorded vectors")
        self._mapping = {k: np.asarray(v, dtype=float) for k, v in mapping.items()}
        self.dim = len(next(iter(self._mapping.values())))

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for text in texts:
            vec = self._mapping.get(text)
            if vec is None:
                raise BackendError(f"no recorded embedding for text: {text[:60]!r}")
            rows.append(vec)
        return _l2_rows(np.stack(rows))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))
