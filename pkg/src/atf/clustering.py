"""K-means over dual-score pairs, cluster evaluation strategies, ensemble
voting, final column assembly, the L2 top-k baseline, and K diagnostics.

Cluster ids are canonical: clusters are relabeled by ascending centroid
distance from the origin (least relevant first), ties broken by the first
member's header position. Traces and picks are stable across restarts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._seeds import derive_seed
from .errors import RangeError
from .gateway.embeddings import cosine
from .scoring import ColumnScorePair

QUALITY_COHESION_WEIGHT = 0.6
QUALITY_SEPARATION_WEIGHT = 0.4
MCDM_WEIGHTS = (0.4, 0.2, 0.2, 0.2)
CONFIDENCE_WEIGHTS = (0.4, 0.4, 0.2)
INFO_DENSITY_THRESHOLD = 0.7
SIZE_MATCH_ALPHA = 0.5

AGGREGATION_KEYWORDS = ("how many", "how much", "total", "sum", "average", "mean",
                        "count", "maximum", "minimum", "highest", "lowest",
                        "most", "least")
FILTERING_KEYWORDS = ("between", "which", "greater", "more than", "less than",
                      "fewer", "under", "over", "except", "only")
LOOKUP_KEYWORDS = ("what", "who", "whom", "whose", "when", "where", "tell me",
                   "name of", "give me")
CONJUNCTIONS = ("and", "or", "but")
COMPARATIVES = ("than", "more", "less", "greater", "fewer", "higher", "lower",
                "bigger", "smaller", "earlier", "later")


# --------------------------------------------------------------- k-means

@dataclass
class ClusterModel:
    columns: tuple[str, ...]
    points: np.ndarray
    k: int
    assignments: dict[str, int]
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k_effective(self) -> int:
        return len(self.centroids)

    def members(self, cluster_id: int) -> list[str]:
        return [c for c in self.columns if self.assignments[c] == cluster_id]

    def labels(self) -> np.ndarray:
        return np.array([self.assignments[c] for c in self.columns])


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = len(points)
    chosen = [int(rng.integers(m))]
    for _ in range(1, k):
        d2 = np.min(
            ((points[:, None, :] - points[chosen][None, :, :]) ** 2).sum(axis=2),
            axis=1,
        )
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining points coincide with a center; take the first unused
            remaining = [i for i in range(m) if i not in chosen]
            chosen.append(remaining[0] if remaining else chosen[-1])
            continue
        r = rng.random() * total
        chosen.append(int(np.searchsorted(np.cumsum(d2), r, side="right").clip(0, m - 1)))
    return points[chosen].copy()


def _lloyd(points: np.ndarray, centers: np.ndarray,
           max_iter: int) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    k = len(centers)
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        # repair empty clusters with the point farthest from its center
        for j in range(k):
            if not (new_labels == j).any():
                far = int(d2[np.arange(len(points)), new_labels].argmax())
                new_labels[far] = j
                d2[far, :] = np.inf
                d2[far, j] = 0.0
        history.append(float(d2.min(axis=1)[np.isfinite(d2.min(axis=1))].sum())
                       if np.isinf(d2).any() else float(d2.min(axis=1).sum()))
        if labels is not None and (new_labels == labels).all():
            break
        labels = new_labels
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    for j in range(k):
        if (labels == j).any():
            centers[j] = points[labels == j].mean(axis=0)
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, centers, inertia, history


def _canonicalize(columns: Sequence[str], points: np.ndarray, labels: np.ndarray,
                  centers: np.ndarray) -> tuple[dict[str, int], np.ndarray]:
    used = sorted(set(int(l) for l in labels))
    first_member = {j: min(i for i, l in enumerate(labels) if l == j) for j in used}
    order = sorted(used, key=lambda j: (round(float(np.linalg.norm(centers[j])), 12),
                                        first_member[j]))
    relabel = {old: new for new, old in enumerate(order)}
    assignments = {columns[i]: relabel[int(labels[i])] for i in range(len(columns))}
    new_centers = np.stack([centers[old] for old in order])
    return assignments, new_centers


def kmeans_2d(pairs: Sequence[ColumnScorePair], k: int = 3, seed: int = 42,
              restarts: int = 10, max_iter: int = 100) -> ClusterModel:
    """Seeded k-means++ with Lloyd iteration; best inertia over restarts.

    With at most ``k`` columns every column becomes its own cluster.
    """
    if not pairs:
        raise ValueError("need at least one score pair")
    columns = tuple(p.column for p in pairs)
    points = np.array([p.point for p in pairs], dtype=float)
    m = len(columns)
    if m <= k:
        labels = np.arange(m)
        centers = points.copy()
        assignments, centers = _canonicalize(columns, points, labels, centers)
        return ClusterModel(columns=columns, points=points, k=k,
                            assignments=assignments, centroids=centers,
                            inertia=0.0, inertia_history=[0.0])
    best: tuple[float, np.ndarray, np.ndarray, list[float]] | None = None
    for r in range(restarts):
        rng = np.random.default_rng(derive_seed(seed, "kmeans", r))
        centers = _kmeanspp_init(points, k, rng)
        labels, centers, inertia, history = _lloyd(points, centers, max_iter)
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, labels, centers, history)
    inertia, labels, centers, history = best
    assignments, centers = _canonicalize(columns, points, labels, centers)
    return ClusterModel(columns=columns, points=points, k=k,
                        assignments=assignments, centroids=centers,
                        inertia=inertia, inertia_history=history)


# ---------------------------------------------------- quality & strategies

@dataclass(frozen=True)
class ClusterQuality:
    cohesion: float
    separation: float
    q: float


def cluster_quality(model: ClusterModel) -> dict[int, ClusterQuality]:
    """Cohesion 1/(1+mean member distance); separation = nearest-centroid
    distance scaled by the score-space diameter sqrt(2), clamped to [0, 1]."""
    out: dict[int, ClusterQuality] = {}
    k = model.k_effective
    for j in range(k):
        members = model.members(j)
        pts = model.points[[model.columns.index(c) for c in members]]
        mean_dist = float(np.linalg.norm(pts - model.centroids[j], axis=1).mean())
        cohesion = 1.0 / (1.0 + mean_dist)
        if k == 1:
            separation = 0.0
        else:
            dists = [float(np.linalg.norm(model.centroids[j] - model.centroids[o]))
                     for o in range(k) if o != j]
            separation = min(1.0, max(0.0, min(dists) / math.sqrt(2.0)))
        q = QUALITY_COHESION_WEIGHT * cohesion + QUALITY_SEPARATION_WEIGHT * separation
        out[j] = ClusterQuality(cohesion=cohesion, separation=separation, q=q)
    return out


@dataclass(frozen=True)
class QuestionComplexity:
    q_c: int
    features: dict[str, int]


def _count_words(text: str, words: Sequence[str]) -> int:
    return sum(len(re.findall(rf"\b{re.escape(w)}\b", text)) for w in words)


def _count_phrases(text: str, phrases: Sequence[str]) -> int:
    total = 0
    for p in phrases:
        if " " in p:
            total += text.count(p)
        else:
            total += len(re.findall(rf"\b{re.escape(p)}\b", text))
    return total


def estimate_question_complexity(question: str) -> QuestionComplexity:
    """Small-integer complexity from surface features, clamped to [1, 4]."""
    q = question.lower()
    features = {
        "conjunctions": _count_words(q, CONJUNCTIONS),
        "comparatives": _count_words(q, COMPARATIVES),
        "aggregations": _count_phrases(q, AGGREGATION_KEYWORDS),
        "numerics": len(re.findall(r"\d+(?:\.\d+)?", q)),
    }
    raw = 1 + sum(features.values())
    return QuestionComplexity(q_c=max(1, min(4, raw)), features=features)


def classify_question_type(question: str) -> str:
    """Keyword classification into aggregation / filtering / lookup / exploration."""
    q = question.lower()
    if _count_phrases(q, AGGREGATION_KEYWORDS):
        return "aggregation"
    if _count_phrases(q, FILTERING_KEYWORDS):
        return "filtering"
    if _count_phrases(q, LOOKUP_KEYWORDS):
        return "lookup"
    return "exploration"


def optimal_cluster_size(q_c: int) -> int:
    return min(3 * q_c, 10)


def score_semantic(model: ClusterModel, question_vec: np.ndarray,
                   member_vecs: Mapping[str, np.ndarray],
                   quality: Mapping[int, ClusterQuality]) -> dict[int, float]:
    """Question-to-cluster text similarity weighted by cluster quality.

    The cluster vector is the mean of its members' text embeddings; cosines
    are clamped to [0, 1] before weighting.
    """
    out: dict[int, float] = {}
    for j in range(model.k_effective):
        vecs = [member_vecs[c] for c in model.members(j)]
        centroid_vec = np.mean(vecs, axis=0)
        sim = max(0.0, min(1.0, cosine(question_vec, centroid_vec)))
        out[j] = sim * quality[j].q
    return out


def _header_tokens(header: str) -> list[str]:
    spaced = header.replace("_", " ")
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", spaced)
    return [t.lower() for t in re.findall(r"[A-Za-z0-9]+", spaced)]


def score_mcdm(model: ClusterModel, pairs: Sequence[ColumnScorePair],
               complexity: QuestionComplexity,
               info_threshold: float = INFO_DENSITY_THRESHOLD,
               size_alpha: float = SIZE_MATCH_ALPHA
               ) -> tuple[dict[int, float], dict[int, dict[str, float]]]:
    """Weighted relevance / lexical diversity / info density / size match."""
    mean_score = {p.column: p.mean_score for p in pairs}
    target = optimal_cluster_size(complexity.q_c)
    w1, w2, w3, w4 = MCDM_WEIGHTS
    scores: dict[int, float] = {}
    components: dict[int, dict[str, float]] = {}
    for j in range(model.k_effective):
        members = model.members(j)
        size = len(members)
        relevance = sum(mean_score[c] for c in members) / size
        prefixes = {(_header_tokens(c) or [c.lower()])[0] for c in members}
        suffixes = {(_header_tokens(c) or [c.lower()])[-1] for c in members}
        diversity = (len(prefixes) + len(suffixes)) / (2.0 * size + 1e-6)
        density = sum(1 for c in members if mean_score[c] > info_threshold) / size
        size_match = 1.0 / (1.0 + size_alpha * abs(size - target))
        scores[j] = w1 * relevance + w2 * diversity + w3 * density + w4 * size_match
        components[j] = {
            "relevance": relevance,
            "diversity": diversity,
            "info_density": density,
            "size_match": size_match,
        }
    return scores, components


@dataclass(frozen=True)
class ConfidenceVerdict:
    conf: dict[int, float]
    components: dict[int, dict[str, float]]
    tau: float
    candidates: tuple[int, ...]
    pick: int


def type_prior(question_type: str, cluster_size: int) -> float:
    if question_type == "aggregation":
        return min(cluster_size / 5.0, 1.0)
    if question_type == "lookup":
        return 1.0 / cluster_size
    return 0.5


def score_confidence(model: ClusterModel, pairs: Sequence[ColumnScorePair],
                     question_type: str) -> ConfidenceVerdict:
    """Consistency / strength / type-prior confidence with dynamic threshold.

    tau = mean - 0.5 * std over cluster confidences; clusters above tau are
    candidates, and with no candidates the single most confident cluster wins.
    """
    mean_score = {p.column: p.mean_score for p in pairs}
    wc, ws, wt = CONFIDENCE_WEIGHTS
    conf: dict[int, float] = {}
    components: dict[int, dict[str, float]] = {}
    for j in range(model.k_effective):
        members = model.members(j)
        values = [mean_score[c] for c in members]
        mu = sum(values) / len(values)
        var = sum((v - mu) ** 2 for v in values) / len(values)
        consistency = 1.0 / (1.0 + var)
        strength = mu
        prior = type_prior(question_type, len(members))
        conf[j] = wc * consistency + ws * strength + wt * prior
        components[j] = {"consistency": consistency, "strength": strength,
                         "type_prior": prior}
    values = list(conf.values())
    mu = sum(values) / len(values)
    sigma = math.sqrt(sum((v - mu) ** 2 for v in values) / len(values))
    tau = mu - 0.5 * sigma
    candidates = tuple(j for j in sorted(conf) if conf[j] > tau)
    pool = candidates if candidates else tuple(sorted(conf))
    pick = max(pool, key=lambda j: (conf[j], -j))
    return ConfidenceVerdict(conf=conf, components=components, tau=tau,
                             candidates=candidates, pick=pick)


# --------------------------------------------------------------- ensemble

def ensemble_vote(verdicts: Sequence[tuple[str, int, float]]) -> tuple[int, bool]:
    """Majority vote over strategy picks.

    A strict mode wins outright. With a three-way disagreement the pick with
    the highest (normalized) strategy score wins and the tie-break is flagged;
    the result never depends on verdict order.
    """
    counts: dict[int, int] = {}
    for _, cluster, _ in verdicts:
        counts[cluster] = counts.get(cluster, 0) + 1
    top = max(counts.values())
    if top >= 2:
        winners = [c for c, n in counts.items() if n == top]
        return min(winners), False
    best = max(verdicts, key=lambda v: (v[2], -v[1]))
    return best[1], True


def normalize_strategy_scores(scores: Mapping[int, float]) -> dict[int, float]:
    values = list(scores.values())
    lo, hi = min(values), max(values)
    if hi == lo:
        return {j: 0.5 for j in scores}
    return {j: (v - lo) / (hi - lo) for j, v in scores.items()}


def assemble_final_columns(winner: int, model: ClusterModel,
                           pairs: Sequence[ColumnScorePair],
                           essential: Sequence[str],
                           k_other: int = 1) -> tuple[list[str], list[str]]:
    """Merge the winning cluster, the top columns of the other clusters, and
    the essential columns.

    Returns ``(final, selection_order)``: ``final`` follows original header
    order; ``selection_order`` records how columns entered the set (winner
    members, then per-cluster picks, then essential additions).
    """
    mean_score = {p.column: p.mean_score for p in pairs}
    header_pos = {c: i for i, c in enumerate(model.columns)}
    selection_order = list(model.members(winner))
    for j in range(model.k_effective):
        if j == winner:
            continue
        ranked = sorted(model.members(j),
                        key=lambda c: (-mean_score[c], header_pos[c]))
        for c in ranked[:max(0, k_other)]:
            if c not in selection_order:
                selection_order.append(c)
    for c in essential:
        if c in header_pos and c not in selection_order:
            selection_order.append(c)
    final = sorted(selection_order, key=lambda c: header_pos[c])
    return final, selection_order


def topk_l2_baseline(pairs: Sequence[ColumnScorePair]) -> list[str]:
    """Rank columns by the L2 norm of their score pair and keep the head.

    Fewer than 3 columns: keep all. Fewer than 10: keep 3. Otherwise keep the
    top 40% (ceil). Ties break toward the earlier header.
    """
    m = len(pairs)
    if m == 0:
        raise ValueError("need at least one score pair")
    keep = m if m < 3 else 3 if m < 10 else math.ceil(0.4 * m)
    norms = [(math.hypot(p.llm_final, p.emb_norm), i) for i, p in enumerate(pairs)]
    ranked = sorted(range(m), key=lambda i: (-norms[i][0], i))
    kept = sorted(ranked[:keep])
    return [pairs[i].column for i in kept]


# ------------------------------------------------------------ diagnostics

def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette with Euclidean distance; singleton clusters score 0."""
    n = len(points)
    dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    values = []
    for i in range(n):
        own = labels == labels[i]
        n_own = int(own.sum())
        if n_own <= 1:
            values.append(0.0)
            continue
        a = dists[i, own].sum() / (n_own - 1)
        b = min(dists[i, labels == other].mean()
                for other in set(labels.tolist()) if other != labels[i])
        denom = max(a, b)
        values.append(0.0 if denom == 0 else (b - a) / denom)
    return float(np.mean(values))


@dataclass(frozen=True)
class KDiagnostics:
    inertia: float
    silhouette: float


def k_diagnostics(pairs: Sequence[ColumnScorePair], k_values: Sequence[int],
                  seed: int = 42, restarts: int = 10) -> dict[int, KDiagnostics]:
    """Inertia and mean silhouette per candidate K (elbow/silhouette data)."""
    m = len(pairs)
    out: dict[int, KDiagnostics] = {}
    for k in k_values:
        if not 2 <= k <= m - 1:
            raise RangeError(f"K={k} outside [2, {m - 1}] for {m} columns")
        model = kmeans_2d(pairs, k=k, seed=seed, restarts=restarts)
        out[k] = KDiagnostics(
            inertia=model.inertia,
            silhouette=silhouette_score(model.points, model.labels()),
        )
    return out
