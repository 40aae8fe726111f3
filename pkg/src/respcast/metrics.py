"""Evaluation metrics: emotion distribution divergence, LLM
discrimination score, and cluster matching/coverage of predictions
against held-out real responses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .community import Community, combine, discover_communities
from .gateways import ChatRequest, EmbeddingRequest
from .reducer import EmbeddingReducer

EMOTIONS = (
    "joy",
    "trust",
    "fear",
    "surprise",
    "sadness",
    "disgust",
    "anger",
    "anticipation",
)

EMOTION_SYSTEM_PROMPT = (
    "You label the emotions expressed in a social media reply using exactly "
    "these eight emotions: " + ", ".join(EMOTIONS) + ". Answer with a "
    "comma-separated list of the matching emotions, nothing else."
)

DISCRIMINATION_SYSTEM_PROMPT = (
    "You rate how likely a candidate reply is to be another real reply from "
    "the same conversation, given real examples. Answer with a single "
    "integer on a scale from 1 to 10, nothing else."
)

DEFAULT_EXAMPLE_COUNT = 10


class MetricError(Exception):
    pass


@dataclass
class EmotionDistribution:
    weights: dict[str, float]
    flagged_uniform: bool = False
    skipped_responses: int = 0

    def __post_init__(self) -> None:
        if set(self.weights) != set(EMOTIONS):
            raise ValueError("distribution must cover exactly the eight emotions")
        total = sum(self.weights.values())
        if any(w < 0 for w in self.weights.values()) or abs(total - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.weights[e] for e in EMOTIONS])


@dataclass
class ClusterMetric:
    pct: float
    upper_bound_pct: float | None = None
    undefined: bool = False
    matched_ids: list[int] = field(default_factory=list)


@dataclass
class EvalReport:
    emotion_jsd: float | None = None
    discrimination_mean: float | None = None
    discrimination_failures: int = 0
    cluster_matching: ClusterMetric | None = None
    cluster_coverage: ClusterMetric | None = None

    def to_dict(self) -> dict:
        return {
            "emotion_jsd": self.emotion_jsd,
            "discrimination_mean": self.discrimination_mean,
            "discrimination_failures": self.discrimination_failures,
            "cluster_matching_pct": self.cluster_matching.pct if self.cluster_matching else None,
            "cluster_matching_upper_bound_pct": (
                self.cluster_matching.upper_bound_pct if self.cluster_matching else None
            ),
            "cluster_coverage_pct": self.cluster_coverage.pct if self.cluster_coverage else None,
        }


def _parse_emotions(text: str) -> list[str]:
    found = []
    for token in re.split(r"[,\n]", text.lower()):
        token = token.strip().strip(".")
        if token in EMOTIONS and token not in found:
            found.append(token)
    return found


def emotion_distribution(responses: list[str], chat_gateway) -> EmotionDistribution:
    """Multi-label emotion counts over responses, normalized. Responses
    whose extraction yields no recognizable emotion are skipped and counted."""
    if not responses:
        raise MetricError("need at least one response")
    counts = {e: 0.0 for e in EMOTIONS}
    skipped = 0
    for text in responses:
        result = chat_gateway.chat_complete(
            ChatRequest(
                system_prompt=EMOTION_SYSTEM_PROMPT,
                user_prompt=f"Reply:\n{text}",
                temperature=0.0,
            )
        )
        labels = _parse_emotions(result.text)
        if not labels:
            skipped += 1
            continue
        for label in labels:
            counts[label] += 1.0
    total = sum(counts.values())
    if total == 0:
        return EmotionDistribution(
            weights={e: 1.0 / len(EMOTIONS) for e in EMOTIONS},
            flagged_uniform=True,
            skipped_responses=skipped,
        )
    return EmotionDistribution(
        weights={e: c / total for e, c in counts.items()}, skipped_responses=skipped
    )


def emotion_jsd(p: EmotionDistribution, q: EmotionDistribution) -> float:
    """Jensen-Shannon divergence with base-2 logarithms, bounded by 1."""
    P, Q = p.as_array(), q.as_array()
    M = (P + Q) / 2.0

    def kl(a: np.ndarray, b: np.ndarray) -> float:
        mask = a > 0
        # b >= a/2 wherever a > 0, but subnormal weights can underflow
        safe_b = np.maximum(b[mask], np.finfo(np.float64).tiny)
        return float(np.sum(a[mask] * np.log2(a[mask] / safe_b)))

    value = 0.5 * kl(P, M) + 0.5 * kl(Q, M)
    return float(min(max(value, 0.0), 1.0))


def select_real_examples(
    real_texts: list[str], popularity: list[int], n: int = DEFAULT_EXAMPLE_COUNT
) -> list[str]:
    """Real responses ordered by popularity descending, ties to the longer
    text, then lexicographic for stability."""
    if len(real_texts) != len(popularity):
        raise ValueError("texts and popularity lengths must match")
    order = sorted(
        range(len(real_texts)),
        key=lambda i: (-popularity[i], -len(real_texts[i]), real_texts[i]),
    )
    return [real_texts[i] for i in order[:n]]


def discrimination_score(
    predicted: list[str], real_examples: list[str], chat_gateway
) -> tuple[float, int]:
    """Mean 1-10 plausibility rating over predictions; unparseable or
    out-of-range ratings are excluded and counted."""
    if not predicted:
        raise MetricError("need at least one predicted response")
    examples = "\n".join(f"{i + 1}. {t}" for i, t in enumerate(real_examples))
    scores: list[int] = []
    failures = 0
    for text in predicted:
        result = chat_gateway.chat_complete(
            ChatRequest(
                system_prompt=DISCRIMINATION_SYSTEM_PROMPT,
                user_prompt=(
                    f"Real example replies:\n{examples}\n\n"
                    f"Candidate reply:\n{text}\n\n"
                    "Rate the candidate on a scale from 1 to 10."
                ),
                temperature=0.0,
            )
        )
        match = re.search(r"\b(\d{1,2})\b", result.text)
        if not match or not 1 <= int(match.group(1)) <= 10:
            failures += 1
            continue
        scores.append(int(match.group(1)))
    if not scores:
        raise MetricError("no discrimination ratings could be parsed")
    return float(np.mean(scores)), failures


def _cluster_radii(
    communities: list[Community],
    vectors: dict[str, np.ndarray],
    rule: str,
) -> list[tuple[np.ndarray, float]]:
    out = []
    for comm in communities:
        if comm.kind != "density_cluster":
            continue
        center = vectors[comm.medoid]
        dists = np.array([np.linalg.norm(vectors[m] - center) for m in comm.members])
        radius = float(np.percentile(dists, 95)) if rule == "p95" else float(dists.max())
        out.append((center, radius))
    return out


def cluster_matching(
    predicted_vectors: list[np.ndarray],
    real_communities: list[Community],
    real_vectors: dict[str, np.ndarray],
    rule: str = "max_radius",
) -> ClusterMetric:
    """Percent of predictions landing inside some real non-outlier cluster.

    Membership: within the cluster's member-to-medoid radius of its medoid.
    ``rule`` picks the radius (max member distance, or the 95th percentile).
    The upper bound is the non-outlier share of real responses, mirroring
    how the ceiling is reported next to the metric.
    """
    if rule not in ("max_radius", "p95"):
        raise ValueError(f"unknown membership rule {rule!r}")
    balls = _cluster_radii(real_communities, real_vectors, "p95" if rule == "p95" else "max")
    total_real = sum(c.size for c in real_communities)
    non_outlier = sum(c.size for c in real_communities if c.kind == "density_cluster")
    if not balls or total_real == 0:
        return ClusterMetric(pct=0.0, undefined=True)
    upper = non_outlier / total_real * 100.0
    matched = [
        i
        for i, vec in enumerate(predicted_vectors)
        if any(np.linalg.norm(vec - center) <= radius for center, radius in balls)
    ]
    pct = len(matched) / len(predicted_vectors) * 100.0 if predicted_vectors else 0.0
    return ClusterMetric(pct=min(pct, upper), upper_bound_pct=upper, matched_ids=matched)


def cluster_coverage(
    predicted_vectors: list[np.ndarray],
    real_communities: list[Community],
    real_vectors: dict[str, np.ndarray],
    rule: str = "max_radius",
) -> ClusterMetric:
    """Percent of real non-outlier clusters hit by at least one prediction."""
    if rule not in ("max_radius", "p95"):
        raise ValueError(f"unknown membership rule {rule!r}")
    balls = _cluster_radii(real_communities, real_vectors, "p95" if rule == "p95" else "max")
    if not balls:
        return ClusterMetric(pct=0.0, undefined=True)
    hit = 0
    for center, radius in balls:
        if any(np.linalg.norm(vec - center) <= radius for vec in predicted_vectors):
            hit += 1
    return ClusterMetric(pct=hit / len(balls) * 100.0)


def evaluate_responses(
    predicted_texts: list[str],
    real_texts: list[str],
    embed_gateway,
    chat_gateway,
    real_popularity: list[int] | None = None,
    reduced_dim: int = 8,
    seed: int = 0,
    min_cluster_size: int = 5,
    min_samples: int = 5,
    rule: str = "max_radius",
) -> EvalReport:
    """All four metrics for a predicted-vs-real response pair.

    Real responses are embedded, reduced, and clustered; predictions are
    projected into the same reduced space before the cluster metrics.
    """
    if not predicted_texts or not real_texts:
        raise MetricError("need at least one predicted and one real response")
    jsd = emotion_jsd(
        emotion_distribution(predicted_texts, chat_gateway),
        emotion_distribution(real_texts, chat_gateway),
    )
    popularity = real_popularity or [0] * len(real_texts)
    examples = select_real_examples(real_texts, popularity)
    mean_score, failures = discrimination_score(predicted_texts, examples, chat_gateway)

    real_vecs = np.stack(
        [embed_gateway.embed_dense(EmbeddingRequest(text=t)) for t in real_texts]
    )
    reducer = EmbeddingReducer(r=min(reduced_dim, real_vecs.shape[1]), seed=seed)
    real_reduced = reducer.fit_transform(real_vecs)
    real_ids = [f"r{i}" for i in range(len(real_texts))]
    zero_ideology = [np.zeros(2) for _ in real_ids]
    embeddings = combine(real_ids, real_reduced, zero_ideology, lam=0.0)
    communities = discover_communities(
        embeddings, min_cluster_size=min_cluster_size, min_samples=min_samples
    )
    vectors = {e.doc_id: e.combined for e in embeddings}

    predicted_raw = np.stack(
        [embed_gateway.embed_dense(EmbeddingRequest(text=t)) for t in predicted_texts]
    )
    predicted_reduced = reducer.transform(predicted_raw)
    predicted_vectors = [
        np.concatenate([row, np.zeros(2)]) for row in predicted_reduced
    ]

    matching = cluster_matching(predicted_vectors, communities, vectors, rule=rule)
    coverage = cluster_coverage(predicted_vectors, communities, vectors, rule=rule)
    return EvalReport(
        emotion_jsd=jsd,
        discrimination_mean=mean_score,
        discrimination_failures=failures,
        cluster_matching=matching,
        cluster_coverage=coverage,
    )
