"""Community discovery over gathered historical responses.

Semantic embeddings are reduced, concatenated with scaled ideological
vectors, clustered by density, and the noise points are regrouped by
ideological side. Each community gets a medoid and a diverse ordered set
of representatives picked by maximal marginal relevance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import hdbscan_labels
from .ideology import UNDETERMINED, side_of
from .reducer import EmbeddingReducer

DEFAULT_LAMBDA = 1.0
DEFAULT_K_C = 5
DEFAULT_LAMBDA_MMR = 0.7
DEFAULT_MIN_CLUSTER_SIZE = 5
DEFAULT_MIN_SAMPLES = 5


@dataclass
class CombinedEmbedding:
    doc_id: str
    reduced_semantic: np.ndarray
    ideology: np.ndarray
    combined: np.ndarray


@dataclass
class Community:
    id: str
    kind: str  # "density_cluster" | "outlier_side"
    members: list[str]
    medoid: str
    side_label: str = ""
    representatives: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "size": self.size,
            "medoid": self.medoid,
            "side_label": self.side_label,
            "members": list(self.members),
            "representatives": list(self.representatives),
        }


def combine(
    doc_ids: list[str],
    reduced: np.ndarray,
    ideology: list[np.ndarray],
    lam: float = DEFAULT_LAMBDA,
) -> list[CombinedEmbedding]:
    """Concatenate reduced semantics with ideology scaled by ``lam``."""
    if not (len(doc_ids) == len(reduced) == len(ideology)):
        raise ValueError("doc_ids, reduced, and ideology lengths must match")
    out = []
    for doc_id, sem, ideo in zip(doc_ids, reduced, ideology):
        sem = np.asarray(sem, dtype=np.float64)
        ideo = np.asarray(ideo, dtype=np.float64)
        combined = np.concatenate([sem, lam * ideo])
        if not np.all(np.isfinite(combined)):
            raise ValueError(f"non-finite combined embedding for {doc_id!r}")
        out.append(
            CombinedEmbedding(doc_id=doc_id, reduced_semantic=sem, ideology=ideo, combined=combined)
        )
    return out


def cluster(
    embeddings: list[CombinedEmbedding],
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    min_samples: int = DEFAULT_MIN_SAMPLES,
) -> tuple[list[list[str]], list[str]]:
    """Density clusters plus the outlier id list."""
    if not embeddings:
        return [], []
    X = np.stack([e.combined for e in embeddings])
    labels = hdbscan_labels(X, min_cluster_size=min_cluster_size, min_samples=min_samples)
    clusters: dict[int, list[str]] = {}
    outliers: list[str] = []
    for emb, label in zip(embeddings, labels):
        if label < 0:
            outliers.append(emb.doc_id)
        else:
            clusters.setdefault(int(label), []).append(emb.doc_id)
    return [clusters[k] for k in sorted(clusters)], outliers


def split_outliers(
    outlier_ids: list[str],
    ideology_of: dict[str, np.ndarray],
    side_names: tuple[str, ...] = ("pro", "anti"),
) -> dict[str, list[str]]:
    """Group outliers by the argmax side of their ideology vector; empty
    groups are omitted and all-zero vectors land in 'undetermined'."""
    groups: dict[str, list[str]] = {}
    for doc_id in outlier_ids:
        vector = ideology_of.get(doc_id)
        if vector is None:
            side = UNDETERMINED
        else:
            side, _ = side_of(vector, side_names)
        groups.setdefault(side, []).append(doc_id)
    return groups


def medoid_of(member_ids: list[str], vectors: dict[str, np.ndarray]) -> str:
    """Member minimizing total distance to co-members; ties by lowest id."""
    if not member_ids:
        raise ValueError("community is empty")
    X = np.stack([vectors[m] for m in member_ids])
    sq = np.sum(X * X, axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0))
    totals = dist.sum(axis=1)
    best = min(range(len(member_ids)), key=lambda i: (totals[i], member_ids[i]))
    return member_ids[best]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def select_representatives(
    member_ids: list[str],
    combined_of: dict[str, np.ndarray],
    semantic_of: dict[str, np.ndarray],
    medoid: str,
    k_c: int = DEFAULT_K_C,
    lambda_mmr: float = DEFAULT_LAMBDA_MMR,
) -> list[str]:
    """Greedy MMR: relevance = closeness to the medoid in combined space,
    redundancy = max cosine similarity of the semantic part to the already
    selected. The medoid itself is always picked first."""
    if not member_ids:
        return []
    k = min(k_c, len(member_ids))
    anchor = combined_of[medoid]
    selected = [medoid]
    remaining = [m for m in member_ids if m != medoid]
    while len(selected) < k and remaining:
        best_id, best_score = None, None
        for cand in remaining:
            relevance = -float(np.linalg.norm(combined_of[cand] - anchor))
            redundancy = max(_cosine(semantic_of[cand], semantic_of[s]) for s in selected)
            score = lambda_mmr * relevance - (1.0 - lambda_mmr) * redundancy
            if best_score is None or score > best_score or (
                score == best_score and cand < best_id
            ):
                best_id, best_score = cand, score
        selected.append(best_id)
        remaining.remove(best_id)
    return selected


def discover_communities(
    embeddings: list[CombinedEmbedding],
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    k_c: int = DEFAULT_K_C,
    lambda_mmr: float = DEFAULT_LAMBDA_MMR,
    side_names: tuple[str, ...] = ("pro", "anti"),
) -> list[Community]:
    """Full discovery: cluster, split outliers by side, pick medoids and
    MMR representatives. Every input doc lands in exactly one community."""
    combined_of = {e.doc_id: e.combined for e in embeddings}
    semantic_of = {e.doc_id: e.reduced_semantic for e in embeddings}
    ideology_of = {e.doc_id: e.ideology for e in embeddings}
    clusters, outliers = cluster(embeddings, min_cluster_size, min_samples)
    communities: list[Community] = []
    for i, members in enumerate(clusters):
        medoid = medoid_of(members, combined_of)
        communities.append(
            Community(
                id=f"c{i}",
                kind="density_cluster",
                members=members,
                medoid=medoid,
                representatives=select_representatives(
                    members, combined_of, semantic_of, medoid, k_c, lambda_mmr
                ),
            )
        )
    for side, members in sorted(split_outliers(outliers, ideology_of, side_names).items()):
        medoid = medoid_of(members, combined_of)
        communities.append(
            Community(
                id=f"o-{side}",
                kind="outlier_side",
                members=members,
                medoid=medoid,
                side_label=side,
                representatives=select_representatives(
                    members, combined_of, semantic_of, medoid, k_c, lambda_mmr
                ),
            )
        )
    return communities


def reduce_vectors(
    vectors: np.ndarray, r: int = 8, seed: int = 0, enabled: bool = True
) -> tuple[np.ndarray, bool]:
    """Reduction step with an ablation switch; disabled mode passes the raw
    vectors through unchanged."""
    X = np.asarray(vectors, dtype=np.float64)
    if not enabled:
        return X.copy(), False
    reducer = EmbeddingReducer(r=r, seed=seed)
    reduced = reducer.fit_transform(X)
    return reduced, reducer.degraded
