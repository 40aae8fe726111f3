"""Per-topic ideological embeddings for users and posts.

Learned from the user-post interaction bipartite graph with nonnegative
logistic matrix factorization: observed edges are positives, sampled
non-edges negatives, and the probability of an edge is the sigmoid of the
user/post inner product. Vectors are projected to the nonnegative orthant
after every step so the argmax component reads as a side (pro/anti).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

UNDETERMINED = "undetermined"

DEFAULT_SIDE_NAMES = ("pro", "anti")


class TrainingError(Exception):
    pass


@dataclass
class InteractionGraph:
    users: list[str]
    posts: list[str]
    edges: list[tuple[str, str]]
    topic: str = ""

    def __post_init__(self) -> None:
        user_set, post_set = set(self.users), set(self.posts)
        for user, post in self.edges:
            if user not in user_set or post not in post_set:
                raise ValueError(f"edge ({user}, {post}) references unknown node")

    @classmethod
    def from_edges(cls, edges: list[tuple[str, str]], topic: str = "") -> "InteractionGraph":
        users = sorted({u for u, _ in edges})
        posts = sorted({p for _, p in edges})
        return cls(users=users, posts=posts, edges=list(edges), topic=topic)


@dataclass
class TrainConfig:
    d_prime: int = 2
    epochs: int = 200
    learning_rate: float = 5.0
    negative_ratio: int = 5
    # total loss mass of the negative class relative to the positives;
    # spreading it over negative_ratio x |E| samples reduces variance without
    # letting sampled non-edges swamp low-degree nodes
    negative_mass: float = 0.25
    init_iterations: int = 300
    seed: int = 0
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.d_prime < 2:
            raise ValueError("d_prime must be >= 2")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class IdeologyEmbedding:
    user_vectors: dict[str, np.ndarray]
    post_vectors: dict[str, np.ndarray]
    topic: str
    d_prime: int
    loss_trace: list[float] = field(default_factory=list)

    def post_vector(self, post_id: str) -> np.ndarray:
        """Zero vector for posts with no interactions."""
        return self.post_vectors.get(post_id, np.zeros(self.d_prime))

    def export_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for kind, table in (("user", self.user_vectors), ("post", self.post_vectors)):
                for node_id in sorted(table):
                    fh.write(
                        json.dumps(
                            {
                                "id": node_id,
                                "kind": kind,
                                "topic": self.topic,
                                "vector": table[node_id].tolist(),
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def _sample_negatives(
    n_users: int, n_posts: int, edges: set[tuple[int, int]], count: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    total_pairs = n_users * n_posts
    free = total_pairs - len(edges)
    if free <= 0 or count <= 0:
        return []
    count = min(count, free)
    negatives: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(negatives) < count:
        u = int(rng.integers(n_users))
        p = int(rng.integers(n_posts))
        if (u, p) in edges or (u, p) in seen:
            continue
        seen.add((u, p))
        negatives.append((u, p))
    return negatives


def _nmf_init(
    n_users: int,
    n_posts: int,
    edges: list[tuple[int, int]],
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Multiplicative-update NMF of the adjacency matrix.

    Aligns the factors with the graph's block structure before the logistic
    objective takes over; random init alone routinely lands in component-
    mixing local minima.
    """
    A = np.zeros((n_users, n_posts))
    for u, p in edges:
        A[u, p] = 1.0
    W = rng.uniform(0.1, 1.0, size=(n_users, config.d_prime))
    H = rng.uniform(0.1, 1.0, size=(config.d_prime, n_posts))
    for _ in range(config.init_iterations):
        W *= (A @ H.T) / np.maximum(W @ (H @ H.T), 1e-9)
        H *= (W.T @ A) / np.maximum((W.T @ W) @ H, 1e-9)
    return W, H.T.copy()


def train_topic_embeddings(graph: InteractionGraph, config: TrainConfig) -> IdeologyEmbedding:
    """Fit nonnegative embeddings by projected gradient descent.

    Negatives are sampled once (seeded) so the objective is fixed; the step
    size backtracks whenever a step would increase the loss, making the
    per-epoch loss trace nonincreasing.
    """
    if not graph.edges:
        raise TrainingError("graph has no edges")
    user_index = {u: i for i, u in enumerate(graph.users)}
    post_index = {p: j for j, p in enumerate(graph.posts)}
    edge_idx = {(user_index[u], post_index[p]) for u, p in graph.edges}
    degree_users = {i for i, _ in edge_idx}
    degree_posts = {j for _, j in edge_idx}
    if len(degree_users) < len(graph.users) or len(degree_posts) < len(graph.posts):
        raise TrainingError("every node must have degree >= 1")

    rng = np.random.default_rng(config.seed)
    negatives = _sample_negatives(
        len(graph.users),
        len(graph.posts),
        edge_idx,
        config.negative_ratio * len(edge_idx),
        rng,
    )
    pairs = sorted(edge_idx) + negatives
    ui = np.array([u for u, _ in pairs], dtype=np.int64)
    pj = np.array([p for _, p in pairs], dtype=np.int64)
    labels = np.concatenate([np.ones(len(edge_idx)), np.zeros(len(negatives))])
    neg_weight = config.negative_mass / max(config.negative_ratio, 1)
    weights = np.concatenate(
        [np.ones(len(edge_idx)), np.full(len(negatives), neg_weight)]
    )
    weights /= weights.sum()

    U, M = _nmf_init(
        len(graph.users), len(graph.posts), sorted(edge_idx), config, rng
    )
    # scale so that edge scores start at sigmoid ~2/3, inside the useful range
    edge_scores = np.sum(U[ui[: len(edge_idx)]] * M[pj[: len(edge_idx)]], axis=1)
    scale = np.sqrt(np.log(2.0) / max(float(edge_scores.mean()), 1e-9))
    U *= scale
    M *= scale

    def loss_of(Umat: np.ndarray, Mmat: np.ndarray) -> float:
        probs = _sigmoid(np.sum(Umat[ui] * Mmat[pj], axis=1))
        eps = 1e-12
        return float(
            -np.sum(
                weights
                * (labels * np.log(probs + eps) + (1 - labels) * np.log(1 - probs + eps))
            )
        )

    lr = config.learning_rate
    trace = [loss_of(U, M)]
    for _ in range(config.epochs):
        probs = _sigmoid(np.sum(U[ui] * M[pj], axis=1))
        residual = ((probs - labels) * weights)[:, None]
        grad_u = np.zeros_like(U)
        grad_m = np.zeros_like(M)
        np.add.at(grad_u, ui, residual * M[pj])
        np.add.at(grad_m, pj, residual * U[ui])
        step = lr
        accepted = False
        for backtracks in range(30):
            # clip keeps scores finite; sigmoid saturates long before 50
            U_new = np.clip(U - step * grad_u, 0.0, 50.0)
            M_new = np.clip(M - step * grad_m, 0.0, 50.0)
            new_loss = loss_of(U_new, M_new)
            if new_loss <= trace[-1] + config.tolerance:
                U, M = U_new, M_new
                trace.append(min(new_loss, trace[-1]))
                # grow the step while it keeps being accepted outright
                lr = min(step * (1.5 if backtracks == 0 else 1.0), 1e6)
                accepted = True
                break
            step /= 2.0
        if not accepted:
            trace.append(trace[-1])
        if not np.isfinite(trace[-1]):
            raise TrainingError(f"loss diverged to {trace[-1]}")

    return IdeologyEmbedding(
        user_vectors={u: U[i].copy() for u, i in user_index.items()},
        post_vectors={p: M[j].copy() for p, j in post_index.items()},
        topic=graph.topic,
        d_prime=config.d_prime,
        loss_trace=trace,
    )


def pad_to_global(embedding: IdeologyEmbedding, topic_order: list[str]) -> dict[str, np.ndarray]:
    """Place each post vector into its topic's slot of a d'*T-wide vector."""
    if embedding.topic not in topic_order:
        raise ValueError(f"topic {embedding.topic!r} not in topic order")
    slot = topic_order.index(embedding.topic)
    width = embedding.d_prime * len(topic_order)
    padded: dict[str, np.ndarray] = {}
    for post_id, vector in embedding.post_vectors.items():
        out = np.zeros(width)
        out[slot * embedding.d_prime : (slot + 1) * embedding.d_prime] = vector
        padded[post_id] = out
    return padded


def side_of(vector: np.ndarray, side_names: tuple[str, ...] = DEFAULT_SIDE_NAMES) -> tuple[str, float]:
    """Side label from the argmax component (ties to the lowest index)."""
    vector = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(vector)) or np.any(vector < 0):
        raise ValueError("vector must be finite and nonnegative")
    if np.all(vector == 0):
        return UNDETERMINED, 0.0
    index = int(np.argmax(vector))
    top_two = np.sort(vector)[::-1][:2]
    margin = float(top_two[0] - top_two[1]) if vector.size > 1 else float(top_two[0])
    name = side_names[index] if index < len(side_names) else f"side_{index}"
    return name, margin
