import numpy as np
import pytest

from respcast.corpus import Corpus
from respcast.dense_index import DenseIndex
from respcast.gateways import EmbeddingRequest, MockEmbeddingGateway, OfflineChatGateway
from respcast.ideology import IdeologyEmbedding
from respcast.sparse_index import SparseEncoderProfile, SparseIndex, encode_sparse

PRO_WORDS = ["resistance", "solidarity", "freedom", "support", "heroic", "struggle", "liberation"]
ANTI_WORDS = ["terror", "condemn", "violence", "propaganda", "dangerous", "threat", "hostages"]


def build_synthetic_records(
    n_replies_per_side: int = 50, seed: int = 1, topic: str = "gaza", shared_vocab: bool = False
):
    """Two root posts, each with replies written in two distinct ideological
    vocabularies. With ``shared_vocab`` both sides draw from one word pool,
    so only the ideology signal can separate them. Returns
    (records, pro_ids, anti_ids)."""
    rng = np.random.default_rng(seed)
    records = [
        {
            "id": "root1",
            "author_id": "u_root1",
            "topic": topic,
            "text": "Ceasefire negotiations continue in the region as fighting escalates.",
            "timestamp": 100.0,
        },
        {
            "id": "root2",
            "author_id": "u_root2",
            "topic": topic,
            "text": "Military operation expands in the conflict zone near the border.",
            "timestamp": 110.0,
        },
    ]
    pro_ids, anti_ids = [], []
    n = 0
    per_root = n_replies_per_side // 2
    for root in ("root1", "root2"):
        for i in range(per_root):
            pools = (
                (("pro", PRO_WORDS, pro_ids), ("anti", PRO_WORDS, anti_ids))
                if shared_vocab
                else (("pro", PRO_WORDS, pro_ids), ("anti", ANTI_WORDS, anti_ids))
            )
            for side, words, bucket in pools:
                n += 1
                chosen = rng.choice(words, size=4, replace=True)
                post_id = f"p{n}_{side}"
                records.append(
                    {
                        "id": post_id,
                        "author_id": f"u_{side}_{i % 6}",
                        "topic": topic,
                        "parent_id": root,
                        "text": f"I think this shows {' '.join(chosen)} in the conflict.",
                        "timestamp": 120.0 + n,
                    }
                )
                bucket.append(post_id)
    return records, pro_ids, anti_ids


def build_planted_ideology(pro_ids, anti_ids, topic: str = "gaza") -> IdeologyEmbedding:
    vectors = {}
    for pid in pro_ids:
        vectors[pid] = np.array([1.5, 0.1])
    for pid in anti_ids:
        vectors[pid] = np.array([0.1, 1.5])
    return IdeologyEmbedding(user_vectors={}, post_vectors=vectors, topic=topic, d_prime=2)


def build_engine_parts(n_replies_per_side: int = 50, seed: int = 1, shared_vocab: bool = False):
    """Corpus + dense index + mock gateways + sparse stores for one topic."""
    records, pro_ids, anti_ids = build_synthetic_records(
        n_replies_per_side, seed, shared_vocab=shared_vocab
    )
    corpus = Corpus()
    stats = corpus.ingest_posts(records)
    assert not stats.rejected
    embed = MockEmbeddingGateway()
    chat = OfflineChatGateway()
    index = DenseIndex(dimension=64)
    for post in sorted(corpus.posts(), key=lambda p: p.id):
        doc = corpus.augment(post.id)
        index.insert(
            post.id,
            embed.embed_dense(EmbeddingRequest(text=doc.rendered)),
            topic=doc.topic,
            timestamp=doc.timestamp,
        )
    profile = SparseEncoderProfile()
    news = SparseIndex()
    news.insert(
        "news#s0",
        encode_sparse("ceasefire talks conflict region negotiations", profile),
        timestamp=90.0,
    )
    kg = SparseIndex()
    kg.insert(
        "Gaza City#c0",
        encode_sparse("Facts about Gaza City: Gaza City located in conflict zone", profile),
        timestamp=90.0,
    )
    return {
        "corpus": corpus,
        "dense_index": index,
        "embed": embed,
        "chat": chat,
        "news_index": news,
        "kg_index": kg,
        "profile": profile,
        "ideology": build_planted_ideology(pro_ids, anti_ids),
        "pro_ids": pro_ids,
        "anti_ids": anti_ids,
    }


@pytest.fixture
def engine_parts():
    return build_engine_parts()


def planted_bipartite(n_users: int = 100, n_posts: int = 100, seed: int = 0):
    """Two-block bipartite graph: users and posts split into halves, each
    user linked to posts of its own block. Returns (edges, post_side)."""
    rng = np.random.default_rng(seed)
    edges = []
    post_side = {}
    for block in (0, 1):
        users = [f"u{block}_{i}" for i in range(n_users // 2)]
        posts = [f"p{block}_{j}" for j in range(n_posts // 2)]
        for post in posts:
            post_side[post] = block
        for user in users:
            chosen = rng.choice(len(posts), size=6, replace=False)
            for j in chosen:
                edges.append((user, posts[j]))
        # make sure every post has at least one edge
        for j, post in enumerate(posts):
            edges.append((users[j % len(users)], post))
    return sorted(set(edges)), post_side


def gaussian_blobs(sizes, centers, dim, sigma=1.0, seed=0):
    rng = np.random.default_rng(seed)
    parts, labels = [], []
    for label, (size, center) in enumerate(zip(sizes, centers)):
        block = rng.normal(0.0, sigma, (size, dim))
        block[:, : len(center)] += np.asarray(center)
        parts.append(block)
        labels.extend([label] * size)
    return np.vstack(parts), np.array(labels)
