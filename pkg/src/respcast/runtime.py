"""Assembly of a ForecastEngine from configuration: constructs gateways,
loads the persisted stores that exist, and wires everything together.
"""

from __future__ import annotations

import json
import os

from .config import ConfigError, EngineConfig, GatewaySection
from .corpus import Corpus
from .dense_index import DenseIndex
from .engine import EngineSettings, ForecastEngine
from .gateways import (
    GatewayConfig,
    HttpChatGateway,
    HttpEmbeddingGateway,
    MockChatGateway,
    MockEmbeddingGateway,
    OfflineChatGateway,
)
from .ideology import IdeologyEmbedding
from .knowledge import KnowledgeStore
from .retrieval import RetrievalConfig
from .sparse_index import SparseEncoderProfile, SparseIndex

import numpy as np


def build_embedding_gateway(section: GatewaySection):
    if section.kind in ("offline", "mock"):
        return MockEmbeddingGateway(dimension=section.dimension)
    return HttpEmbeddingGateway(
        GatewayConfig(
            endpoint=section.endpoint,
            model=section.model,
            auth_env_var=section.api_key_env or None,
            rate_limit_per_second=section.rate_per_second or None,
            dimension=section.dimension,
        )
    )


def build_chat_gateway(section: GatewaySection):
    if section.kind == "offline":
        return OfflineChatGateway()
    if section.kind == "mock":
        return MockChatGateway(mode="echo")
    return HttpChatGateway(
        GatewayConfig(
            endpoint=section.endpoint,
            model=section.model,
            auth_env_var=section.api_key_env or None,
            rate_limit_per_second=section.rate_per_second or None,
        )
    )


def load_corpus(path: str) -> Corpus:
    corpus = Corpus()
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            corpus.ingest_posts(line for line in fh if line.strip())
    return corpus


def load_ideology_dir(path: str) -> dict[str, IdeologyEmbedding]:
    """One JSON-lines file per topic, as written by export_jsonl."""
    out: dict[str, IdeologyEmbedding] = {}
    if not os.path.isdir(path):
        return out
    for name in sorted(os.listdir(path)):
        if not name.endswith(".jsonl"):
            continue
        users: dict[str, np.ndarray] = {}
        posts: dict[str, np.ndarray] = {}
        topic = ""
        d_prime = 2
        with open(os.path.join(path, name), encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                vector = np.asarray(row["vector"], dtype=np.float64)
                topic = row.get("topic", topic)
                d_prime = vector.shape[0]
                (users if row["kind"] == "user" else posts)[row["id"]] = vector
        if topic:
            out[topic] = IdeologyEmbedding(
                user_vectors=users, post_vectors=posts, topic=topic, d_prime=d_prime
            )
    return out


def settings_from_config(config: EngineConfig) -> EngineSettings:
    return EngineSettings(
        retrieval=RetrievalConfig(
            k_p=config.retrieval.k_p,
            k_delta=config.retrieval.k_delta,
            k_n=config.retrieval.k_n,
            k_g=config.retrieval.k_g,
            k_c=config.retrieval.k_c,
        ),
        reduced_dim=config.community.reduced_dim,
        ideology_scale=config.community.ideology_scale,
        min_cluster_size=config.community.min_cluster_size,
        min_samples=config.community.min_samples,
        lambda_mmr=config.community.lambda_mmr,
        generation_mode=config.generation.mode,
        temperature=config.generation.temperature,
        reduction_enabled=config.community.reduction_enabled,
        include_outlier_sides=config.generation.include_outlier_sides,
        news_mode=config.generation.news_mode,
        seed=config.community.seed,
    )


def build_engine(config: EngineConfig) -> ForecastEngine:
    embed_gateway = build_embedding_gateway(config.embedding_gateway)
    chat_gateway = build_chat_gateway(config.chat_gateway)
    corpus = load_corpus(config.storage.posts)

    if os.path.exists(config.storage.dense_index):
        dense = DenseIndex.load(config.storage.dense_index)
    else:
        dense = DenseIndex(dimension=config.embedding_gateway.dimension)

    news = SparseIndex.load(config.storage.news_index) if os.path.exists(config.storage.news_index) else SparseIndex()
    kg = SparseIndex.load(config.storage.kg_index) if os.path.exists(config.storage.kg_index) else SparseIndex()

    engine = ForecastEngine(
        corpus=corpus,
        dense_index=dense,
        embed_gateway=embed_gateway,
        chat_gateway=chat_gateway,
        news_index=news,
        kg_index=kg,
        sparse_profile=SparseEncoderProfile(),
        ideology_by_topic=load_ideology_dir(config.storage.ideology_dir),
        settings=settings_from_config(config),
    )
    if os.path.exists(config.storage.articles) and os.path.exists(config.storage.triples):
        store = KnowledgeStore.load(config.storage.articles, config.storage.triples)
        engine.attach_texts(
            {s.id: s.text for s in store.snippets()},
            {c.id: c.rendered for c in store.build_neighborhood_chunks()},
        )
    return engine
