"""End-to-end forecast orchestration.

Wires the corpus, dense and sparse indexes, ideology embeddings, community
discovery, and generation into a single ``forecast`` call producing a
report with full grounding provenance.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import community as community_mod
from . import generation as generation_mod
from . import retrieval as retrieval_mod
from .corpus import Corpus, render_hypothetical
from .dense_index import DenseIndex
from .gateways import EmbeddingRequest
from .generation import ForecastRequest, PredictedResponse
from .ideology import IdeologyEmbedding
from .retrieval import RetrievalConfig
from .sparse_index import SparseEncoderProfile, SparseIndex

REPORT_SCHEMA_VERSION = 1

STATUS_OK = "ok"
STATUS_NO_SIMILAR_HISTORY = "no_similar_history"


@dataclass
class EngineSettings:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    reduced_dim: int = 8
    ideology_scale: float = 1.0
    min_cluster_size: int = 5
    min_samples: int = 5
    lambda_mmr: float = 0.7
    generation_mode: str = "auto"
    temperature: float = 0.9
    reduction_enabled: bool = True
    include_outlier_sides: bool = True
    news_mode: str = "sparse"
    side_names: tuple[str, ...] = ("pro", "anti")
    seed: int = 0


@dataclass
class ForecastReport:
    request: ForecastRequest
    status: str
    communities: list[community_mod.Community]
    responses: list[PredictedResponse]
    similar_post_ids: list[str]
    news_snippet_ids: list[str]
    kg_chunk_ids: list[str]
    quota: list[tuple[str, int]]
    degraded_flags: list[str]
    elapsed_seconds: float
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "request": {
                "post_text": self.request.post_text,
                "m_total": self.request.m_total,
                "topic_hint": self.request.topic_hint,
                "as_of": self.request.as_of,
            },
            "status": self.status,
            "communities": [c.to_dict() for c in self.communities],
            "responses": [r.to_dict() for r in self.responses],
            "provenance": {
                "similar_post_ids": list(self.similar_post_ids),
                "news_snippet_ids": list(self.news_snippet_ids),
                "kg_chunk_ids": list(self.kg_chunk_ids),
            },
            "quota": [{"community_id": cid, "m_k": m} for cid, m in self.quota],
            "degraded_flags": list(self.degraded_flags),
            "elapsed_seconds": self.elapsed_seconds,
        }


class ForecastEngine:
    """Holds the stores and gateways one forecast needs."""

    def __init__(
        self,
        corpus: Corpus,
        dense_index: DenseIndex,
        embed_gateway,
        chat_gateway,
        news_index: SparseIndex | None = None,
        kg_index: SparseIndex | None = None,
        sparse_profile: SparseEncoderProfile | None = None,
        ideology_by_topic: dict[str, IdeologyEmbedding] | None = None,
        settings: EngineSettings | None = None,
        dense_news_index: DenseIndex | None = None,
    ) -> None:
        self.corpus = corpus
        self.dense_index = dense_index
        self.embed_gateway = embed_gateway
        self.chat_gateway = chat_gateway
        self.news_index = news_index
        self.kg_index = kg_index
        self.sparse_profile = sparse_profile
        self.ideology_by_topic = ideology_by_topic or {}
        self.settings = settings or EngineSettings()
        self.dense_news_index = dense_news_index
        self._doc_text_store: dict[str, str] = {}
        self._chunk_text_store: dict[str, str] = {}

    def _semantic_vector(self, post_id: str) -> np.ndarray:
        if post_id in self.dense_index:
            return self.dense_index.vector_of(post_id)
        rendered = self.corpus.augment(post_id).rendered
        return self.embed_gateway.embed_dense(EmbeddingRequest(text=rendered))

    def _ideology_vector(self, post_id: str, topic: str) -> np.ndarray:
        embedding = self.ideology_by_topic.get(topic)
        if embedding is None:
            return np.zeros(2)
        return embedding.post_vector(post_id)

    def _pick_topic(self, request: ForecastRequest, similar_ids: list[str]) -> str:
        if request.topic_hint:
            return request.topic_hint
        topics = Counter(self.corpus.get(pid).topic for pid in similar_ids if pid in self.corpus)
        return topics.most_common(1)[0][0] if topics else ""

    def forecast(self, request: ForecastRequest) -> ForecastReport:
        started = time.monotonic()
        settings = self.settings
        config = settings.retrieval
        if request.as_of is not None:
            config = RetrievalConfig(
                k_p=config.k_p,
                k_delta=config.k_delta,
                k_n=config.k_n,
                k_g=config.k_g,
                k_c=config.k_c,
                time_cutoff=request.as_of,
            )
        degraded: list[str] = []

        rendered = render_hypothetical(request.post_text)
        candidates = retrieval_mod.retrieve_candidates(
            "query", rendered, self.dense_index, self.embed_gateway, config
        )
        if candidates.empty_index:
            return self._empty_report(request, started, ["empty_candidate_set"])
        texts_of = {
            hit.doc_id: self.corpus.augment(hit.doc_id).rendered
            for hit in candidates.candidates
        }
        refinement = retrieval_mod.refine_with_llm(candidates, self.chat_gateway, config, texts_of)
        if refinement.degraded:
            degraded.append("refinement_fallback")
        gathered = retrieval_mod.gather_responses(self.corpus, refinement.similar_ids)
        if gathered.empty:
            return self._empty_report(request, started, degraded + ["no_gathered_responses"])

        topic = self._pick_topic(request, refinement.similar_ids)
        doc_ids = gathered.response_ids
        semantic = np.stack([self._semantic_vector(pid) for pid in doc_ids])
        reduced, reduce_degraded = community_mod.reduce_vectors(
            semantic, r=settings.reduced_dim, seed=settings.seed,
            enabled=settings.reduction_enabled,
        )
        if reduce_degraded:
            degraded.append("reduction_degraded")
        ideology = [self._ideology_vector(pid, topic) for pid in doc_ids]
        embeddings = community_mod.combine(
            doc_ids, reduced, ideology, lam=settings.ideology_scale
        )
        communities = community_mod.discover_communities(
            embeddings,
            min_cluster_size=settings.min_cluster_size,
            min_samples=settings.min_samples,
            k_c=config.k_c,
            lambda_mmr=settings.lambda_mmr,
            side_names=settings.side_names,
        )
        if not communities:
            return self._empty_report(request, started, degraded + ["no_communities"])

        external = retrieval_mod.retrieve_external(
            request.post_text,
            config,
            news_index=self.news_index,
            kg_index=self.kg_index,
            profile=self.sparse_profile,
            news_mode=settings.news_mode,
            dense_news_index=self.dense_news_index,
            embed_gateway=self.embed_gateway,
        )
        if external.empty_news:
            degraded.append("no_news_context")
        if external.empty_kg:
            degraded.append("no_kg_context")
        news_ids = [hit.doc_id for hit in external.news_hits]
        kg_ids = [hit.doc_id for hit in external.kg_hits]
        news_texts = [self._news_text(doc_id) for doc_id in news_ids]
        kg_texts = [self._kg_text(doc_id) for doc_id in kg_ids]

        plan = generation_mod.allocate_quota(
            communities, request.m_total, include_outlier_sides=settings.include_outlier_sides
        )
        total_members = sum(c.size for c in communities)
        responses: list[PredictedResponse] = []
        for comm in communities:
            m_k = plan.quota_of(comm.id)
            if m_k < 1:
                continue
            rep_texts = [self.corpus.get(rid).text for rid in comm.representatives]
            prompt = generation_mod.build_prompt(
                request, comm, rep_texts, news_texts, kg_texts, total_members
            )
            responses.extend(
                generation_mod.generate_for_community(
                    comm,
                    m_k,
                    prompt,
                    self.chat_gateway,
                    mode=settings.generation_mode,
                    temperature=settings.temperature,
                    base_seed=settings.seed,
                )
            )
        if any(r.degraded for r in responses):
            degraded.append("generation_backfilled")

        return ForecastReport(
            request=request,
            status=STATUS_OK,
            communities=communities,
            responses=responses,
            similar_post_ids=list(refinement.similar_ids),
            news_snippet_ids=news_ids,
            kg_chunk_ids=kg_ids,
            quota=plan.allocations,
            degraded_flags=degraded,
            elapsed_seconds=time.monotonic() - started,
        )

    def _news_text(self, doc_id: str) -> str:
        return self._doc_text_store.get(doc_id, doc_id)

    def _kg_text(self, doc_id: str) -> str:
        return self._chunk_text_store.get(doc_id, doc_id)

    def attach_texts(self, news_texts: dict[str, str], kg_texts: dict[str, str]) -> None:
        """Provide the rendered text behind news/kg doc ids for prompting."""
        self._doc_text_store = dict(news_texts)
        self._chunk_text_store = dict(kg_texts)

    def _empty_report(
        self, request: ForecastRequest, started: float, degraded: list[str]
    ) -> ForecastReport:
        return ForecastReport(
            request=request,
            status=STATUS_NO_SIMILAR_HISTORY,
            communities=[],
            responses=[],
            similar_post_ids=[],
            news_snippet_ids=[],
            kg_chunk_ids=[],
            quota=[],
            degraded_flags=degraded,
            elapsed_seconds=time.monotonic() - started,
        )
