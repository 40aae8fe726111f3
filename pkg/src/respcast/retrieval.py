"""Community-aware historical retrieval.

Finds semantically similar augmented posts, refines them with a batched
YES/NO LLM judgment, gathers their historical response sets, and pulls
external news snippets and knowledge-graph chunks via sparse retrieval.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .dense_index import DenseIndex, Hit
from .gateways import ChatRequest, EmbeddingRequest, GatewayError
from .sparse_index import SparseEncoderProfile, SparseHit, SparseIndex, encode_sparse

REFINE_BATCH_SIZE = 10

REFINE_SYSTEM_PROMPT = (
    "You judge whether candidate social media posts relate to a query post "
    "in a broader category or express similar stances toward those categories. "
    "Answer with YES or NO for each numbered candidate, one per line, "
    "formatted as '1. YES'."
)


@dataclass
class RetrievalConfig:
    k_p: int = 20
    k_delta: int = 20
    k_n: int = 5
    k_g: int = 5
    k_c: int = 5
    time_cutoff: float | None = None

    def __post_init__(self) -> None:
        for name in ("k_p", "k_delta", "k_n", "k_g", "k_c"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class CandidateSet:
    query_id: str
    query_text: str
    candidates: list[Hit]
    empty_index: bool = False


@dataclass
class RefinementResult:
    similar_ids: list[str]
    accepted: dict[str, bool]
    degraded: bool = False


@dataclass
class GatheredResponses:
    response_ids: list[str]
    source_of: dict[str, str]
    empty: bool = False


@dataclass
class ExternalContext:
    news_hits: list
    kg_hits: list
    empty_news: bool = False
    empty_kg: bool = False
    news_mode: str = "sparse"


def retrieve_candidates(
    query_id: str,
    query_rendered: str,
    index: DenseIndex,
    embed_gateway,
    config: RetrievalConfig,
    query_vector: np.ndarray | None = None,
) -> CandidateSet:
    """Exactly min(k_p + k_delta, eligible) nearest augmented posts,
    distance-ordered and time-masked."""
    if query_vector is None:
        query_vector = embed_gateway.embed_dense(EmbeddingRequest(text=query_rendered))
    hits = index.knn(query_vector, config.k_p + config.k_delta, time_mask=config.time_cutoff)
    return CandidateSet(
        query_id=query_id,
        query_text=query_rendered,
        candidates=hits,
        empty_index=not hits,
    )


def _candidate_line(index: int, text: str) -> str:
    return f"{index}. {' '.join(text.split())}"


def _parse_verdicts(text: str, count: int) -> dict[int, bool]:
    verdicts: dict[int, bool] = {}
    for line in text.splitlines():
        match = re.match(r"^\s*(\d+)[.):]?\s*(YES|NO)\b", line.strip(), re.IGNORECASE)
        if match:
            number = int(match.group(1))
            if 1 <= number <= count:
                verdicts[number] = match.group(2).upper() == "YES"
    return verdicts


def refine_with_llm(
    candidates: CandidateSet,
    chat_gateway,
    config: RetrievalConfig,
    texts_of: dict[str, str],
) -> RefinementResult:
    """Batched YES/NO relevance judgment; unparsed candidates default to
    accepted, and a dead gateway falls back to the top k_p by distance."""
    accepted: dict[str, bool] = {}
    ordered = candidates.candidates
    try:
        for start in range(0, len(ordered), REFINE_BATCH_SIZE):
            batch = ordered[start : start + REFINE_BATCH_SIZE]
            lines = [
                _candidate_line(i + 1, texts_of[hit.doc_id]) for i, hit in enumerate(batch)
            ]
            prompt = (
                f"Query post:\n{candidates.query_text}\n\n"
                "Candidates:\n" + "\n".join(lines) + "\n\n"
                "Answer each with YES or NO."
            )
            result = chat_gateway.chat_complete(
                ChatRequest(system_prompt=REFINE_SYSTEM_PROMPT, user_prompt=prompt, temperature=0.0)
            )
            verdicts = _parse_verdicts(result.text, len(batch))
            for i, hit in enumerate(batch):
                # parse failure retains the candidate: recall over precision
                accepted[hit.doc_id] = verdicts.get(i + 1, True)
    except GatewayError:
        top = [hit.doc_id for hit in ordered[: config.k_p]]
        return RefinementResult(
            similar_ids=top,
            accepted={doc_id: doc_id in top for doc_id in (h.doc_id for h in ordered)},
            degraded=True,
        )
    similar = [hit.doc_id for hit in ordered if accepted[hit.doc_id]]
    return RefinementResult(similar_ids=similar, accepted=accepted)


def gather_responses(corpus, similar_ids: list[str]) -> GatheredResponses:
    """Union of the similar posts' direct response sets, deduplicated; the
    first source encountered wins for provenance."""
    response_ids: list[str] = []
    source_of: dict[str, str] = {}
    for post_id in similar_ids:
        for response_id in corpus.responses_of(post_id).response_ids:
            if response_id not in source_of:
                source_of[response_id] = post_id
                response_ids.append(response_id)
    return GatheredResponses(
        response_ids=response_ids, source_of=source_of, empty=not response_ids
    )


def retrieve_external(
    query_text: str,
    config: RetrievalConfig,
    news_index: SparseIndex | None = None,
    kg_index: SparseIndex | None = None,
    profile: SparseEncoderProfile | None = None,
    news_mode: str = "sparse",
    dense_news_index: DenseIndex | None = None,
    embed_gateway=None,
) -> ExternalContext:
    """k_n news snippets and k_g knowledge chunks for the query.

    ``news_mode`` toggles the news leg between the default sparse retrieval
    and plain dense vector retrieval for comparison runs.
    """
    if news_mode not in ("sparse", "dense"):
        raise ValueError(f"unknown news mode {news_mode!r}")
    query_sparse = encode_sparse(query_text, profile) if query_text.strip() else {}

    news_hits: list = []
    if news_mode == "dense":
        if dense_news_index is None or embed_gateway is None:
            raise ValueError("dense news mode needs a dense index and an embedding gateway")
        if len(dense_news_index):
            vector = embed_gateway.embed_dense(EmbeddingRequest(text=query_text))
            news_hits = dense_news_index.knn(vector, config.k_n, time_mask=config.time_cutoff)
    elif news_index is not None and len(news_index):
        news_hits = news_index.topk_inner_product(
            query_sparse, config.k_n, time_mask=config.time_cutoff
        )

    kg_hits: list[SparseHit] = []
    if kg_index is not None and len(kg_index):
        kg_hits = kg_index.topk_inner_product(
            query_sparse, config.k_g, time_mask=config.time_cutoff
        )
    return ExternalContext(
        news_hits=news_hits,
        kg_hits=kg_hits,
        empty_news=not news_hits,
        empty_kg=not kg_hits,
        news_mode=news_mode,
    )
