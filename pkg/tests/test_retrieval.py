import numpy as np
import pytest

from respcast.corpus import Corpus
from respcast.dense_index import DenseIndex
from respcast.gateways import (
    EmbeddingRequest,
    MockChatGateway,
    MockEmbeddingGateway,
    OfflineChatGateway,
    fingerprint,
)
from respcast.retrieval import (
    REFINE_SYSTEM_PROMPT,
    RetrievalConfig,
    gather_responses,
    refine_with_llm,
    retrieve_candidates,
    retrieve_external,
)
from respcast.sparse_index import SparseIndex, encode_sparse


def build_index(vectors, timestamps=None):
    index = DenseIndex(dimension=vectors.shape[1])
    for i, vec in enumerate(vectors):
        ts = float(timestamps[i]) if timestamps is not None else float(i)
        index.insert(f"d{i}", vec, timestamp=ts)
    return index


def test_config_rejects_nonpositive_budgets():
    with pytest.raises(ValueError):
        RetrievalConfig(k_p=0)
    with pytest.raises(ValueError):
        RetrievalConfig(k_n=-1)


def test_candidates_match_brute_force_oracle():
    rng = np.random.default_rng(0)
    vectors = rng.random((50, 8))
    index = build_index(vectors)
    config = RetrievalConfig(k_p=2, k_delta=1)
    query = rng.random(8)
    got = retrieve_candidates("q", "q text", index, None, config, query_vector=query)
    distances = np.linalg.norm(vectors - query, axis=1)
    order = sorted(range(50), key=lambda i: (distances[i], f"d{i}"))
    assert [h.doc_id for h in got.candidates] == [f"d{i}" for i in order[:3]]
    assert not got.empty_index


def test_identical_document_at_distance_zero():
    vectors = np.eye(4)
    index = build_index(vectors)
    got = retrieve_candidates(
        "q", "q", index, None, RetrievalConfig(k_p=1, k_delta=1), query_vector=vectors[2]
    )
    assert got.candidates[0].doc_id == "d2"
    assert got.candidates[0].distance == 0.0


def test_time_cutoff_can_empty_the_candidate_set():
    vectors = np.random.default_rng(1).random((5, 4))
    index = build_index(vectors, timestamps=[100, 200, 300, 400, 500])
    config = RetrievalConfig(k_p=2, k_delta=2, time_cutoff=50.0)
    got = retrieve_candidates("q", "q", index, None, config, query_vector=vectors[0])
    assert got.candidates == []
    assert got.empty_index


def test_candidates_use_embedding_gateway_when_no_vector_given():
    embed = MockEmbeddingGateway(dimension=8)
    index = DenseIndex(dimension=8)
    index.insert("d0", embed.embed_dense(EmbeddingRequest(text="hello world")), timestamp=1.0)
    got = retrieve_candidates(
        "q", "hello world", index, embed, RetrievalConfig(k_p=1, k_delta=1)
    )
    assert [h.doc_id for h in got.candidates] == ["d0"]


def scripted_judge(candidates, reply):
    """Build a MockChatGateway that answers the single refinement batch."""
    texts = {h.doc_id: f"text of {h.doc_id}" for h in candidates.candidates}
    lines = [f"{i + 1}. text of {h.doc_id}" for i, h in enumerate(candidates.candidates)]
    prompt = (
        f"Query post:\n{candidates.query_text}\n\n"
        "Candidates:\n" + "\n".join(lines) + "\n\n"
        "Answer each with YES or NO."
    )
    gateway = MockChatGateway(fixtures={fingerprint(REFINE_SYSTEM_PROMPT, prompt): reply})
    return gateway, texts


def candidate_set(n):
    from respcast.retrieval import CandidateSet
    from respcast.dense_index import Hit

    hits = [Hit(doc_id=f"d{i}", distance=float(i)) for i in range(n)]
    return CandidateSet(query_id="q", query_text="the query", candidates=hits)


def test_refine_accept_all():
    cands = candidate_set(4)
    gateway, texts = scripted_judge(cands, "1. YES\n2. YES\n3. YES\n4. YES")
    result = refine_with_llm(cands, gateway, RetrievalConfig(), texts)
    assert result.similar_ids == ["d0", "d1", "d2", "d3"]
    assert not result.degraded


def test_refine_reject_all():
    cands = candidate_set(3)
    gateway, texts = scripted_judge(cands, "1. NO\n2. NO\n3. NO")
    result = refine_with_llm(cands, gateway, RetrievalConfig(), texts)
    assert result.similar_ids == []
    assert result.accepted == {"d0": False, "d1": False, "d2": False}


def test_refine_alternating_verdicts():
    cands = candidate_set(4)
    gateway, texts = scripted_judge(cands, "1. YES\n2. NO\n3. YES\n4. NO")
    result = refine_with_llm(cands, gateway, RetrievalConfig(), texts)
    assert result.similar_ids == ["d0", "d2"]


def test_refine_unparsed_lines_default_to_accept():
    cands = candidate_set(3)
    gateway, texts = scripted_judge(cands, "1. NO\ngarbage line\nanother")
    result = refine_with_llm(cands, gateway, RetrievalConfig(), texts)
    # 2 and 3 missing from the reply: both retained
    assert result.similar_ids == ["d1", "d2"]


def test_refine_dead_gateway_degrades_to_top_k_p():
    cands = candidate_set(6)
    texts = {h.doc_id: h.doc_id for h in cands.candidates}
    gateway = MockChatGateway(fail_first=10**6)
    result = refine_with_llm(cands, gateway, RetrievalConfig(k_p=4, k_delta=2), texts)
    assert result.degraded
    assert result.similar_ids == ["d0", "d1", "d2", "d3"]


def test_refine_batches_of_ten():
    cands = candidate_set(23)
    texts = {h.doc_id: h.doc_id for h in cands.candidates}
    gateway = OfflineChatGateway()
    result = refine_with_llm(cands, gateway, RetrievalConfig(), texts)
    assert len(gateway.log) == 3
    assert result.similar_ids == [f"d{i}" for i in range(23)]


def build_corpus():
    corpus = Corpus()
    records = [
        {"id": "r1", "author_id": "a", "topic": "t", "timestamp": 1.0, "text": "root one"},
        {"id": "r2", "author_id": "a", "topic": "t", "timestamp": 2.0, "text": "root two"},
        {"id": "c1", "author_id": "b", "topic": "t", "timestamp": 3.0, "text": "x", "parent_id": "r1"},
        {"id": "c2", "author_id": "c", "topic": "t", "timestamp": 4.0, "text": "y", "parent_id": "r1"},
        {"id": "c3", "author_id": "d", "topic": "t", "timestamp": 5.0, "text": "z", "parent_id": "r2"},
        {"id": "c4", "author_id": "e", "topic": "t", "timestamp": 6.0, "text": "w", "parent_id": "c1"},
    ]
    corpus.ingest_posts(records)
    return corpus


def test_gather_union_is_direct_children_only():
    gathered = gather_responses(build_corpus(), ["r1", "r2"])
    assert gathered.response_ids == ["c1", "c2", "c3"]
    assert gathered.source_of == {"c1": "r1", "c2": "r1", "c3": "r2"}
    assert not gathered.empty


def test_gather_first_source_wins_on_overlap():
    gathered = gather_responses(build_corpus(), ["c1", "r1"])
    # c4 appears once, attributed to its first contributing source
    assert gathered.response_ids == ["c4", "c1", "c2"]
    assert gathered.source_of["c4"] == "c1"


def test_gather_empty_flagged():
    gathered = gather_responses(build_corpus(), ["c2"])
    assert gathered.empty
    assert gathered.response_ids == []


def sparse_store(docs):
    index = SparseIndex()
    for doc_id, text, ts in docs:
        index.insert(doc_id, encode_sparse(text, None), timestamp=ts)
    return index


def test_external_sparse_matches_inner_product_oracle():
    docs = [
        ("n0", "ceasefire talks stall in the region", 10.0),
        ("n1", "weather report sunny skies", 10.0),
        ("n2", "ceasefire ceasefire deal reached talks", 10.0),
    ]
    index = sparse_store(docs)
    query = "latest ceasefire talks"
    context = retrieve_external(query, RetrievalConfig(k_n=2), news_index=index)
    q = encode_sparse(query, None)
    scores = {}
    for doc_id, text, _ in docs:
        vec = encode_sparse(text, None)
        scores[doc_id] = sum(q.get(t, 0.0) * w for t, w in vec.items())
    expected = sorted((d for d in scores if scores[d] > 0), key=lambda d: (-scores[d], d))[:2]
    assert [h.doc_id for h in context.news_hits] == expected
    assert not context.empty_news


def test_external_kg_leg_independent_of_news():
    kg = sparse_store([("Gaza City#c0", "Facts about Gaza City: conflict zone", 5.0)])
    context = retrieve_external("gaza conflict", RetrievalConfig(), kg_index=kg)
    assert [h.doc_id for h in context.kg_hits] == ["Gaza City#c0"]
    assert context.empty_news


def test_external_unknown_mode_rejected():
    with pytest.raises(ValueError):
        retrieve_external("q", RetrievalConfig(), news_mode="hybrid")


def test_external_dense_mode_requires_dependencies():
    with pytest.raises(ValueError):
        retrieve_external("q", RetrievalConfig(), news_mode="dense")


def test_external_dense_vs_sparse_can_differ():
    # sparse favors rare-token overlap, dense favors overall lexical mix
    sparse = sparse_store(
        [
            ("n0", "ceasefire", 1.0),
            ("n1", "negotiators meet to discuss the conflict and the talks again", 1.0),
        ]
    )
    embed = MockEmbeddingGateway(dimension=32)
    dense = DenseIndex(dimension=32)
    dense.insert("n0", embed.embed_dense(EmbeddingRequest(text="ceasefire")), timestamp=1.0)
    dense.insert(
        "n1",
        embed.embed_dense(EmbeddingRequest(text="negotiators meet to discuss the conflict and the talks again")),
        timestamp=1.0,
    )
    query = "negotiators discuss conflict talks"
    config = RetrievalConfig(k_n=1)
    via_sparse = retrieve_external(query, config, news_index=sparse)
    via_dense = retrieve_external(
        query, config, news_mode="dense", dense_news_index=dense, embed_gateway=embed
    )
    assert via_sparse.news_mode == "sparse"
    assert via_dense.news_mode == "dense"
    assert len(via_sparse.news_hits) == len(via_dense.news_hits) == 1


def test_external_time_cutoff_masks_both_legs():
    news = sparse_store([("n0", "ceasefire talks", 100.0)])
    kg = sparse_store([("E#c0", "ceasefire facts", 100.0)])
    context = retrieve_external(
        "ceasefire", RetrievalConfig(time_cutoff=50.0), news_index=news, kg_index=kg
    )
    assert context.empty_news and context.empty_kg
