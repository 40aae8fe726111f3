"""News store and knowledge graph: article ingestion, LLM triple
extraction, and node-neighborhood text chunks for sparse retrieval.

Entity identity is case-insensitive exact string match; there is no
coreference resolution at desk scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import httpx

from .gateways import ChatRequest, GatewayError

SNIPPET_WORDS = 200
SNIPPET_OVERLAP = 40
DEFAULT_MIN_NEIGHBORS = 2
DEFAULT_MAX_NEIGHBORS = 20

EXTRACTION_SYSTEM_PROMPT = (
    "You extract factual entity relations from news text. "
    'Reply with only a JSON array of objects {"head": ..., "relation": ..., "tail": ...}. '
    "No commentary."
)


class KnowledgeError(Exception):
    pass


class ExtractionError(KnowledgeError):
    """Triple extraction produced unparseable output even after repair."""


@dataclass(frozen=True)
class NewsArticle:
    url: str
    source: str
    published_at: float
    title: str
    body: str


@dataclass(frozen=True)
class Snippet:
    id: str
    url: str
    text: str
    published_at: float


@dataclass(frozen=True)
class KGTriple:
    head: str
    relation: str
    tail: str
    source_url: str
    extracted_at: float


@dataclass(frozen=True)
class NeighborhoodChunk:
    id: str
    center: str
    triples: tuple[KGTriple, ...]
    rendered: str
    chunk_index: int
    earliest_timestamp: float


@dataclass
class ExtractionResult:
    triples: list[KGTriple]
    dropped_count: int = 0
    refused: bool = False


@dataclass
class FeedPollResult:
    articles: list[NewsArticle]
    skipped: int = 0


def split_snippets(
    body: str, target_words: int = SNIPPET_WORDS, overlap: int = SNIPPET_OVERLAP
) -> list[str]:
    """Sliding word windows with overlap so facts straddling a boundary
    appear intact in at least one snippet."""
    words = body.split()
    if not words:
        return []
    stride = max(target_words - overlap, 1)
    snippets = []
    start = 0
    while start < len(words):
        snippets.append(" ".join(words[start : start + target_words]))
        if start + target_words >= len(words):
            break
        start += stride
    return snippets


def normalize_entity(name: str) -> str:
    return " ".join(name.split()).title()


class KnowledgeStore:
    """Holds articles, their snippets, the triple store, and chunk builds."""

    def __init__(
        self,
        snippet_words: int = SNIPPET_WORDS,
        snippet_overlap: int = SNIPPET_OVERLAP,
    ) -> None:
        self.snippet_words = snippet_words
        self.snippet_overlap = snippet_overlap
        self._articles: dict[str, NewsArticle] = {}
        self._snippets: dict[str, Snippet] = {}
        self._triples: list[KGTriple] = []

    @property
    def article_count(self) -> int:
        return len(self._articles)

    @property
    def triples(self) -> tuple[KGTriple, ...]:
        return tuple(self._triples)

    def articles(self) -> list[NewsArticle]:
        return [self._articles[url] for url in sorted(self._articles)]

    def snippets(self) -> list[Snippet]:
        return [self._snippets[k] for k in sorted(self._snippets)]

    def snippet(self, snippet_id: str) -> Snippet:
        return self._snippets[snippet_id]

    def has_snippet(self, snippet_id: str) -> bool:
        return snippet_id in self._snippets

    def ingest_article(self, article: NewsArticle) -> list[Snippet]:
        """Store an article and queue its snippets. Duplicate URLs are a
        no-op; undated or empty articles are rejected."""
        if not article.published_at:
            raise KnowledgeError("article has no publication date; time masking needs one")
        if not article.body.strip():
            raise KnowledgeError("article body is empty")
        if article.url in self._articles:
            return []
        self._articles[article.url] = article
        queued = []
        for i, text in enumerate(
            split_snippets(article.body, self.snippet_words, self.snippet_overlap)
        ):
            snippet = Snippet(
                id=f"{article.url}#s{i}",
                url=article.url,
                text=text,
                published_at=article.published_at,
            )
            self._snippets[snippet.id] = snippet
            queued.append(snippet)
        return queued

    def extract_triples(self, article: NewsArticle, chat_gateway) -> ExtractionResult:
        """LLM triple extraction with one self-repair retry on bad JSON."""
        if not article.body.strip():
            raise KnowledgeError("article body is empty")
        user_prompt = f"Title: {article.title}\n\n{article.body}"
        result = chat_gateway.chat_complete(
            ChatRequest(system_prompt=EXTRACTION_SYSTEM_PROMPT, user_prompt=user_prompt, temperature=0.0)
        )
        if result.refused:
            return ExtractionResult(triples=[], refused=True)
        parsed = _parse_triple_json(result.text)
        if parsed is None:
            repair = chat_gateway.chat_complete(
                ChatRequest(
                    system_prompt=EXTRACTION_SYSTEM_PROMPT,
                    user_prompt=(
                        "The following output was not valid JSON. Re-emit it as a "
                        "strict JSON array of {\"head\", \"relation\", \"tail\"} objects:\n"
                        + result.text
                    ),
                    temperature=0.0,
                )
            )
            parsed = _parse_triple_json(repair.text)
            if parsed is None:
                raise ExtractionError(f"unparseable extraction for {article.url}")
        triples: list[KGTriple] = []
        dropped = 0
        for item in parsed:
            if not isinstance(item, dict):
                dropped += 1
                continue
            head = str(item.get("head", "")).strip()
            relation = str(item.get("relation", "")).strip()
            tail = str(item.get("tail", "")).strip()
            if not (head and relation and tail):
                dropped += 1
                continue
            triples.append(
                KGTriple(
                    head=normalize_entity(head),
                    relation=relation,
                    tail=normalize_entity(tail),
                    source_url=article.url,
                    extracted_at=article.published_at,
                )
            )
        self._triples.extend(triples)
        return ExtractionResult(triples=triples, dropped_count=dropped)

    def add_triples(self, triples: Iterable[KGTriple]) -> None:
        self._triples.extend(triples)

    def build_neighborhood_chunks(
        self,
        max_neighbors: int = DEFAULT_MAX_NEIGHBORS,
        min_neighbors: int = DEFAULT_MIN_NEIGHBORS,
    ) -> list[NeighborhoodChunk]:
        """One chunk per max_neighbors triples around each entity; entities
        below min_neighbors are skipped until more triples arrive."""
        by_entity: dict[str, list[KGTriple]] = {}
        for triple in self._triples:
            by_entity.setdefault(triple.head, []).append(triple)
            if triple.tail != triple.head:
                by_entity.setdefault(triple.tail, []).append(triple)
        chunks: list[NeighborhoodChunk] = []
        for entity in sorted(by_entity):
            members = by_entity[entity]
            if len(members) < min_neighbors:
                continue
            n_chunks = math.ceil(len(members) / max_neighbors)
            for index in range(n_chunks):
                part = tuple(members[index * max_neighbors : (index + 1) * max_neighbors])
                lines = [f"{t.head} — {t.relation} — {t.tail}" for t in part]
                chunks.append(
                    NeighborhoodChunk(
                        id=f"{entity}#c{index}",
                        center=entity,
                        triples=part,
                        rendered=f"Facts about {entity}:\n" + "\n".join(lines),
                        chunk_index=index,
                        earliest_timestamp=min(t.extracted_at for t in part),
                    )
                )
        return chunks

    def save(self, articles_path: str, triples_path: str) -> None:
        with open(articles_path, "w", encoding="utf-8") as fh:
            for url in sorted(self._articles):
                a = self._articles[url]
                fh.write(
                    json.dumps(
                        {
                            "url": a.url,
                            "source": a.source,
                            "published_at": a.published_at,
                            "title": a.title,
                            "body": a.body,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        with open(triples_path, "w", encoding="utf-8") as fh:
            for t in self._triples:
                fh.write(
                    json.dumps(
                        {
                            "head": t.head,
                            "relation": t.relation,
                            "tail": t.tail,
                            "source_url": t.source_url,
                            "extracted_at": t.extracted_at,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, articles_path: str, triples_path: str, **kwargs) -> "KnowledgeStore":
        store = cls(**kwargs)
        with open(articles_path, encoding="utf-8") as fh:
            for line in fh:
                store.ingest_article(NewsArticle(**json.loads(line)))
        with open(triples_path, encoding="utf-8") as fh:
            store.add_triples(KGTriple(**json.loads(line)) for line in fh)
        return store


def _parse_triple_json(text: str) -> list | None:
    text = text.strip()
    if text.startswith("```"):
        text = text.strip("`")
        if text.startswith("json"):
            text = text[4:]
    start, end = text.find("["), text.rfind("]")
    if start == -1 or end == -1:
        return None
    try:
        parsed = json.loads(text[start : end + 1])
    except json.JSONDecodeError:
        return None
    return parsed if isinstance(parsed, list) else None


class FeedClient:
    """Client for an external news feed serving JSON rows.

    Rows look like {"url", "source", "published_at", "title", "body"}; in
    tests the feed is a replayable fixture (list of rows or a transport).
    """

    def __init__(
        self,
        endpoint: str | None = None,
        transport: httpx.BaseTransport | None = None,
        fixture_rows: list[dict] | None = None,
    ) -> None:
        self.endpoint = endpoint
        self._transport = transport
        self._fixture_rows = fixture_rows

    def poll(
        self,
        since: float,
        keywords: list[str] | None = None,
        geo: str | None = None,
    ) -> FeedPollResult:
        if self._fixture_rows is not None:
            rows = self._fixture_rows
        else:
            if not self.endpoint:
                raise KnowledgeError("feed client has no endpoint configured")
            params: dict = {"since": since}
            if keywords:
                params["keywords"] = ",".join(keywords)
            if geo:
                params["geo"] = geo
            try:
                client = httpx.Client(transport=self._transport)
                response = client.get(self.endpoint, params=params)
                response.raise_for_status()
                rows = response.json()
            except httpx.HTTPError as exc:
                raise GatewayError(f"feed unreachable: {exc}") from exc
        articles: list[NewsArticle] = []
        skipped = 0
        for row in rows:
            try:
                article = NewsArticle(
                    url=str(row["url"]),
                    source=str(row.get("source", "")),
                    published_at=float(row["published_at"]),
                    title=str(row.get("title", "")),
                    body=str(row["body"]),
                )
            except (KeyError, TypeError, ValueError):
                skipped += 1
                continue
            if article.published_at <= since:
                continue
            if keywords and not any(
                kw.lower() in (article.title + " " + article.body).lower() for kw in keywords
            ):
                continue
            articles.append(article)
        return FeedPollResult(articles=articles, skipped=skipped)
