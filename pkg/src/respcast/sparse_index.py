"""Sparse retrieval: log-tf encoder with query expansion, inverted index.

The default encoder is term-based with a static expansion table (a learned
sparse encoder can be plugged in through an external HTTP service); the
index answers exact top-k inner-product queries over an accumulator map.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import httpx

DEFAULT_EXPANSION_WEIGHT = 0.3

_TOKEN_RE = re.compile(r"[a-z0-9']+")


class SparseIndexError(Exception):
    """Rejected insert or encoder failure."""


@dataclass(frozen=True)
class SparseHit:
    doc_id: str
    score: float


@dataclass
class SparseEncoderProfile:
    """Either the built-in term-expansion encoder or an external service."""

    mode: str = "term_expansion_default"
    expansion_table: dict[str, list[str]] = field(default_factory=dict)
    expansion_weight: float = DEFAULT_EXPANSION_WEIGHT
    service_endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("term_expansion_default", "external_service"):
            raise ValueError(f"unknown encoder mode {self.mode!r}")
        if self.mode == "external_service" and not self.service_endpoint:
            raise ValueError("external_service mode requires an endpoint")

    @classmethod
    def from_table_file(cls, path: str, **kwargs) -> "SparseEncoderProfile":
        with open(path, encoding="utf-8") as fh:
            return cls(expansion_table=json.load(fh), **kwargs)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def encode_sparse(
    text: str,
    profile: SparseEncoderProfile | None = None,
    transport: httpx.BaseTransport | None = None,
) -> dict[str, float]:
    """Encode text to a sparse term→weight map.

    Default mode: weight(t) = log(1 + tf(t)); each expansion term from the
    table joins at ``expansion_weight``x its source weight, merged by max.
    """
    if not text:
        raise ValueError("text must be non-empty")
    profile = profile or SparseEncoderProfile()
    if profile.mode == "external_service":
        try:
            client = httpx.Client(transport=transport)
            response = client.post(profile.service_endpoint, json={"text": text})
            response.raise_for_status()
            weights = {str(t): float(w) for t, w in response.json().items()}
        except (httpx.HTTPError, ValueError, AttributeError) as exc:
            raise SparseIndexError(f"external encoder failed: {exc}") from exc
        if any(w < 0 for w in weights.values()):
            raise SparseIndexError("external encoder returned negative weights")
        return {t: w for t, w in weights.items() if w > 0}

    counts: dict[str, int] = {}
    for token in tokenize(text):
        counts[token] = counts.get(token, 0) + 1
    vector: dict[str, float] = {t: math.log(1 + c) for t, c in counts.items()}
    for term, weight in list(vector.items()):
        for expansion in profile.expansion_table.get(term, []):
            expanded = profile.expansion_weight * weight
            if expanded > vector.get(expansion, 0.0):
                vector[expansion] = expanded
    return vector


class SparseIndex:
    """Inverted index over one collection, exact documents-at-a-time scoring."""

    def __init__(self) -> None:
        self._postings: dict[str, dict[str, float]] = {}
        self._docs: dict[str, dict[str, float]] = {}
        self._timestamps: dict[str, float] = {}

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def posting_sizes(self) -> dict[str, int]:
        return {term: len(entries) for term, entries in self._postings.items()}

    def insert(self, doc_id: str, vector: dict[str, float], timestamp: float = 0.0) -> None:
        if doc_id in self._docs:
            raise SparseIndexError(f"duplicate doc id {doc_id!r}")
        if any(w <= 0 for w in vector.values()):
            raise SparseIndexError("sparse weights must be strictly positive")
        self._docs[doc_id] = dict(vector)
        self._timestamps[doc_id] = float(timestamp)
        for term, weight in vector.items():
            self._postings.setdefault(term, {})[doc_id] = weight

    def topk_inner_product(
        self, query: dict[str, float], k: int, time_mask: float | None = None
    ) -> list[SparseHit]:
        """Top-k docs by sparse inner product; zero-score docs excluded."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not query:
            return []
        scores: dict[str, float] = {}
        for term, qweight in query.items():
            for doc_id, dweight in self._postings.get(term, {}).items():
                scores[doc_id] = scores.get(doc_id, 0.0) + qweight * dweight
        if time_mask is not None:
            scores = {d: s for d, s in scores.items() if self._timestamps[d] < time_mask}
        ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return [SparseHit(doc_id=d, score=s) for d, s in ordered[:k] if s > 0]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"format": "respcast-sparse-index", "version": 1}) + "\n")
            for doc_id in sorted(self._docs):
                fh.write(
                    json.dumps(
                        {
                            "doc_id": doc_id,
                            "vector": self._docs[doc_id],
                            "timestamp": self._timestamps[doc_id],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str) -> "SparseIndex":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != "respcast-sparse-index":
                raise ValueError("not a sparse index snapshot")
            index = cls()
            for line in fh:
                entry = json.loads(line)
                index.insert(entry["doc_id"], entry["vector"], entry.get("timestamp", 0.0))
        return index
