"""Exact flat vector index: Euclidean k-NN with optional time masking.

A linear scan with a partial sort is exact and fast enough at desk scale
(~1e5 docs), so no approximate structure is used. Padded per-topic ideology
vectors ride along as entry metadata; they do not participate in the
distance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class DenseIndexError(Exception):
    """Rejected insert: duplicate id or dimension mismatch."""


@dataclass(frozen=True)
class Hit:
    doc_id: str
    distance: float


class DenseIndex:
    def __init__(self, dimension: int) -> None:
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self._ids: list[str] = []
        self._id_pos: dict[str, int] = {}
        self._vectors: list[np.ndarray] = []
        self._timestamps: list[float] = []
        self._topics: list[str] = []
        self._ideology_pads: list[np.ndarray | None] = []

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._id_pos

    def insert(
        self,
        doc_id: str,
        vector: np.ndarray,
        topic: str = "",
        timestamp: float = 0.0,
        ideology_pad: np.ndarray | None = None,
    ) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if doc_id in self._id_pos:
            raise DenseIndexError(f"duplicate doc id {doc_id!r}")
        if vector.shape != (self.dimension,):
            raise DenseIndexError(f"expected dimension {self.dimension}, got {vector.shape}")
        if not np.all(np.isfinite(vector)):
            raise DenseIndexError("vector components must be finite")
        self._id_pos[doc_id] = len(self._ids)
        self._ids.append(doc_id)
        self._vectors.append(vector)
        self._timestamps.append(float(timestamp))
        self._topics.append(topic)
        self._ideology_pads.append(
            None if ideology_pad is None else np.asarray(ideology_pad, dtype=np.float64)
        )

    def vector_of(self, doc_id: str) -> np.ndarray:
        return self._vectors[self._id_pos[doc_id]]

    def ideology_pad_of(self, doc_id: str) -> np.ndarray | None:
        return self._ideology_pads[self._id_pos[doc_id]]

    def topic_of(self, doc_id: str) -> str:
        return self._topics[self._id_pos[doc_id]]

    def knn(
        self, query: np.ndarray, k: int, time_mask: float | None = None
    ) -> list[Hit]:
        """k nearest entries by Euclidean distance, ascending.

        With a ``time_mask``, only entries strictly older than the cutoff
        are eligible.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._ids:
            return []
        query = np.asarray(query, dtype=np.float64)
        matrix = np.stack(self._vectors)
        distances = np.linalg.norm(matrix - query, axis=1)
        eligible = np.arange(len(self._ids))
        if time_mask is not None:
            timestamps = np.asarray(self._timestamps)
            eligible = eligible[timestamps < time_mask]
        if eligible.size == 0:
            return []
        k_eff = min(k, eligible.size)
        sub = distances[eligible]
        # stable order: distance then id for reproducible ties
        order = sorted(range(eligible.size), key=lambda i: (sub[i], self._ids[eligible[i]]))
        return [
            Hit(doc_id=self._ids[eligible[i]], distance=float(sub[i])) for i in order[:k_eff]
        ]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"format": "respcast-dense-index", "version": 1, "dimension": self.dimension}) + "\n")
            for i, doc_id in enumerate(self._ids):
                pad = self._ideology_pads[i]
                fh.write(
                    json.dumps(
                        {
                            "doc_id": doc_id,
                            "vector": self._vectors[i].tolist(),
                            "topic": self._topics[i],
                            "timestamp": self._timestamps[i],
                            "ideology_pad": None if pad is None else pad.tolist(),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str) -> "DenseIndex":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != "respcast-dense-index":
                raise ValueError("not a dense index snapshot")
            index = cls(dimension=header["dimension"])
            for line in fh:
                entry = json.loads(line)
                pad = entry.get("ideology_pad")
                index.insert(
                    entry["doc_id"],
                    np.asarray(entry["vector"]),
                    topic=entry.get("topic", ""),
                    timestamp=entry.get("timestamp", 0.0),
                    ideology_pad=None if pad is None else np.asarray(pad),
                )
        return index
