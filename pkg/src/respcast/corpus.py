"""Historical post store: cascade tracing and context-augmented rendering.

Posts are kept with their cascade (parent/root) links and author
interaction edges. A post is rendered for indexing together with its root
post and up to ``max_parents`` immediate ancestors so that short posts stay
interpretable out of thread context.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

ROOT_MARKER = "[ROOT]"
PARENT_MARKER = "[PARENT]"
TARGET_MARKER = "[TARGET]"
ROOT_TARGET_MARKER = "[ROOT/TARGET]"

VALID_KINDS = {"original", "reply", "quote"}

DEFAULT_MAX_PARENTS = 2


class UnknownPostError(KeyError):
    """Raised when an operation references a post id that was never ingested."""


@dataclass(frozen=True)
class Post:
    id: str
    author_id: str
    parent_id: str | None
    root_id: str
    topic: str
    text: str
    timestamp: float
    kind: str = "reply"


@dataclass(frozen=True)
class ResponseSet:
    parent_post_id: str
    response_ids: tuple[str, ...]


@dataclass(frozen=True)
class AugmentedDocument:
    target_id: str
    root_text: str
    parent_texts: tuple[str, ...]
    target_text: str
    rendered: str
    topic: str
    timestamp: float
    incomplete: bool = False


@dataclass
class CorpusStats:
    docs: int = 0
    cascade_edges: int = 0
    interaction_edges: int = 0
    users: int = 0
    rejected: list[dict] = field(default_factory=list)
    orphans: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class TraceResult:
    posts: tuple[Post, ...]
    complete: bool


def _parse_record(record: dict) -> Post:
    missing = [k for k in ("id", "author_id", "topic", "text", "timestamp") if k not in record]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    kind = record.get("kind", "reply" if record.get("parent_id") else "original")
    if kind not in VALID_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    parent_id = record.get("parent_id")
    if kind == "original" and parent_id is not None:
        raise ValueError("original post cannot have a parent")
    ts = float(record["timestamp"])
    return Post(
        id=str(record["id"]),
        author_id=str(record["author_id"]),
        parent_id=str(parent_id) if parent_id is not None else None,
        root_id=str(record.get("root_id", record["id"] if parent_id is None else "")),
        topic=str(record["topic"]),
        text=str(record["text"]),
        timestamp=ts,
        kind=kind,
    )


class Corpus:
    """In-memory post store with cascade and interaction edge views.

    Single-writer: ``ingest`` must not run concurrently with itself.
    Reads are safe once an ingest batch returns.
    """

    def __init__(self) -> None:
        self._posts: dict[str, Post] = {}
        self._children: dict[str, list[str]] = {}
        self._orphans: set[str] = set()

    def __len__(self) -> int:
        return len(self._posts)

    def __contains__(self, post_id: str) -> bool:
        return post_id in self._posts

    def get(self, post_id: str) -> Post:
        try:
            return self._posts[post_id]
        except KeyError:
            raise UnknownPostError(post_id) from None

    def posts(self) -> Iterator[Post]:
        return iter(self._posts.values())

    def topics(self) -> list[str]:
        return sorted({p.topic for p in self._posts.values()})

    def is_orphan(self, post_id: str) -> bool:
        return post_id in self._orphans

    def ingest_posts(self, records: Iterable[dict | str]) -> CorpusStats:
        """Store a batch of raw post records.

        Malformed records are rejected individually (the batch continues);
        posts whose parent is unknown are stored but flagged as orphans.
        """
        stats = CorpusStats()
        batch: list[Post] = []
        seen: set[str] = set()
        for lineno, raw in enumerate(records):
            try:
                if isinstance(raw, str):
                    raw = json.loads(raw)
                post = _parse_record(raw)
                if post.id in seen or post.id in self._posts:
                    raise ValueError(f"duplicate id {post.id}")
                seen.add(post.id)
            except (ValueError, TypeError, json.JSONDecodeError) as exc:
                stats.rejected.append({"line": lineno, "reason": str(exc)})
                continue
            batch.append(post)

        for post in batch:
            self._posts[post.id] = post
            self._children.setdefault(post.id, [])
        for post in batch:
            if post.parent_id is None:
                continue
            if post.parent_id in self._posts:
                self._children.setdefault(post.parent_id, []).append(post.id)
                stats.cascade_edges += 1
            else:
                self._orphans.add(post.id)
                stats.orphans.append(post.id)
            stats.interaction_edges += 1
        # authorship counts as an interaction edge alongside replies/quotes
        stats.interaction_edges += len(batch)
        stats.docs = len(batch)
        stats.users = len({p.author_id for p in self._posts.values()})
        return stats

    def trace_to_root(self, post_id: str) -> TraceResult:
        """Walk parent links from ``post_id`` up to the root.

        Returns the chain ordered root-first. If an ancestor is missing the
        partial chain is returned with ``complete=False``.
        """
        post = self.get(post_id)
        chain = [post]
        complete = True
        seen = {post.id}
        while chain[0].parent_id is not None:
            parent_id = chain[0].parent_id
            if parent_id not in self._posts or parent_id in seen:
                complete = False
                break
            parent = self._posts[parent_id]
            seen.add(parent.id)
            chain.insert(0, parent)
        return TraceResult(posts=tuple(chain), complete=complete)

    def augment(self, post_id: str, max_parents: int = DEFAULT_MAX_PARENTS) -> AugmentedDocument:
        """Render a post with its root and up to ``max_parents`` nearest ancestors."""
        trace = self.trace_to_root(post_id)
        chain = trace.posts
        target = chain[-1]
        root = chain[0]
        if len(chain) == 1:
            parents: tuple[Post, ...] = ()
        else:
            inner = chain[1:-1]  # ancestors excluding root and target
            parents = tuple(inner[-max_parents:]) if max_parents > 0 else ()
        parent_texts = tuple(p.text for p in parents)
        rendered = render_document(root.text, parent_texts, target.text, root_is_target=len(chain) == 1)
        return AugmentedDocument(
            target_id=target.id,
            root_text=root.text,
            parent_texts=parent_texts,
            target_text=target.text,
            rendered=rendered,
            topic=target.topic,
            timestamp=target.timestamp,
            incomplete=not trace.complete,
        )

    def responses_of(self, post_id: str) -> ResponseSet:
        """Direct children of a post, timestamp-ordered."""
        self.get(post_id)
        child_ids = self._children.get(post_id, [])
        ordered = sorted(child_ids, key=lambda cid: (self._posts[cid].timestamp, cid))
        return ResponseSet(parent_post_id=post_id, response_ids=tuple(ordered))

    def interaction_edges(self, topic: str) -> list[tuple[str, str]]:
        """(user, post) edges for one topic: authorship plus reply/quote links."""
        edges: set[tuple[str, str]] = set()
        for post in self._posts.values():
            if post.topic != topic:
                continue
            edges.add((post.author_id, post.id))
            if post.parent_id is not None and post.parent_id in self._posts:
                parent = self._posts[post.parent_id]
                if parent.topic == topic:
                    edges.add((post.author_id, post.parent_id))
        return sorted(edges)

    def export_augmented(self, max_parents: int = DEFAULT_MAX_PARENTS) -> Iterator[str]:
        """JSON-lines export of every post's augmented rendering."""
        for post_id in sorted(self._posts):
            doc = self.augment(post_id, max_parents=max_parents)
            yield json.dumps(
                {
                    "target_id": doc.target_id,
                    "rendered": doc.rendered,
                    "topic": doc.topic,
                    "timestamp": doc.timestamp,
                    "incomplete": doc.incomplete,
                },
                sort_keys=True,
            )


def render_document(
    root_text: str,
    parent_texts: Iterable[str],
    target_text: str,
    root_is_target: bool = False,
) -> str:
    """Deterministic section rendering of a post with its context."""
    if root_is_target:
        return f"{ROOT_TARGET_MARKER}\n{target_text}"
    lines = [ROOT_MARKER, root_text]
    for text in parent_texts:
        lines.append(PARENT_MARKER)
        lines.append(text)
    lines.append(TARGET_MARKER)
    lines.append(target_text)
    return "\n".join(lines)


def render_hypothetical(text: str) -> str:
    """A hypothetical post has no cascade: target-only rendering."""
    return render_document("", (), text, root_is_target=True)
