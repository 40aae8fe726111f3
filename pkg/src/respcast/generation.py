"""Response forecasting: quota allocation across communities, prompt
assembly, and per-community LLM generation with anti-repetition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .community import Community
from .gateways import ChatRequest, GatewayError

DEFAULT_PROMPT_WORD_BUDGET = 1200
MIN_REPRESENTATIVES_KEPT = 3
SEQUENTIAL_MAX_QUOTA = 5

GENERATION_SYSTEM_PROMPT = (
    "You write realistic social media replies. Stay in the voice of the "
    "community described, keep each reply under 280 characters, and ground "
    "claims in the provided context. Reply with only the reply text."
)


class QuotaError(Exception):
    pass


@dataclass
class ForecastRequest:
    post_text: str
    m_total: int
    topic_hint: str | None = None
    as_of: float | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.post_text.strip():
            raise ValueError("post text must be non-empty")
        if self.m_total < 1:
            raise ValueError("M must be >= 1")


@dataclass
class QuotaPlan:
    allocations: list[tuple[str, int]]
    residue: list[tuple[str, float]] = field(default_factory=list)

    def quota_of(self, community_id: str) -> int:
        for cid, m_k in self.allocations:
            if cid == community_id:
                return m_k
        return 0

    @property
    def total(self) -> int:
        return sum(m for _, m in self.allocations)


@dataclass
class PredictedResponse:
    text: str
    community_id: str
    seed: int | None
    prompt_fingerprint: str
    ordinal: int
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "community_id": self.community_id,
            "seed": self.seed,
            "prompt_fingerprint": self.prompt_fingerprint,
            "ordinal": self.ordinal,
            "degraded": self.degraded,
        }


def allocate_quota(
    communities: Sequence[Community],
    m_total: int,
    include_outlier_sides: bool = True,
) -> QuotaPlan:
    """Largest-remainder split of M proportional to community size.

    Remainder ties go to the larger community, then the lower id. The
    outlier-side communities share in the allocation by default; with the
    flag off they get zero and only density clusters divide M.
    """
    eligible = [
        c
        for c in communities
        if c.size > 0 and (include_outlier_sides or c.kind == "density_cluster")
    ]
    if not eligible:
        raise QuotaError("no non-empty communities to allocate across")
    total_size = sum(c.size for c in eligible)
    shares = [c.size / total_size * m_total for c in eligible]
    base = [math.floor(s) for s in shares]
    remainder = m_total - sum(base)
    fractions = [s - b for s, b in zip(shares, base)]
    order = sorted(
        range(len(eligible)),
        key=lambda i: (-fractions[i], -eligible[i].size, eligible[i].id),
    )
    for i in order[:remainder]:
        base[i] += 1
    allocated = {c.id: b for c, b in zip(eligible, base)}
    return QuotaPlan(
        allocations=[(c.id, allocated.get(c.id, 0)) for c in communities],
        residue=[(c.id, f) for c, f in zip(eligible, fractions)],
    )


def _word_count(text: str) -> int:
    return len(text.split())


def _numbered(items: list[str]) -> str:
    return "\n".join(f"{i + 1}. {item}" for i, item in enumerate(items))


def build_prompt(
    request: ForecastRequest,
    community: Community,
    representative_texts: list[str],
    news_texts: list[str],
    kg_texts: list[str],
    total_members: int,
    word_budget: int = DEFAULT_PROMPT_WORD_BUDGET,
) -> tuple[str, str]:
    """Deterministic (system, user) prompt pair for one community.

    On budget overflow the context shrinks in fixed order: knowledge facts
    first, then news snippets, then representatives beyond the first three.
    The post itself is never trimmed.
    """
    if not representative_texts:
        raise ValueError("community has no representatives")
    news = list(news_texts)
    kg = list(kg_texts)
    reps = list(representative_texts)

    def render() -> str:
        share = community.size / total_members * 100.0 if total_members else 0.0
        sections = [
            "Write a reply to the following post as a member of the described community.",
            f"Post:\n{request.post_text}",
            (
                "Community:\n"
                f"- side: {community.side_label or 'mixed'}\n"
                f"- share of historical responders: {share:.1f}% "
                f"({community.size} of {total_members})"
            ),
            "Representative historical responses from this community:\n" + _numbered(reps),
        ]
        if news:
            sections.append("Relevant news snippets:\n" + _numbered(news))
        if kg:
            sections.append("Relevant background facts:\n" + _numbered(kg))
        if not news and not kg:
            sections.append("No external context is available for this post.")
        return "\n\n".join(sections)

    user = render()
    while _word_count(user) > word_budget:
        if kg:
            kg.pop()
        elif news:
            news.pop()
        elif len(reps) > MIN_REPRESENTATIVES_KEPT:
            reps.pop()
        else:
            break
        user = render()
    return GENERATION_SYSTEM_PROMPT, user


def generate_for_community(
    community: Community,
    m_k: int,
    base_prompt: tuple[str, str],
    chat_gateway,
    mode: str = "auto",
    temperature: float = 0.9,
    base_seed: int = 0,
) -> list[PredictedResponse]:
    """Exactly m_k responses for one community.

    Sequential mode feeds previously generated texts back with a
    do-not-repeat instruction; parallel mode varies the sampling seed per
    call. ``auto`` picks sequential for small quotas. Empty or refused
    completions are retried once, then backfilled flagged degraded.
    """
    if m_k < 1:
        raise ValueError("quota must be >= 1")
    if mode == "auto":
        mode = "sequential" if m_k <= SEQUENTIAL_MAX_QUOTA else "parallel"
    if mode not in ("sequential", "parallel"):
        raise ValueError(f"unknown generation mode {mode!r}")
    system, user = base_prompt
    responses: list[PredictedResponse] = []
    for ordinal in range(m_k):
        prompt = user
        seed = base_seed if mode == "sequential" else base_seed + ordinal
        if mode == "sequential" and responses:
            prior = _numbered([r.text for r in responses])
            prompt = (
                user
                + "\n\nAlready generated replies (write something different in "
                "wording and angle, do not repeat them):\n"
                + prior
            )
        request = ChatRequest(
            system_prompt=system, user_prompt=prompt, temperature=temperature, seed=seed
        )
        text, degraded = _complete_with_retry(chat_gateway, request)
        responses.append(
            PredictedResponse(
                text=text,
                community_id=community.id,
                seed=seed,
                prompt_fingerprint=request.fingerprint,
                ordinal=ordinal,
                degraded=degraded,
            )
        )
    return responses


def _complete_with_retry(chat_gateway, request: ChatRequest) -> tuple[str, bool]:
    for attempt in range(2):
        try:
            result = chat_gateway.chat_complete(request)
        except GatewayError:
            continue
        if result.text.strip() and not result.refused:
            return result.text.strip(), False
    return "[no response generated]", True
