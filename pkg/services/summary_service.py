"""
User summaries (S_v) and neighbor summaries (S_N).

The default summarizer is template-extractive and deterministic. Any object
with `summarize(user, neighbors) -> str` can stand in; EndpointSummarizer
sends the summarization prompt to a chat-completion endpoint.
"""
from __future__ import annotations

from typing import List, Optional, Protocol, Sequence

from config import settings
from config.constants import PROMPT_LEARNING, PROMPT_SUMMARIZATION
from datasources import assets
from domain.corpus import Dataset, UserRecord


class Summarizer(Protocol):
    def summarize(self, user: UserRecord, neighbors: Sequence[UserRecord] = ()) -> str: ...


def _cap(text: str, limit: int) -> str:
    text = " ".join(text.split())
    if len(text) <= limit:
        return text
    return text[: max(0, limit - 3)].rstrip() + "..."


def _count(user: UserRecord, key: str, fallback: int) -> int:
    v = user.numeric_props.get(key)
    return int(v) if v is not None else int(fallback)


def summarize_user(
    user: UserRecord,
    neighbors: Sequence[UserRecord] = (),
    cap: int = settings.SUMMARY_CAP_CHARS,
    top_k: int = settings.SUMMARY_TOP_TWEETS,
) -> str:
    parts: List[str] = [f"Name: {user.id}."]
    location = user.categorical_props.get("location")
    if location:
        parts.append(f"Location: {location}.")
    if user.description:
        parts.append(f"Description: {_cap(user.description, 160)}.")
    n = len(neighbors)
    parts.append(f"Followers: {_count(user, 'followers_count', n)}.")
    parts.append(f"Following: {_count(user, 'following_count', n)}.")
    if user.tweets:
        parts.append(f"Tweets: {_count(user, 'tweet_count', len(user.tweets))}.")
        recent = [_cap(t.text, 80) for t in reversed(user.tweets[-top_k:])]
        parts.append("Recent posts: " + " | ".join(recent) + ".")
    return _cap(" ".join(parts), cap)


def summarize_neighbors(
    neighbors: Sequence[UserRecord],
    limit: int = settings.NEIGHBOR_SUMMARY_MAX,
    summarizer: Optional[Summarizer] = None,
    cap: int = settings.SUMMARY_CAP_CHARS,
) -> str:
    """Summaries of up to `limit` neighbors (given order), one per line."""
    lines = []
    for nb in list(neighbors)[:limit]:
        s = summarizer.summarize(nb, ()) if summarizer is not None else summarize_user(nb, (), cap=cap)
        lines.append(f"- {s}")
    return "\n".join(lines)


class TemplateSummarizer:
    def __init__(self, cap: int = settings.SUMMARY_CAP_CHARS, top_k: int = settings.SUMMARY_TOP_TWEETS):
        self.cap = cap
        self.top_k = top_k

    def summarize(self, user: UserRecord, neighbors: Sequence[UserRecord] = ()) -> str:
        return summarize_user(user, neighbors, cap=self.cap, top_k=self.top_k)


class EndpointSummarizer:
    """Sends the summarization prompt through a text-generation callable (e.g. external_generate)."""

    def __init__(self, generate, cap: int = settings.SUMMARY_CAP_CHARS):
        self.generate = generate
        self.cap = cap

    def summarize(self, user: UserRecord, neighbors: Sequence[UserRecord] = ()) -> str:
        prompt = summarization_prompt(user, neighbors)
        return _cap(self.generate(prompt), self.cap)


def summarization_prompt(user: UserRecord, neighbors: Sequence[UserRecord] = ()) -> str:
    n = len(neighbors)
    created = user.tweets[0].timestamp if user.tweets else "unknown"
    return assets.render_template(
        PROMPT_SUMMARIZATION,
        name=user.id,
        location=user.categorical_props.get("location", "unknown"),
        description=user.description,
        created_at=created,
        followers=_count(user, "followers_count", n),
        following=_count(user, "following_count", n),
        tweet_count=_count(user, "tweet_count", len(user.tweets)),
        sample_posts=" | ".join(t.text for t in user.tweets[-settings.SUMMARY_TOP_TWEETS:]),
    )


def user_context(dataset: Dataset, user_id: str, summarizer: Optional[Summarizer] = None) -> tuple:
    """(S_v, S_N) for one user of a dataset."""
    summarizer = summarizer or TemplateSummarizer()
    user = dataset.user(user_id)
    neighbors = [dataset.user(n) for n in dataset.neighbors(user_id)]
    return summarizer.summarize(user, neighbors), summarize_neighbors(neighbors, summarizer=summarizer)


def learning_prompt(user_summary: str, neighbors_summary: str) -> str:
    return assets.render_template(PROMPT_LEARNING, user_summary=user_summary, neighbors_summary=neighbors_summary)
