"""
Information cascade over the follower graph.

The first `seed_count` users to post about the event are authors at step 0.
At step t an agent is exposed when some followee became an author before t;
each exposed agent posts with the configured probability, and the post makes
it an author if it matches one of the event keywords.
"""
from __future__ import annotations

import re
from typing import List, Optional, Sequence, Tuple

import numpy as np
from dateutil import parser as dtparser

from config import settings
from datasources import endpoint_client
from domain.corpus import Dataset
from domain.errors import ArenaError
from domain.simulation import SpreadState
from services.opinion_service import AgentGenerator
from storage.table_store import write_table
from utils.logger import get_logger
from utils.rng import derive_seed, substream


log = get_logger(__name__)

SPREAD_COLUMNS = ["step", "authors"]


def mentions_event(text: str, keywords: Sequence[str]) -> bool:
    low = (text or "").lower()
    return any(re.search(r"\b" + re.escape(k.lower()) + r"\b", low) for k in keywords if k)


def first_authors(dataset: Dataset, keywords: Sequence[str]) -> List[str]:
    """Users with an on-topic tweet, ordered by their earliest such tweet."""
    hits: List[Tuple[float, str]] = []
    for u in dataset.users:
        times = [dtparser.isoparse(t.timestamp).timestamp() for t in u.tweets if mentions_event(t.text, keywords)]
        if times:
            hits.append((min(times), u.id))
    return [uid for _, uid in sorted(hits)]


def seed_authors(dataset: Dataset, keywords: Sequence[str], seed_count: int, seed: int) -> List[str]:
    """First on-topic authors, topped up with random users when there are too few."""
    n = len(dataset.users)
    if seed_count > n:
        raise ValueError(f"seed_authors: seed_count {seed_count} exceeds {n} users")
    if seed_count < 0:
        raise ValueError("seed_authors: seed_count must be >= 0")
    chosen = first_authors(dataset, keywords)[:seed_count]
    if len(chosen) < seed_count:
        rest = sorted(set(dataset.user_ids) - set(chosen))
        fill = substream(seed, "spread-seeds").permutation(len(rest))[: seed_count - len(chosen)]
        log.warning("spread_seed_fill on_topic=%d filled=%d", len(chosen), len(fill))
        chosen += [rest[i] for i in fill]
    return chosen


class KeywordEchoAgent:
    """Posts about the event: an optional base agent's text plus one keyword."""

    def __init__(self, keywords: Sequence[str], base: Optional[AgentGenerator] = None):
        if not keywords:
            raise ValueError("KeywordEchoAgent: need at least one keyword")
        self.keywords = list(keywords)
        self.base = base

    def __call__(self, user_id: str, prompt: str, seed: int) -> str:
        kw = self.keywords[int(np.random.default_rng(seed).integers(len(self.keywords)))]
        head = self.base(user_id, prompt, seed) if self.base is not None else ""
        return f"{head} {kw}".strip()


def spread_prompt(user_id: str, seen: str, t: int) -> str:
    return endpoint_client.render_simulation(
        agent_name=user_id,
        role_description="",
        current_time=f"step {t}",
        trigger_news=seen,
        past_event="none",
        tweet_page=seen,
    )


def run_spread(
    dataset: Dataset,
    keywords: Sequence[str],
    generator_fn: Optional[AgentGenerator] = None,
    steps: int = 10,
    seed: int = 0,
    seed_count: int = settings.SPREAD_SEED_COUNT,
    post_probability: float = settings.SPREAD_POST_PROBABILITY,
) -> SpreadState:
    if steps < 0:
        raise ValueError("run_spread: steps must be >= 0")
    if not 0.0 <= post_probability <= 1.0:
        raise ValueError(f"run_spread: post_probability must lie in [0, 1], got {post_probability}")
    generator_fn = generator_fn or KeywordEchoAgent(keywords)
    ids = dataset.user_ids
    followees = dataset.followee_lists()

    state = SpreadState()
    last_post = {}
    for uid in seed_authors(dataset, keywords, seed_count, seed):
        state.authors.add(uid)
        state.first_post_step[uid] = 0
        last_post[uid] = next((t.text for t in dataset.user(uid).tweets if mentions_event(t.text, keywords)), " ".join(keywords))
    state.counts.append(len(state.authors))

    failures = 0
    for t in range(1, steps + 1):
        rng = substream(seed, "spread", t)
        new_posts = {}
        for i, uid in enumerate(ids):
            if uid in state.authors:
                continue
            seen = [ids[j] for j in followees[i] if state.first_post_step.get(ids[j], t) < t]
            # one draw per non-author per step
            u = rng.random()
            if not seen or u >= post_probability:
                continue
            page = "\n".join(f"@{s}: {last_post[s]}" for s in seen[: settings.RECENT_POSTS_MAX])
            try:
                text = generator_fn(uid, spread_prompt(uid, page, t), derive_seed(seed, "spread-agent", t, i))
            except (ArenaError, ValueError, RuntimeError, ConnectionError):
                failures += 1
                continue
            if mentions_event(text, keywords):
                new_posts[uid] = text
        for uid, text in new_posts.items():
            state.authors.add(uid)
            state.first_post_step[uid] = t
            last_post[uid] = text
        state.counts.append(len(state.authors))
        log.debug("spread_step t=%d new=%d total=%d", t, len(new_posts), len(state.authors))
    if failures:
        log.warning("spread_generation_failures count=%d", failures)
    log.info("spread_done steps=%d seeds=%d authors=%d", steps, state.counts[0], len(state.authors))
    return state


def save_spread(path: str, state: SpreadState) -> None:
    write_table(path, [{"step": t, "authors": c} for t, c in enumerate(state.counts)], SPREAD_COLUMNS)
