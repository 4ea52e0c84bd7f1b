"""
Synthetic social community.

Humans write from a per-user topic mixture over generated topic words plus
common and sentiment words; bots lean on a promotional template vocabulary.
Account features carry only a weak class signal so that tweet text is the
main separator. Follow edges grow by preferential attachment with mild
bot homophily; some follows are reciprocated as friend edges.
"""
from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import List, Optional, Sequence, Union

import numpy as np

from config import settings
from config.constants import LABEL_BOT, LABEL_HUMAN, RELATION_FOLLOW, RELATION_FRIEND
from domain.corpus import Dataset, Edge, Tweet, UserRecord
from utils.logger import get_logger


log = get_logger(__name__)

COMMON_WORDS: List[str] = [
    "the", "a", "and", "is", "to", "of", "in", "it", "this", "that", "my", "we", "you", "for",
    "on", "with", "so", "just", "really", "today", "about", "what", "all", "our", "think", "been",
    "time", "people", "day", "week", "still", "more", "some", "out", "here", "very",
]
# every word here is in assets/lexicon/sentiment.json
SENTIMENT_WORDS: List[str] = [
    "good", "great", "love", "happy", "nice", "glad", "hope", "proud", "fun", "best",
    "bad", "sad", "hate", "angry", "worst", "awful", "tired", "fear", "worried", "terrible",
]
PROMO_WORDS: List[str] = [
    "free", "win", "click", "link", "giveaway", "crypto", "bonus", "deal", "offer", "promo",
    "follow", "retweet", "dm", "cash", "prize", "limited", "now", "exclusive", "signup", "airdrop",
    "profit", "earn", "invest", "coins", "token", "discount", "sale", "code", "vip", "subscribe",
    "instant", "guaranteed", "winner", "claim", "reward", "jackpot", "trading", "signals", "pump", "moon",
    "nft", "mint", "whitelist", "presale", "followers", "boost", "growth", "viral", "income", "passive",
    "hurry", "today_only", "unlock", "premium", "access", "join", "channel", "telegram", "wallet", "bitcoin",
]
LOCATIONS: List[str] = ["north", "south", "east", "west", "unknown"]

_SYLLABLES = ["ba", "ko", "ri", "tu", "me", "sa", "lo", "ni", "da", "ve", "pu", "ge", "ha", "zi", "mo", "fe"]
_N_TOPICS = 6
_EPOCH = datetime(2022, 1, 1, tzinfo=timezone.utc)
_SPAN_SEC = 180 * 24 * 3600


def topic_vocabulary(n_words: int) -> List[str]:
    """Deterministic pseudo-words (two or three syllables) used as topic terms."""
    words: List[str] = []
    s = len(_SYLLABLES)
    i = 0
    while len(words) < n_words:
        a, b, c = i % s, (i // s) % s, (i // (s * s)) % s
        w = _SYLLABLES[a] + _SYLLABLES[b] + (_SYLLABLES[c] if i >= s * s else "")
        if w not in words:
            words.append(w)
        i += 1
    return words


def _topics(vocab: Sequence[str]) -> List[List[str]]:
    per = max(1, len(vocab) // _N_TOPICS)
    return [list(vocab[t * per:(t + 1) * per]) or list(vocab) for t in range(_N_TOPICS)]


def _draw(rng: np.random.Generator, words: Sequence[str]) -> str:
    return words[int(rng.integers(len(words)))]


def human_tweet(rng: np.random.Generator, topics: List[List[str]], mixture: np.ndarray) -> str:
    n = int(rng.integers(8, 17))
    out: List[str] = []
    for _ in range(n):
        u = rng.random()
        if u < 0.35:
            out.append(_draw(rng, COMMON_WORDS))
        elif u < 0.5:
            out.append(_draw(rng, SENTIMENT_WORDS))
        elif u < 0.97:
            t = int(rng.choice(len(topics), p=mixture))
            out.append(_draw(rng, topics[t]))
        else:
            out.append(_draw(rng, PROMO_WORDS))
    if rng.random() < 0.15:
        out.append("#" + _draw(rng, topics[int(rng.choice(len(topics), p=mixture))]))
    return " ".join(out)


def bot_tweet(rng: np.random.Generator, topics: List[List[str]]) -> str:
    n = int(rng.integers(8, 17))
    topic = topics[int(rng.integers(len(topics)))]
    out: List[str] = []
    for _ in range(n):
        u = rng.random()
        if u < 0.2:
            out.append(_draw(rng, COMMON_WORDS))
        elif u < 0.25:
            out.append(_draw(rng, SENTIMENT_WORDS))
        elif u < 0.45:
            out.append(_draw(rng, topic))
        else:
            out.append(_draw(rng, PROMO_WORDS))
    if rng.random() < 0.5:
        out.append("#" + _draw(rng, PROMO_WORDS))
    if rng.random() < 0.3:
        out.append("@u" + str(int(rng.integers(1000))).zfill(4))
    return " ".join(out)


def template_tweets(kind: str, count: int, seed: int, vocab_size: int = settings.FIXTURE_TOPIC_WORDS) -> List[str]:
    """Fresh tweets from the human or bot template distribution (used for probes)."""
    rng = np.random.default_rng(seed)
    topics = _topics(topic_vocabulary(vocab_size))
    if kind == LABEL_HUMAN:
        mixture = rng.dirichlet(np.full(len(topics), 0.3))
        return [human_tweet(rng, topics, mixture) for _ in range(count)]
    if kind == LABEL_BOT:
        return [bot_tweet(rng, topics) for _ in range(count)]
    raise ValueError(f"template_tweets: unknown kind {kind!r}")


def _description(rng: np.random.Generator, topics: List[List[str]], mixture: np.ndarray, is_bot: bool) -> str:
    words = [_draw(rng, COMMON_WORDS)]
    for _ in range(int(rng.integers(3, 7))):
        t = int(rng.choice(len(topics), p=mixture))
        words.append(_draw(rng, topics[t]))
    if rng.random() < (0.3 if is_bot else 0.1):
        words.append(_draw(rng, PROMO_WORDS))
    return " ".join(words)


def _timestamps(rng: np.random.Generator, n: int) -> List[str]:
    secs = np.sort(rng.integers(0, _SPAN_SEC, size=n))
    return [(_EPOCH + timedelta(seconds=int(s))).isoformat() for s in secs]


def _props(rng: np.random.Generator, is_bot: bool, n_tweets: int) -> tuple:
    shift = -0.3 if is_bot else 0.0
    numeric = {
        "followers_count": float(np.round(np.exp(rng.normal(5.0 + shift, 1.2)))),
        "following_count": float(np.round(np.exp(rng.normal(5.0 - shift, 1.0)))),
        "tweet_count": float(np.round(np.exp(rng.normal(7.0, 1.0)))) + n_tweets,
        "account_age_days": float(np.round(rng.uniform(30.0, 3000.0) * (0.8 if is_bot else 1.0))),
    }
    categorical = {
        "verified": "true" if rng.random() < (0.03 if is_bot else 0.1) else "false",
        "default_profile": "true" if rng.random() < (0.45 if is_bot else 0.3) else "false",
        "location": LOCATIONS[int(rng.integers(len(LOCATIONS)))],
    }
    return numeric, categorical


def _edges(rng: np.random.Generator, labels: List[str], edge_density: float) -> List[Edge]:
    n = len(labels)
    in_deg = np.zeros(n, dtype=np.float64)
    follows = set()
    bots = np.array([lab == LABEL_BOT for lab in labels])
    for v in range(1, n):
        m = min(v, max(1, int(rng.poisson(edge_density))))
        pool = np.arange(v)
        if bots[v] and rng.random() < 0.5 and bots[:v].any():
            pool = pool[bots[:v]]
        weights = in_deg[pool] + 1.0
        picks = rng.choice(pool, size=min(m, len(pool)), replace=False, p=weights / weights.sum())
        for u in sorted(int(p) for p in picks):
            follows.add((v, u))
            in_deg[u] += 1.0
    # ids are assigned in creation order, older accounts follow back sometimes
    edges: List[Edge] = []
    for src, dst in sorted(follows):
        edges.append(Edge(src=f"u{src:04d}", dst=f"u{dst:04d}", relation=RELATION_FOLLOW))
        if rng.random() < 0.25:
            edges.append(Edge(src=f"u{dst:04d}", dst=f"u{src:04d}", relation=RELATION_FRIEND))
    return edges


def synth_fixture(
    n_users: int = settings.FIXTURE_USERS,
    bot_fraction: float = settings.FIXTURE_BOT_FRACTION,
    edge_density: float = settings.FIXTURE_EDGE_DENSITY,
    vocab: Union[int, Sequence[str]] = settings.FIXTURE_TOPIC_WORDS,
    seed: int = 0,
    tweets_min: int = settings.FIXTURE_TWEETS_MIN,
    tweets_max: int = settings.FIXTURE_TWEETS_MAX,
) -> Dataset:
    if not 0.0 < bot_fraction < 1.0:
        raise ValueError("synth_fixture: bot_fraction must be in (0, 1)")
    if n_users < 2:
        raise ValueError("synth_fixture: need at least 2 users")
    rng = np.random.default_rng(seed)
    words = topic_vocabulary(vocab) if isinstance(vocab, int) else list(vocab)
    topics = _topics(words)

    n_bots = int(round(n_users * bot_fraction))
    n_bots = min(max(n_bots, 1), n_users - 1)
    bot_slots = set(int(i) for i in rng.permutation(n_users)[:n_bots])
    labels = [LABEL_BOT if i in bot_slots else LABEL_HUMAN for i in range(n_users)]

    users: List[UserRecord] = []
    for i, label in enumerate(labels):
        is_bot = label == LABEL_BOT
        mixture = rng.dirichlet(np.full(len(topics), 0.3))
        n_tweets = int(rng.integers(tweets_min, tweets_max + 1))
        texts = [bot_tweet(rng, topics) if is_bot else human_tweet(rng, topics, mixture) for _ in range(n_tweets)]
        stamps = _timestamps(rng, n_tweets)
        numeric, categorical = _props(rng, is_bot, n_tweets)
        users.append(
            UserRecord(
                id=f"u{i:04d}",
                label=label,
                numeric_props=numeric,
                categorical_props=categorical,
                description=_description(rng, topics, mixture, is_bot),
                tweets=[Tweet(timestamp=s, text=t) for s, t in zip(stamps, texts)],
            )
        )

    ds = Dataset(users=users, edges=_edges(rng, labels, edge_density))
    ds.validate()
    log.info("fixture users=%d bots=%d edges=%d seed=%d", n_users, n_bots, len(ds.edges), seed)
    return ds


def planted_partition_edges(
    block_sizes: Sequence[int], p_in: float, p_out: float, seed: int
) -> tuple:
    """Undirected planted-block graph as (user ids, follow edges, planted block per id)."""
    rng = np.random.default_rng(seed)
    ids: List[str] = []
    block: dict = {}
    for b, size in enumerate(block_sizes):
        for _ in range(size):
            uid = f"u{len(ids):04d}"
            ids.append(uid)
            block[uid] = b
    edges: List[Edge] = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            p = p_in if block[ids[i]] == block[ids[j]] else p_out
            if rng.random() < p:
                edges.append(Edge(src=ids[i], dst=ids[j], relation=RELATION_FOLLOW))
    return ids, edges, block


def graph_dataset(ids: Sequence[str], edges: Sequence[Edge], labels: Optional[Sequence[str]] = None) -> Dataset:
    """Bare dataset over a given graph (no text); all humans unless labels are given."""
    labs = list(labels) if labels is not None else [LABEL_HUMAN] * len(ids)
    users = [UserRecord(id=uid, label=lab) for uid, lab in zip(ids, labs)]
    ds = Dataset(users=users, edges=list(edges))
    ds.validate()
    return ds
