"""
Community dataset files.

users.jsonl   {id, label, numeric_props, categorical_props, description[, community_id]}
tweets.jsonl  {user_id, timestamp, text}
edges.csv     src,dst,relation
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple

import pandas as pd
from dateutil.parser import isoparse

from config.constants import LABELS, RELATIONS
from domain.corpus import Dataset, Edge, Tweet, UserRecord
from domain.errors import DatasetParseError, ReferentialIntegrityError, SchemaError
from utils.logger import get_logger


log = get_logger(__name__)

USERS_FILE = "users.jsonl"
TWEETS_FILE = "tweets.jsonl"
EDGES_FILE = "edges.csv"
EDGE_COLUMNS = ["src", "dst", "relation"]


def _iter_jsonl(path: str) -> Iterator[Tuple[int, Dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetParseError(path, lineno, f"invalid JSON: {e.msg}") from e
            if not isinstance(rec, dict):
                raise DatasetParseError(path, lineno, "record is not an object")
            yield lineno, rec


def _parse_user(path: str, lineno: int, rec: Dict[str, Any]) -> Tuple[UserRecord, Any]:
    uid = str(rec.get("id", "") or "").strip()
    if not uid:
        raise DatasetParseError(path, lineno, "missing id")
    label = str(rec.get("label", "")).strip().lower()
    if label not in LABELS:
        raise DatasetParseError(path, lineno, f"label must be one of {list(LABELS)}, got {label!r}")

    numeric: Dict[str, float] = {}
    for k, v in (rec.get("numeric_props") or {}).items():
        try:
            numeric[str(k)] = float(v)
        except (TypeError, ValueError):
            raise DatasetParseError(path, lineno, f"numeric property {k!r} is not a number") from None
    categorical = {str(k): str(v) for k, v in (rec.get("categorical_props") or {}).items()}

    user = UserRecord(
        id=uid,
        label=label,
        numeric_props=numeric,
        categorical_props=categorical,
        description=str(rec.get("description", "") or ""),
    )
    return user, rec.get("community_id")


def _read_users(path: str) -> Tuple[List[UserRecord], Dict[str, int]]:
    users: List[UserRecord] = []
    communities: Dict[str, int] = {}
    seen: Dict[str, int] = {}
    for lineno, rec in _iter_jsonl(path):
        user, comm = _parse_user(path, lineno, rec)
        if user.id in seen:
            raise DatasetParseError(path, lineno, f"duplicate user id {user.id!r} (first on line {seen[user.id]})")
        seen[user.id] = lineno
        if comm is not None:
            communities[user.id] = int(comm)
        users.append(user)
    return users, communities


def _read_tweets(path: str, known: Dict[str, UserRecord]) -> None:
    buckets: Dict[str, List[Tuple[Any, int, Tweet]]] = {}
    for lineno, rec in _iter_jsonl(path):
        uid = str(rec.get("user_id", "") or "").strip()
        if uid not in known:
            raise ReferentialIntegrityError(uid, f"{path}:{lineno}: tweet references unknown user id")
        ts = str(rec.get("timestamp", "") or "").strip()
        try:
            when = isoparse(ts)
        except ValueError:
            raise DatasetParseError(path, lineno, f"timestamp {ts!r} is not ISO-8601") from None
        buckets.setdefault(uid, []).append((when, lineno, Tweet(timestamp=ts, text=str(rec.get("text", "") or ""))))
    for uid, items in buckets.items():
        try:
            items.sort(key=lambda x: (x[0], x[1]))
        except TypeError:
            raise DatasetParseError(path, items[0][1], f"user {uid!r} mixes naive and zoned timestamps") from None
        known[uid].tweets = [t for _, _, t in items]


def _read_edges(path: str, known: Dict[str, UserRecord]) -> List[Edge]:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetParseError(path, 1, f"unreadable CSV: {e}") from e
    if list(df.columns) != EDGE_COLUMNS:
        raise DatasetParseError(path, 1, f"header must be {','.join(EDGE_COLUMNS)}")

    edges: List[Edge] = []
    seen = set()
    self_loops = 0
    duplicates = 0
    for row_no, (src, dst, rel) in enumerate(df.itertuples(index=False, name=None)):
        lineno = row_no + 2  # header is line 1
        src, dst, rel = src.strip(), dst.strip(), rel.strip().lower()
        if rel not in RELATIONS:
            raise DatasetParseError(path, lineno, f"relation must be one of {list(RELATIONS)}, got {rel!r}")
        for end in (src, dst):
            if end not in known:
                raise ReferentialIntegrityError(end, f"{path}:{lineno}: edge references unknown user id")
        if src == dst:
            self_loops += 1
            continue
        key = (src, dst, rel)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        edges.append(Edge(src=src, dst=dst, relation=rel))
    if self_loops or duplicates:
        log.warning("edges_dropped path=%s self_loops=%d duplicates=%d", path, self_loops, duplicates)
    return edges


def load_dataset(user_path: str, tweet_path: str, edge_path: str) -> Dataset:
    """Read and validate the three files; never returns a partially valid dataset."""
    for p in (user_path, tweet_path, edge_path):
        if not Path(p).is_file():
            raise DatasetParseError(str(p), 0, "file not found")

    users, communities = _read_users(user_path)
    known = {u.id: u for u in users}
    _read_tweets(tweet_path, known)
    edges = _read_edges(edge_path, known)

    community_id = None
    if communities:
        if len(communities) != len(users):
            missing = sorted(set(known) - set(communities))
            raise SchemaError(f"load_dataset: community_id present for some users only (first missing {missing[0]!r})")
        community_id = communities

    ds = Dataset(users=users, edges=edges, community_id=community_id)
    ds.validate()
    log.info("dataset_loaded users=%d edges=%d bots=%d", len(users), len(edges), len(ds.bot_indices()))
    return ds


def dataset_paths(directory: str) -> Tuple[str, str, str]:
    d = Path(directory)
    return str(d / USERS_FILE), str(d / TWEETS_FILE), str(d / EDGES_FILE)


def load_dataset_dir(directory: str) -> Dataset:
    return load_dataset(*dataset_paths(directory))


def save_dataset(dataset: Dataset, directory: str) -> Tuple[str, str, str]:
    """Write the three files with sorted keys and fixed line endings so output is byte-stable."""
    user_path, tweet_path, edge_path = dataset_paths(directory)
    Path(directory).mkdir(parents=True, exist_ok=True)

    with open(user_path, "w", encoding="utf-8", newline="\n") as f:
        for u in dataset.users:
            rec = u.to_dict()
            if dataset.community_id is not None:
                rec["community_id"] = int(dataset.community_id[u.id])
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    with open(tweet_path, "w", encoding="utf-8", newline="\n") as f:
        for u in dataset.users:
            for t in u.tweets:
                rec = {"user_id": u.id, "timestamp": t.timestamp, "text": t.text}
                f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    df = pd.DataFrame([e.to_tuple() for e in dataset.edges], columns=EDGE_COLUMNS)
    df.to_csv(edge_path, index=False, lineterminator="\n")
    return user_path, tweet_path, edge_path
