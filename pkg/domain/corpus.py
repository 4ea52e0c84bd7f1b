from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from dateutil.parser import isoparse

from config.constants import LABEL_BOT, LABEL_HUMAN, LABELS, RELATIONS
from domain.errors import ReferentialIntegrityError, SchemaError


@dataclass(frozen=True)
class Tweet:
    timestamp: str  # ISO-8601
    text: str

    def to_dict(self) -> Dict[str, Any]:
        return {"timestamp": self.timestamp, "text": self.text}


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: str

    def to_tuple(self) -> Tuple[str, str, str]:
        return (self.src, self.dst, self.relation)


@dataclass
class UserRecord:
    id: str
    label: str
    numeric_props: Dict[str, float] = field(default_factory=dict)
    categorical_props: Dict[str, str] = field(default_factory=dict)
    description: str = ""
    tweets: List[Tweet] = field(default_factory=list)

    @property
    def is_bot(self) -> bool:
        return self.label == LABEL_BOT

    def validate_basic(self) -> None:
        if not self.id:
            raise SchemaError("UserRecord.validate_basic: empty id")
        if self.label not in LABELS:
            raise SchemaError(f"UserRecord.validate_basic: user {self.id!r} has label {self.label!r}")
        for k, v in self.numeric_props.items():
            if not math.isfinite(float(v)):
                raise SchemaError(f"UserRecord.validate_basic: user {self.id!r} property {k!r} is not finite")
        try:
            stamps = [isoparse(t.timestamp) for t in self.tweets]
            ordered = all(a <= b for a, b in zip(stamps, stamps[1:]))
        except (ValueError, TypeError) as e:
            raise SchemaError(f"UserRecord.validate_basic: user {self.id!r} has a bad timestamp: {e}") from e
        if not ordered:
            raise SchemaError(f"UserRecord.validate_basic: user {self.id!r} tweets not sorted by timestamp")

    def to_dict(self) -> Dict[str, Any]:
        # tweets live in their own file
        return {
            "id": self.id,
            "label": self.label,
            "numeric_props": dict(self.numeric_props),
            "categorical_props": dict(self.categorical_props),
            "description": self.description,
        }

    def replace_tweets(self, tweets: List[Tweet]) -> "UserRecord":
        return UserRecord(
            id=self.id,
            label=self.label,
            numeric_props=dict(self.numeric_props),
            categorical_props=dict(self.categorical_props),
            description=self.description,
            tweets=list(tweets),
        )


@dataclass
class Dataset:
    users: List[UserRecord]
    edges: List[Edge] = field(default_factory=list)
    community_id: Optional[Dict[str, int]] = None

    def __post_init__(self) -> None:
        self._index: Optional[Dict[str, int]] = None

    # ---- lookup ----
    @property
    def index(self) -> Dict[str, int]:
        if self._index is None or len(self._index) != len(self.users):
            self._index = {u.id: i for i, u in enumerate(self.users)}
        return self._index

    @property
    def user_ids(self) -> List[str]:
        return [u.id for u in self.users]

    def user(self, user_id: str) -> UserRecord:
        i = self.index.get(user_id)
        if i is None:
            raise ReferentialIntegrityError(user_id)
        return self.users[i]

    def human_labels(self) -> np.ndarray:
        """1 for human, 0 for bot, in user order."""
        return np.array([1 if u.label == LABEL_HUMAN else 0 for u in self.users], dtype=np.int64)

    def bot_indices(self) -> List[int]:
        return [i for i, u in enumerate(self.users) if u.is_bot]

    def followees(self, user_id: str) -> List[str]:
        """Accounts the user follows, sorted, relation-agnostic."""
        return sorted({e.dst for e in self.edges if e.src == user_id})

    def neighbors(self, user_id: str) -> List[str]:
        """Following or followed-by, sorted."""
        out = set()
        for e in self.edges:
            if e.src == user_id:
                out.add(e.dst)
            elif e.dst == user_id:
                out.add(e.src)
        return sorted(out)

    def followee_lists(self) -> List[List[int]]:
        """Per user index: sorted indices of followed users (all relations, deduplicated)."""
        idx = self.index
        out: List[set] = [set() for _ in self.users]
        for e in self.edges:
            out[idx[e.src]].add(idx[e.dst])
        return [sorted(s) for s in out]

    # ---- checks ----
    def validate(self) -> None:
        seen = set()
        for u in self.users:
            if u.id in seen:
                raise SchemaError(f"Dataset.validate: duplicate user id {u.id!r}")
            seen.add(u.id)
            u.validate_basic()
        for e in self.edges:
            if e.relation not in RELATIONS:
                raise SchemaError(f"Dataset.validate: unknown relation {e.relation!r}")
            for end in (e.src, e.dst):
                if end not in seen:
                    raise ReferentialIntegrityError(end, "edge references unknown user id")
            if e.src == e.dst:
                raise SchemaError(f"Dataset.validate: self-loop on {e.src!r}")
        if self.community_id is not None:
            missing = [uid for uid in seen if uid not in self.community_id]
            if missing:
                raise ReferentialIntegrityError(sorted(missing)[0], "user without community tag")

    def with_users(self, users: List[UserRecord]) -> "Dataset":
        return Dataset(users=users, edges=list(self.edges), community_id=self.community_id)

    def structure_equals(self, other: "Dataset") -> bool:
        if self.user_ids != other.user_ids:
            return False
        for a, b in zip(self.users, other.users):
            if a.to_dict() != b.to_dict() or a.tweets != b.tweets:
                return False
        return sorted(e.to_tuple() for e in self.edges) == sorted(e.to_tuple() for e in other.edges)


@dataclass
class CommunityPartition:
    assignment: Dict[str, int]
    modularity: float
    # modularity after each aggregation level
    level_modularity: List[float] = field(default_factory=list)

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def members(self) -> Dict[int, List[str]]:
        out: Dict[int, List[str]] = {}
        for uid, c in self.assignment.items():
            out.setdefault(c, []).append(uid)
        return {c: sorted(v) for c, v in sorted(out.items())}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "assignment": dict(sorted(self.assignment.items())),
            "modularity": self.modularity,
            "level_modularity": list(self.level_modularity),
        }


@dataclass
class Split:
    train: List[int]
    val: List[int]
    test: List[int]

    def validate_partition(self, n_users: int) -> None:
        parts = [set(self.train), set(self.val), set(self.test)]
        if sum(len(p) for p in parts) != n_users or set().union(*parts) != set(range(n_users)):
            raise SchemaError("Split.validate_partition: splits do not partition the users")

    def to_dict(self) -> Dict[str, Any]:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Split":
        return cls(train=[int(i) for i in d["train"]], val=[int(i) for i in d["val"]], test=[int(i) for i in d["test"]])
