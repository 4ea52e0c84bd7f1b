from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np

from domain.errors import SchemaError, ShapeError


@dataclass
class AgentState:
    user_id: str
    opinion: float
    recent_posts: List[Tuple[int, str]] = field(default_factory=list)
    informed: bool = False

    def remember(self, step: int, text: str, limit: int) -> None:
        self.recent_posts.append((step, text))
        if len(self.recent_posts) > limit:
            del self.recent_posts[: len(self.recent_posts) - limit]


@dataclass(frozen=True)
class ScheduledEvent:
    step: int
    date: str
    text: str


@dataclass
class EventSchedule:
    name: str
    events: List[ScheduledEvent]

    @property
    def horizon(self) -> int:
        return len(self.events)

    def validate_basic(self) -> None:
        steps = [e.step for e in self.events]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise SchemaError(f"EventSchedule {self.name!r}: steps must be strictly increasing")

    def event_at(self, step: int) -> Optional[ScheduledEvent]:
        for e in self.events:
            if e.step == step:
                return e
        return None

    def past(self, step: int, window: int) -> List[ScheduledEvent]:
        before = [e for e in self.events if e.step < step]
        return before[-window:] if window > 0 else []

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "EventSchedule":
        events = [ScheduledEvent(step=int(e["step"]), date=str(e.get("date", "")), text=str(e["text"])) for e in d["events"]]
        sched = cls(name=str(d.get("name", "")), events=events)
        sched.validate_basic()
        return sched


@dataclass
class OpinionTrajectory:
    """
    opinions[t, i] is user i's opinion after step t. Simulated runs keep the
    pre-update state as row 0 (with_initial=True); traces read from files hold
    only the T post-update rows.
    """

    user_ids: List[str]
    opinions: np.ndarray
    with_initial: bool = True

    def __post_init__(self) -> None:
        self.opinions = np.asarray(self.opinions, dtype=np.float64)
        if self.opinions.ndim != 2 or self.opinions.shape[1] != len(self.user_ids):
            raise ShapeError(f"OpinionTrajectory: opinions shape {self.opinions.shape} for {len(self.user_ids)} users")
        if self.with_initial and self.opinions.shape[0] < 1:
            raise ShapeError("OpinionTrajectory: missing the initial row")

    @property
    def horizon(self) -> int:
        return int(self.opinions.shape[0])

    @property
    def updates(self) -> np.ndarray:
        """(T, n) post-update opinions."""
        return self.opinions[1:] if self.with_initial else self.opinions

    @property
    def steps(self) -> int:
        return int(self.updates.shape[0])

    @property
    def step_numbers(self) -> List[int]:
        """x positions of the rows: 0 is the initial state, t the state after update t."""
        first = 0 if self.with_initial else 1
        return list(range(first, first + self.horizon))

    @property
    def means(self) -> np.ndarray:
        return self.opinions.mean(axis=1)

    @property
    def stds(self) -> np.ndarray:
        # population std
        return self.opinions.std(axis=1, ddof=0)

    def to_rows(self) -> List[Tuple[int, str, float]]:
        """Trace rows (step, user, opinion) over the post-update states, steps 0..T-1."""
        ops = self.updates
        return [(t, uid, float(ops[t, i])) for t in range(ops.shape[0]) for i, uid in enumerate(self.user_ids)]


@dataclass
class SpreadState:
    authors: Set[str] = field(default_factory=set)
    # authors[t] after step t; counts[0] is the seed count
    counts: List[int] = field(default_factory=list)
    first_post_step: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class OpinionMetrics:
    mean: float
    std: float
    delta_bias: float
    delta_div: float

    def to_dict(self) -> Dict[str, float]:
        return {"mean": self.mean, "std": self.std, "delta_bias": self.delta_bias, "delta_div": self.delta_div}
