from __future__ import annotations

from typing import List, Sequence

import pytest

from config.constants import LABEL_BOT, LABEL_HUMAN, RELATION_FOLLOW
from domain.corpus import Dataset, Edge, Tweet, UserRecord
from domain.detector import DetectorHyper
from services import fixture_service


def make_user(uid: str, label: str = LABEL_HUMAN, texts: Sequence[str] = (), **numeric: float) -> UserRecord:
    tweets = [Tweet(timestamp=f"2022-01-{i + 1:02d}T00:00:00+00:00", text=t) for i, t in enumerate(texts)]
    return UserRecord(
        id=uid,
        label=label,
        numeric_props={k: float(v) for k, v in numeric.items()},
        categorical_props={"verified": "false"},
        description=f"account {uid}",
        tweets=tweets,
    )


def follow(pairs: Sequence[tuple]) -> List[Edge]:
    return [Edge(src=a, dst=b, relation=RELATION_FOLLOW) for a, b in pairs]


@pytest.fixture(scope="session")
def tiny_dataset() -> Dataset:
    return fixture_service.synth_fixture(n_users=40, bot_fraction=0.25, seed=3, tweets_min=4, tweets_max=6)


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    return fixture_service.synth_fixture(n_users=80, bot_fraction=0.25, seed=11, tweets_min=5, tweets_max=8)


@pytest.fixture
def small_hyper() -> DetectorHyper:
    return DetectorHyper(hidden=12, dropout=0.0, lr=1e-2, weight_decay=0.0, epochs=15)


@pytest.fixture
def star_dataset() -> Dataset:
    """u00 is the hub; u01..u05 follow it and nobody else."""
    users = [make_user("u00", texts=["big vaccine news today"])]
    users += [make_user(f"u{i:02d}", texts=["quiet day"]) for i in range(1, 6)]
    ds = Dataset(users=users, edges=follow([(f"u{i:02d}", "u00") for i in range(1, 6)]))
    ds.validate()
    return ds


@pytest.fixture
def two_user_dataset() -> Dataset:
    users = [make_user("a", texts=["good day"]), make_user("b", LABEL_BOT, texts=["bad day"])]
    ds = Dataset(users=users, edges=follow([("a", "b"), ("b", "a")]))
    ds.validate()
    return ds
