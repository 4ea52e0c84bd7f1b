from __future__ import annotations

import numpy as np
import pytest

from services import fixture_service, spread_service
from services.spread_service import KeywordEchoAgent, run_spread
from storage.table_store import read_table

KEYWORDS = ["vaccine", "lockdown"]


@pytest.fixture(scope="module")
def community():
    return fixture_service.synth_fixture(n_users=300, bot_fraction=0.2, seed=0, tweets_min=2, tweets_max=4)


def test_keyword_match_is_whole_word():
    assert spread_service.mentions_event("New Vaccine rollout", KEYWORDS)
    assert not spread_service.mentions_event("vaccines", ["vaccine"])
    assert not spread_service.mentions_event("", KEYWORDS)


def test_seed_contract(community):
    state = run_spread(community, KEYWORDS, steps=3, seed=1, seed_count=30)
    assert state.counts[0] == 30
    assert sum(1 for s in state.first_post_step.values() if s == 0) == 30


def test_earliest_on_topic_authors_seed_first(star_dataset):
    assert spread_service.seed_authors(star_dataset, ["vaccine"], 1, seed=0) == ["u00"]
    filled = spread_service.seed_authors(star_dataset, ["vaccine"], 3, seed=0)
    assert filled[0] == "u00" and len(set(filled)) == 3


def test_counts_never_decrease(community):
    state = run_spread(community, KEYWORDS, steps=12, seed=2, seed_count=30)
    assert len(state.counts) == 13
    assert all(b >= a for a, b in zip(state.counts, state.counts[1:]))
    assert state.counts[-1] == len(state.authors) <= len(community.users)


def test_star_saturates_in_one_hop(star_dataset):
    state = run_spread(star_dataset, ["vaccine"], steps=2, seed=0, seed_count=1, post_probability=1.0)
    assert state.counts == [1, 6, 6]
    assert {uid: s for uid, s in state.first_post_step.items() if s == 1} == {f"u{i:02d}": 1 for i in range(1, 6)}


def test_nobody_posts_at_zero_probability(star_dataset):
    state = run_spread(star_dataset, ["vaccine"], steps=3, seed_count=1, post_probability=0.0)
    assert state.counts == [1, 1, 1, 1]


def test_off_topic_posts_do_not_count(star_dataset):
    state = run_spread(star_dataset, ["vaccine"], lambda uid, prompt, seed: "lovely weather", steps=2, seed_count=1, post_probability=1.0)
    assert state.counts == [1, 1, 1]


def test_failing_agents_are_skipped(star_dataset):
    def agent(uid, prompt, seed):
        if uid == "u03":
            raise RuntimeError("boom")
        return "vaccine"

    state = run_spread(star_dataset, ["vaccine"], agent, steps=1, seed_count=1, post_probability=1.0)
    assert state.counts == [1, 5]
    assert "u03" not in state.authors


def test_too_many_seeds(star_dataset):
    with pytest.raises(ValueError):
        run_spread(star_dataset, ["vaccine"], seed_count=7)


def test_spread_is_seeded(community):
    a = run_spread(community, KEYWORDS, steps=6, seed=4, seed_count=30)
    b = run_spread(community, KEYWORDS, steps=6, seed=4, seed_count=30)
    assert a.counts == b.counts and a.first_post_step == b.first_post_step


def test_echo_agent_adds_a_keyword():
    agent = KeywordEchoAgent(KEYWORDS, base=lambda uid, prompt, seed: "big news")
    text = agent("u1", "", 3)
    assert text.startswith("big news ") and spread_service.mentions_event(text, KEYWORDS)
    with pytest.raises(ValueError):
        KeywordEchoAgent([])


def test_growth_slows_after_the_fast_phase(community):
    state = run_spread(community, KEYWORDS, steps=25, seed=0, seed_count=30)
    inc = np.diff(state.counts)
    peak = int(np.argmax(inc))
    assert peak < len(inc) - 1
    assert inc[-1] < inc[peak]
    assert np.mean(inc[peak + 1:]) < inc[peak]


def test_saved_curve(tmp_path, star_dataset):
    state = run_spread(star_dataset, ["vaccine"], steps=1, seed_count=1, post_probability=1.0)
    path = tmp_path / "spread.csv"
    spread_service.save_spread(str(path), state)
    df = read_table(path, spread_service.SPREAD_COLUMNS)
    assert df["authors"].tolist() == [1, 6]
