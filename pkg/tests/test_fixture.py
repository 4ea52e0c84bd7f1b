from __future__ import annotations

import pytest

from config.constants import LABEL_BOT, LABEL_HUMAN
from services import fixture_service


def test_same_seed_same_fixture():
    a = fixture_service.synth_fixture(n_users=30, bot_fraction=0.3, seed=5, tweets_min=2, tweets_max=4)
    b = fixture_service.synth_fixture(n_users=30, bot_fraction=0.3, seed=5, tweets_min=2, tweets_max=4)
    assert a.structure_equals(b)


def test_other_seed_differs():
    a = fixture_service.synth_fixture(n_users=30, bot_fraction=0.3, seed=5, tweets_min=2, tweets_max=4)
    b = fixture_service.synth_fixture(n_users=30, bot_fraction=0.3, seed=6, tweets_min=2, tweets_max=4)
    assert not a.structure_equals(b)


def test_bot_share_and_tweet_counts(tiny_dataset):
    bots = sum(u.label == LABEL_BOT for u in tiny_dataset.users)
    assert bots == 10
    assert all(4 <= len(u.tweets) <= 6 for u in tiny_dataset.users)
    assert all(u.tweets == sorted(u.tweets, key=lambda t: t.timestamp) for u in tiny_dataset.users)


def test_every_user_has_the_same_properties(tiny_dataset):
    numeric = {tuple(sorted(u.numeric_props)) for u in tiny_dataset.users}
    categorical = {tuple(sorted(u.categorical_props)) for u in tiny_dataset.users}
    assert len(numeric) == 1 and len(categorical) == 1


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1])
def test_bot_fraction_must_be_strictly_inside(fraction):
    with pytest.raises(ValueError):
        fixture_service.synth_fixture(n_users=10, bot_fraction=fraction)


def test_topic_vocabulary_is_unique_and_stable():
    words = fixture_service.topic_vocabulary(300)
    assert len(set(words)) == 300
    assert words[:20] == fixture_service.topic_vocabulary(20)


def test_bot_templates_lean_on_promo_words():
    promo = set(fixture_service.PROMO_WORDS)

    def share(texts):
        words = [w.lstrip("#") for t in texts for w in t.split()]
        return sum(w in promo for w in words) / len(words)

    bots = fixture_service.template_tweets(LABEL_BOT, 40, seed=1)
    humans = fixture_service.template_tweets(LABEL_HUMAN, 40, seed=1)
    assert share(bots) > 0.4 > 0.1 > share(humans)


def test_planted_partition_has_no_cross_edges_when_p_out_is_zero():
    ids, edges, block = fixture_service.planted_partition_edges([5, 5], 1.0, 0.0, seed=0)
    assert len(ids) == 10
    assert len(edges) == 2 * 10
    assert all(block[e.src] == block[e.dst] for e in edges)
