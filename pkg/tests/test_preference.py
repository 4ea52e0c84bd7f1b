from __future__ import annotations

import pytest

from config.constants import WEIGHT_UNIFORM
from domain.errors import ShapeError
from domain.policy import GenerationParams
from services import detector_service, feature_service, policy_service, preference_service


def test_choose_pair_prefers_lower_index_on_ties():
    assert preference_service.choose_pair([0.2, 0.9, 0.9, 0.1, 0.1]) == (1, 3)


def test_all_equal_scores_make_no_pair():
    assert preference_service.choose_pair([0.5, 0.5]) is None


def test_draw_bots_is_seeded_and_needs_bots():
    a = preference_service.draw_bots(["x", "y", "z"], 10, seed=4)
    assert a == preference_service.draw_bots(["x", "y", "z"], 10, seed=4)
    assert set(a) <= {"x", "y", "z"}
    with pytest.raises(ShapeError):
        preference_service.draw_bots([], 3, seed=0)


@pytest.fixture
def arena_parts(tiny_dataset):
    schema, _ = feature_service.build_features(tiny_dataset)
    member = detector_service.init_classifier(schema, 6, 0.01, 0.0, seed=0)
    ensemble = detector_service.build_ensemble([member], WEIGHT_UNIFORM)
    texts = [t.text for u in tiny_dataset.users for t in u.tweets]
    policy = policy_service.init_policy(policy_service.build_vocabulary(texts, 64), 128, seed=0, hidden=8, token_dim=4, max_tokens=6)
    bots = [tiny_dataset.users[i].id for i in tiny_dataset.bot_indices()]
    contexts = policy_service.context_vectors(tiny_dataset, bots)
    return policy, ensemble, bots, contexts


def test_pairs_rank_chosen_above_rejected(tiny_dataset, arena_parts):
    policy, ensemble, bots, contexts = arena_parts
    pairs, stats = preference_service.build_preference_pairs(
        policy, ensemble, tiny_dataset, n_pairs=6, candidates=3, seed=2, contexts=contexts, params=GenerationParams(temperature=1.0)
    )
    assert stats.drawn == 6 and stats.pairs + stats.ties == 6
    assert len(pairs) == stats.pairs
    for pair in pairs:
        assert pair.user_id in bots
        assert pair.chosen_score > pair.rejected_score


def test_pairs_are_reproducible(tiny_dataset, arena_parts):
    policy, ensemble, _, contexts = arena_parts
    kwargs = dict(n_pairs=4, candidates=2, seed=9, contexts=contexts, params=GenerationParams(temperature=1.0))
    a, _ = preference_service.build_preference_pairs(policy, ensemble, tiny_dataset, **kwargs)
    b, _ = preference_service.build_preference_pairs(policy, ensemble, tiny_dataset, **kwargs)
    assert [p.to_row() for p in a] == [p.to_row() for p in b]


def test_needs_two_candidates(tiny_dataset, arena_parts):
    policy, ensemble, _, contexts = arena_parts
    with pytest.raises(ValueError):
        preference_service.build_preference_pairs(policy, ensemble, tiny_dataset, 2, 1, 0, contexts)
