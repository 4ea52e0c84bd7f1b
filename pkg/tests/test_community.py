from __future__ import annotations

from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from config.constants import LABEL_BOT, LABEL_HUMAN
from domain.corpus import CommunityPartition
from domain.errors import SchemaError
from services import community_service, fixture_service
from tests.conftest import follow


def _two_triangles():
    ids = ["a", "b", "c", "d", "e", "f"]
    edges = follow([("a", "b"), ("b", "c"), ("c", "a"), ("d", "e"), ("e", "f"), ("f", "d")])
    return fixture_service.graph_dataset(ids, edges)


def _pair_agreement(found: dict, planted: dict) -> float:
    ids = sorted(planted)
    agree = sum((found[a] == found[b]) == (planted[a] == planted[b]) for a, b in combinations(ids, 2))
    return agree / (len(ids) * (len(ids) - 1) / 2)


def test_two_triangles_planted_partition_has_q_one_half():
    ds = _two_triangles()
    part = CommunityPartition(assignment={"a": 0, "b": 0, "c": 0, "d": 1, "e": 1, "f": 1}, modularity=0.0)
    assert community_service.modularity(ds, part) == pytest.approx(0.5, abs=1e-12)


def test_louvain_finds_the_two_triangles():
    part = community_service.detect_communities(_two_triangles(), seed=0)
    assert part.n_communities == 2
    assert part.modularity == pytest.approx(0.5, abs=1e-12)


def test_modularity_matches_networkx(small_dataset):
    part = community_service.detect_communities(small_dataset, seed=1)
    g = nx.Graph()
    g.add_nodes_from(small_dataset.user_ids)
    g.add_edges_from(community_service.undirected_edges(small_dataset))
    groups = [set(m) for m in part.members().values()]
    assert part.modularity == pytest.approx(nx.community.modularity(g, groups), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_planted_blocks_recovered(seed):
    ids, edges, planted = fixture_service.planted_partition_edges([20, 20], 0.5, 0.02, seed)
    part = community_service.detect_communities(fixture_service.graph_dataset(ids, edges), seed=seed)
    assert _pair_agreement(part.assignment, planted) >= 0.95


def test_level_modularity_never_decreases(small_dataset):
    part = community_service.detect_communities(small_dataset, seed=4)
    levels = part.level_modularity
    assert all(b >= a - 1e-12 for a, b in zip(levels, levels[1:]))


def test_graph_without_edges_is_all_singletons():
    ds = fixture_service.graph_dataset(["a", "b", "c"], [])
    part = community_service.detect_communities(ds)
    assert part.n_communities == 3
    assert part.modularity == 0.0


def test_partition_must_cover_every_user():
    ds = _two_triangles()
    with pytest.raises(SchemaError):
        community_service.modularity(ds, CommunityPartition(assignment={"a": 0}, modularity=0.0))


def test_subset_keeps_only_inner_edges():
    ds = _two_triangles()
    ds.edges.extend(follow([("a", "d")]))
    part = CommunityPartition(assignment={"a": 0, "b": 0, "c": 0, "d": 1, "e": 1, "f": 1}, modularity=0.0)
    subs = community_service.subset_by_community(ds, part)
    assert sorted(subs) == [0, 1]
    assert all(len(s.edges) == 3 for s in subs.values())
    assert subs[1].community_id == {"d": 1, "e": 1, "f": 1}


def test_split_is_a_stratified_partition(small_dataset):
    split = community_service.split_dataset(small_dataset, seed=2)
    split.validate_partition(len(small_dataset.users))
    labels = [u.label for u in small_dataset.users]
    for part in (split.train, split.val, split.test):
        kinds = {labels[i] for i in part}
        assert kinds == {LABEL_HUMAN, LABEL_BOT}
    assert len(split.train) == pytest.approx(0.8 * len(labels), abs=2)


def test_split_is_deterministic(small_dataset):
    a = community_service.split_dataset(small_dataset, seed=9)
    b = community_service.split_dataset(small_dataset, seed=9)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.test, b.test)
