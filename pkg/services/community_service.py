from __future__ import annotations

from typing import Dict, List, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from config import settings
from config.constants import LABELS
from domain.corpus import CommunityPartition, Dataset, Split
from domain.errors import SchemaError
from utils.logger import get_logger
from utils.rng import substream


log = get_logger(__name__)

_MONOTONE_TOL = 1e-12


def undirected_edges(dataset: Dataset) -> Set[Tuple[str, str]]:
    """Simple undirected projection of all typed edges."""
    out: Set[Tuple[str, str]] = set()
    for e in dataset.edges:
        if e.src == e.dst:
            continue
        out.add((e.src, e.dst) if e.src < e.dst else (e.dst, e.src))
    return out


def _modularity_of(
    nodes: Sequence[str], pairs: Set[Tuple[str, str]], assignment: Dict[str, int], resolution: float
) -> float:
    m = len(pairs)
    if m == 0:
        return 0.0
    deg: Dict[str, int] = {u: 0 for u in nodes}
    inner: Dict[int, int] = {}
    for a, b in pairs:
        deg[a] += 1
        deg[b] += 1
        if assignment[a] == assignment[b]:
            inner[assignment[a]] = inner.get(assignment[a], 0) + 1
    tot: Dict[int, int] = {}
    for u in nodes:
        tot[assignment[u]] = tot.get(assignment[u], 0) + deg[u]
    q = 0.0
    for c, a_c in tot.items():
        q += inner.get(c, 0) / m - resolution * (a_c / (2.0 * m)) ** 2
    return q


def modularity(dataset: Dataset, partition: CommunityPartition, resolution: float = 1.0) -> float:
    """Q = sum_c (e_c/m - gamma (a_c/2m)^2) on the undirected simple graph; 0 without edges."""
    uncovered = [uid for uid in dataset.user_ids if uid not in partition.assignment]
    if uncovered:
        raise SchemaError(f"modularity: partition does not cover user {uncovered[0]!r}")
    return _modularity_of(dataset.user_ids, undirected_edges(dataset), partition.assignment, resolution)


def _relabel(dataset: Dataset, groups: Sequence[Set[str]]) -> Dict[str, int]:
    # community index = order of each community's first member in the dataset
    order = dataset.index
    ranked = sorted(groups, key=lambda g: min(order[u] for u in g))
    return {u: c for c, g in enumerate(ranked) for u in g}


def detect_communities(
    dataset: Dataset,
    seed: int = 0,
    resolution: float = settings.LOUVAIN_RESOLUTION,
    threshold: float = settings.LOUVAIN_THRESHOLD,
) -> CommunityPartition:
    """
    Louvain (local moves + aggregation) on the undirected projection.
    Each level's modularity is recomputed here and must not decrease.
    """
    if not dataset.users:
        raise ValueError("detect_communities: empty graph")
    nodes = dataset.user_ids
    pairs = undirected_edges(dataset)

    g = nx.Graph()
    g.add_nodes_from(nodes)
    g.add_edges_from(sorted(pairs))

    singleton = {u: i for i, u in enumerate(nodes)}
    levels: List[float] = [_modularity_of(nodes, pairs, singleton, resolution)]
    best = singleton
    if pairs:
        for level in nx.community.louvain_partitions(g, resolution=resolution, threshold=threshold, seed=seed):
            assignment = _relabel(dataset, level)
            q = _modularity_of(nodes, pairs, assignment, resolution)
            if q < levels[-1] - _MONOTONE_TOL:
                raise RuntimeError(f"detect_communities: modularity fell from {levels[-1]:.6f} to {q:.6f}")
            levels.append(q)
            best = assignment
    else:
        best = _relabel(dataset, [{u} for u in nodes])

    part = CommunityPartition(assignment=best, modularity=levels[-1], level_modularity=levels)
    log.info("louvain communities=%d modularity=%.4f levels=%d", part.n_communities, part.modularity, len(levels) - 1)
    return part


def subset_by_community(dataset: Dataset, partition: CommunityPartition, min_users: int = 1) -> Dict[int, Dataset]:
    """Per-community sub-datasets; only edges with both ends inside a community survive."""
    out: Dict[int, Dataset] = {}
    for c, members in partition.members().items():
        if len(members) < min_users:
            continue
        keep = set(members)
        users = [u for u in dataset.users if u.id in keep]
        edges = [e for e in dataset.edges if e.src in keep and e.dst in keep]
        out[c] = Dataset(users=users, edges=edges, community_id={u.id: c for u in users})
    return out


def _allocate(n: int, ratios: Sequence[float]) -> List[int]:
    """Largest-remainder allocation of n items to parts; ties go to the earlier part."""
    total = float(sum(ratios))
    raw = [n * r / total for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    rest = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def split_dataset(dataset: Dataset, ratios: Sequence[float] = settings.SPLIT_RATIOS, seed: int = 0) -> Split:
    """Stratified train/val/test index split; each class is shuffled and allocated separately."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ValueError("split_dataset: ratios must be three non-negative numbers with a positive sum")
    n_parts = sum(1 for r in ratios if r > 0)
    if len(dataset.users) < n_parts:
        raise ValueError(f"split_dataset: {len(dataset.users)} users cannot fill {n_parts} parts")

    parts: List[List[int]] = [[], [], []]
    for label in LABELS:
        idx = np.array([i for i, u in enumerate(dataset.users) if u.label == label], dtype=np.int64)
        if idx.size == 0:
            continue
        idx = idx[substream(seed, "split", label).permutation(idx.size)]
        lo = 0
        for p, cnt in enumerate(_allocate(int(idx.size), ratios)):
            parts[p].extend(int(i) for i in idx[lo:lo + cnt])
            lo += cnt

    split = Split(train=sorted(parts[0]), val=sorted(parts[1]), test=sorted(parts[2]))
    split.validate_partition(len(dataset.users))
    return split
