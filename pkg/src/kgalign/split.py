"""Train/test variants of a gold alignment and KG subsets.

Two supervised variants are produced with a grouped 80/20 shuffle split:
``shared`` groups correspondences by identity set, so no test pair can be
inferred from the closure of the training pairs; ``exclusive`` groups KGs,
so every KG lands entirely on one side.
"""
from __future__ import annotations

import heapq
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .closure import compute_identity_sets
from .graphalgo import UnionFind
from .model import Alignment

logger = logging.getLogger(__name__)

TEST_FRACTION = 0.2
PRNG_ALGORITHM = "python-random-mt19937/randrange-fisher-yates"


@dataclass
class SplitBundle:
    variant: str
    train: Alignment
    test: Alignment
    grouping: dict[tuple[str, str], Hashable]
    seed: int
    leakage_dropped: int = 0
    degenerate: bool = False
    generator: str = PRNG_ALGORITHM
    test_kgs: list[str] = field(default_factory=list)
    train_kgs: list[str] = field(default_factory=list)

    @property
    def test_fraction(self) -> float:
        n = len(self.train) + len(self.test)
        return len(self.test) / n if n else 0.0

    def report(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "generator": self.generator,
            "train": len(self.train),
            "test": len(self.test),
            "test_fraction": self.test_fraction,
            "groups": len(set(self.grouping.values())),
            "leakage_dropped": self.leakage_dropped,
            "degenerate": self.degenerate,
            "train_kgs": len(self.train_kgs),
            "test_kgs": len(self.test_kgs),
        }


def shuffled_groups(group_ids: Iterable[Hashable], seed: int) -> list:
    """Fisher-Yates permutation of the distinct group ids sorted by their string form."""
    ids = sorted(set(group_ids), key=str)
    rng = random.Random(seed)
    for i in range(len(ids) - 1, 0, -1):
        j = rng.randrange(i + 1)
        ids[i], ids[j] = ids[j], ids[i]
    return ids


def group_shuffle_split(items: Sequence, groups: Mapping, test_fraction: float = TEST_FRACTION,
                        seed: int = 0) -> tuple[list, list]:
    """Assign whole groups to the test side in shuffled order until it holds
    at least ``test_fraction`` of the items; the other groups form train."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    members: dict = defaultdict(list)
    for it in items:
        members[groups[it]].append(it)
    order = shuffled_groups(members, seed)
    goal = test_fraction * len(items)
    test_groups = set()
    taken = 0
    for g in order:
        if taken >= goal:
            break
        test_groups.add(g)
        taken += len(members[g])
    train = [it for it in items if groups[it] not in test_groups]
    test = [it for it in items if groups[it] in test_groups]
    if items and (not train or not test):
        logger.warning("degenerate split: %d groups, train=%d test=%d", len(members), len(train), len(test))
    return train, test


def split_shared_kg(gold: Alignment, seed: int = 0, test_fraction: float = TEST_FRACTION) -> SplitBundle:
    grouping = {}
    for gid, cl in enumerate(compute_identity_sets(gold)):
        for c in cl.internal_edges:
            grouping[c.key] = gid
    keys = [c.key for c in gold]
    if not keys:
        return SplitBundle("shared", Alignment(), Alignment(), {}, seed)
    train_keys, test_keys = group_shuffle_split(keys, grouping, test_fraction, seed)
    by_key = {c.key: c for c in gold}
    bundle = SplitBundle("shared", Alignment(by_key[k] for k in train_keys),
                         Alignment(by_key[k] for k in test_keys), grouping, seed,
                         degenerate=not train_keys or not test_keys)
    bundle.train_kgs = sorted(bundle.train.wikis())
    bundle.test_kgs = sorted(bundle.test.wikis())
    return bundle


def kg_cooccurrence(gold: Alignment) -> dict[tuple[str, str], int]:
    weights: dict[tuple[str, str], int] = defaultdict(int)
    for c in gold:
        a, b = sorted((c.source.wiki, c.target.wiki))
        weights[(a, b)] += 1
    return dict(weights)


def agglomerate_kgs(gold: Alignment, min_shared: int = 5, max_group_fraction: float = 0.05) -> dict[str, str]:
    """Greedy grouping of KGs that share many correspondences.

    Repeatedly merges the two groups with the largest number of
    correspondences between them, as long as that number is at least
    ``min_shared`` and the merged group stays within
    ``max(2, ceil(max_group_fraction * #KGs))`` KGs. Returns KG -> group id
    (the smallest KG id in the group).
    """
    wikis = sorted(gold.wikis())
    max_size = max(2, math.ceil(max_group_fraction * len(wikis)))
    uf = UnionFind(wikis)
    links: dict[str, dict[str, int]] = {w: {} for w in wikis}
    for (a, b), w in kg_cooccurrence(gold).items():
        links[a][b] = w
        links[b][a] = w
    size = {w: 1 for w in wikis}
    heap = [(-w, a, b) for a in wikis for b, w in links[a].items() if a < b]
    heapq.heapify(heap)
    while heap:
        negw, a, b = heapq.heappop(heap)
        if -negw < min_shared:
            break
        # stale entries: endpoints merged away or weight changed
        if uf.find(a) != a or uf.find(b) != b or links[a].get(b) != -negw:
            continue
        if size[a] + size[b] > max_size:
            continue
        keep, gone = (a, b) if len(links[a]) >= len(links[b]) else (b, a)
        uf.parent[gone] = keep
        size[keep] += size.pop(gone)
        del links[keep][gone]
        for other, w in links.pop(gone).items():
            if other == keep:
                continue
            del links[other][gone]
            nw = links[keep].get(other, 0) + w
            links[keep][other] = nw
            links[other][keep] = nw
            x, y = sorted((keep, other))
            heapq.heappush(heap, (-nw, x, y))
    groups: dict[str, list[str]] = defaultdict(list)
    for w in wikis:
        groups[uf.find(w)].append(w)
    return {w: min(ms) for ms in groups.values() for w in ms}


def split_exclusive_kg(gold: Alignment, seed: int = 0, test_fraction: float = TEST_FRACTION,
                       min_shared: int = 5, max_group_fraction: float = 0.05) -> SplitBundle:
    """KG-disjoint split; correspondences crossing the train/test boundary are dropped."""
    if not gold:
        return SplitBundle("exclusive", Alignment(), Alignment(), {}, seed)
    kg_group = agglomerate_kgs(gold, min_shared, max_group_fraction)
    kgs = sorted(kg_group)
    train_kgs, test_kgs = group_shuffle_split(kgs, kg_group, test_fraction, seed)
    test_set = set(test_kgs)
    train, test, dropped = [], [], 0
    grouping = {}
    for c in gold:
        s_test, t_test = c.source.wiki in test_set, c.target.wiki in test_set
        if s_test != t_test:
            dropped += 1
            continue
        grouping[c.key] = kg_group[c.source.wiki]
        (test if s_test else train).append(c)
    return SplitBundle("exclusive", Alignment(train), Alignment(test), grouping, seed,
                       leakage_dropped=dropped, degenerate=not train_kgs or not test_kgs,
                       test_kgs=sorted(test_kgs), train_kgs=sorted(train_kgs))


def select_subsets(kg_sizes: Mapping[str, int], gold: Alignment, n: int) -> dict[str, list[str]]:
    """KGs touched by the gold alignment, and the ``n`` largest KGs by triple count."""
    touched = gold.wikis()
    gold_set = sorted(w for w in kg_sizes if w in touched)
    if n > len(kg_sizes):
        logger.warning("asked for %d KGs but only %d are available", n, len(kg_sizes))
    top = sorted(kg_sizes, key=lambda w: (-kg_sizes[w], w))[:n]
    return {"gold_set": gold_set, "top_n": top}


def closure_leakage(bundle: SplitBundle) -> int:
    """Number of test pairs implied by the transitive closure of the training alignment."""
    uf = UnionFind()
    for c in bundle.train:
        uf.union(c.source.iri, c.target.iri)
    return sum(1 for c in bundle.test
               if c.source.iri in uf.parent and c.target.iri in uf.parent
               and uf.find(c.source.iri) == uf.find(c.target.iri))
