"""Class and property correspondences induced from an instance alignment.

Two classes of different KGs match when the aligned instance pairs cover a
large part of their extensions; two properties match when they connect
aligned subjects to matching objects.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from .model import Alignment, Correspondence, EntityRef, KnowledgeGraph, Literal, wiki_of

METRICS = ("dice", "min")
DEFAULT_THRESHOLD = 0.2


def sim_dice(shared: int, n1: int, n2: int) -> float:
    if n1 + n2 <= 0:
        raise ValueError("both extents are empty")
    return 2 * shared / (n1 + n2)


def sim_min(shared: int, n1: int, n2: int) -> float:
    if n1 <= 0 or n2 <= 0:
        raise ValueError("empty extent")
    return shared / min(n1, n2)


def similarity(metric: str, shared: int, n1: int, n2: int) -> float:
    if metric == "dice":
        return sim_dice(shared, n1, n2)
    if metric == "min":
        return sim_min(shared, n1, n2)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class OverlapTable:
    """Shared counts for the schema elements of one KG pair (wiki1 < wiki2)."""

    wiki1: str
    wiki2: str
    shared: Counter = field(default_factory=Counter)
    sizes1: dict[str, int] = field(default_factory=dict)
    sizes2: dict[str, int] = field(default_factory=dict)

    def rows(self):
        """(element1, element2, shared, n1, n2, dice, min) per overlapping pair, sorted."""
        for (e1, e2) in sorted(self.shared):
            n1, n2 = self.sizes1[e1], self.sizes2[e2]
            s = min(self.shared[(e1, e2)], n1, n2)
            yield e1, e2, s, n1, n2, sim_dice(s, n1, n2), sim_min(s, n1, n2)


def _matched_pairs(instances: Alignment, kgs: Mapping[str, KnowledgeGraph]) -> dict[tuple[str, str], list]:
    """Instance pairs grouped by KG pair, oriented as (entity of smaller wiki, entity of larger wiki)."""
    out: dict[tuple[str, str], list] = defaultdict(list)
    for c in instances:
        s, t = c.source, c.target
        if s.wiki > t.wiki:
            s, t = t, s
        if s.wiki in kgs and t.wiki in kgs:
            out[(s.wiki, t.wiki)].append((s.iri, t.iri))
    return out


def _own(iri: str, wiki: str) -> bool:
    try:
        return wiki_of(iri) == wiki
    except ValueError:
        return False


def class_overlap(instances: Alignment, kgs: Mapping[str, KnowledgeGraph]) -> list[OverlapTable]:
    tables = []
    for (w1, w2), pairs in sorted(_matched_pairs(instances, kgs).items()):
        kg1, kg2 = kgs[w1], kgs[w2]
        table = OverlapTable(w1, w2)
        for i1, i2 in pairs:
            for c1 in kg1.types.get(i1, ()):
                if not _own(c1, w1):
                    continue
                for c2 in kg2.types.get(i2, ()):
                    if _own(c2, w2):
                        table.shared[(c1, c2)] += 1
        table.sizes1 = {c1: len(kg1.class_instances[c1]) for c1, _ in table.shared}
        table.sizes2 = {c2: len(kg2.class_instances[c2]) for _, c2 in table.shared}
        tables.append(table)
    return tables


@lru_cache(maxsize=1 << 16)
def normalize_literal(value: str) -> str:
    return value.strip().lower()


def objects_match(o1, o2, matched: set[tuple[str, str]]) -> bool:
    if isinstance(o1, Literal) and isinstance(o2, Literal):
        return normalize_literal(o1.value) == normalize_literal(o2.value)
    if isinstance(o1, Literal) or isinstance(o2, Literal):
        return False
    return (o1, o2) in matched


def property_overlap(instances: Alignment, kgs: Mapping[str, KnowledgeGraph]) -> list[OverlapTable]:
    """Counts statement pairs (s1 p1 o1), (s2 p2 o2) with aligned subjects and matching objects."""
    tables = []

    def statements(kg: KnowledgeGraph, wiki: str, s: str) -> list:
        return [(p, o) for p, o in kg.statements.get(s, ()) if _own(p, wiki)]

    for (w1, w2), pairs in sorted(_matched_pairs(instances, kgs).items()):
        kg1, kg2 = kgs[w1], kgs[w2]
        matched = set(pairs)
        table = OverlapTable(w1, w2)
        for s1, s2 in pairs:
            st2 = statements(kg2, w2, s2)
            if not st2:
                continue
            for p1, o1 in statements(kg1, w1, s1):
                for p2, o2 in st2:
                    if objects_match(o1, o2, matched):
                        table.shared[(p1, p2)] += 1
        table.sizes1 = {p1: kg1.property_counts[p1] for p1, _ in table.shared}
        table.sizes2 = {p2: kg2.property_counts[p2] for _, p2 in table.shared}
        tables.append(table)
    return tables


def _emit(tables: list[OverlapTable], metric: str, threshold: float) -> Alignment:
    col = 5 if metric == "dice" else 6
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    out = []
    for table in tables:
        for row in table.rows():
            sim = row[col]
            if sim > threshold:
                out.append(Correspondence(EntityRef(table.wiki1, row[0]), EntityRef(table.wiki2, row[1]), sim))
    return Alignment(out)


def induce_class_matches(instances: Alignment, kgs: Mapping[str, KnowledgeGraph], metric: str = "min",
                         threshold: float = DEFAULT_THRESHOLD) -> Alignment:
    """Class correspondences whose similarity exceeds ``threshold``; the similarity is the confidence."""
    return _emit(class_overlap(instances, kgs), metric, threshold)


def induce_property_matches(instances: Alignment, kgs: Mapping[str, KnowledgeGraph], metric: str = "min",
                            threshold: float = DEFAULT_THRESHOLD) -> Alignment:
    return _emit(property_overlap(instances, kgs), metric, threshold)


def overlap_report(tables: list[OverlapTable]) -> list[dict]:
    return [{"source": r[0], "target": r[1], "shared": r[2], "n1": r[3], "n2": r[4],
             "dice": r[5], "min": r[6]} for t in tables for r in t.rows()]
