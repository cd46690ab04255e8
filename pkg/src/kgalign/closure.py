"""Identity sets under the transitive closure of an alignment.

Repair removes links until no identity set holds two entities of one wiki;
the closure then contributes transitive links, each scored from the maximum
flow and the shortest path between its endpoints over the direct links.
"""
from __future__ import annotations

import logging
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graphalgo import (UnionFind, adjacency, all_pairs_max_flow, bridges, dijkstra, edge_betweenness,
                        edmonds_karp, levenshtein)
from .model import Alignment, Correspondence, EntityRef, Provenance, label_for, normalize_label

logger = logging.getLogger(__name__)

MAX_PAIRS_PER_CLUSTER = 10**6
LARGE_CLUSTER = 1000


@dataclass(frozen=True)
class IdentityCluster:
    members: tuple[EntityRef, ...]
    internal_edges: tuple[Correspondence, ...]

    def __len__(self) -> int:
        return len(self.members)

    def wiki_counts(self) -> Counter:
        return Counter(m.wiki for m in self.members)

    def is_consistent(self) -> bool:
        return all(n == 1 for n in self.wiki_counts().values())


def _clusters(edges: Iterable[Correspondence]) -> list[IdentityCluster]:
    edges = list(edges)
    # union on IRI strings, whose hashes are cached
    uf = UnionFind()
    for c in edges:
        uf.union(c.source.iri, c.target.iri)
    by_root: dict = defaultdict(list)
    for c in edges:
        by_root[uf.find(c.source.iri)].append(c)
    out = []
    for root, es in by_root.items():
        members = {e.iri: e for c in es for e in (c.source, c.target)}.values()
        out.append(IdentityCluster(tuple(sorted(members, key=lambda e: e.iri)),
                                   tuple(sorted(es, key=lambda c: c.key))))
    out.sort(key=lambda cl: cl.members[0].iri)
    return out


def compute_identity_sets(a: Alignment) -> list[IdentityCluster]:
    """Connected components of the alignment graph (singletons never occur)."""
    return _clusters(a)


def _unweighted_adj(edges: Iterable[Correspondence]) -> dict:
    adj: dict = defaultdict(dict)
    for c in edges:
        adj[c.source][c.target] = 1
        adj[c.target][c.source] = 1
    return adj


def error_scores(cluster: IdentityCluster) -> dict[tuple[str, str], float]:
    """Edge betweenness of every internal edge, keyed by correspondence key."""
    eb = edge_betweenness(_unweighted_adj(cluster.internal_edges))
    return {c.key: eb[frozenset((c.source, c.target))] for c in cluster.internal_edges}


def link_error_score(cluster: IdentityCluster, edge: Correspondence) -> float:
    """Error value of ``edge``: its edge betweenness inside the cluster."""
    if edge.key not in {c.key for c in cluster.internal_edges}:
        raise ValueError("edge is not part of the cluster")
    return error_scores(cluster)[edge.key]


def _has_duplicate_wiki(members: Iterable[EntityRef]) -> bool:
    seen = set()
    for m in members:
        if m.wiki in seen:
            return True
        seen.add(m.wiki)
    return False


def _single_repairs(edges: list[Correspondence]) -> set[tuple[str, str]]:
    """Keys of edges whose removal alone leaves no duplicate wiki; only bridges qualify."""
    cut = bridges(_unweighted_adj(edges))
    multi = Counter(frozenset((c.source, c.target)) for c in edges)
    out = set()
    for c in edges:
        pair = frozenset((c.source, c.target))
        if pair not in cut or multi[pair] > 1:
            continue
        uf = UnionFind()
        for d in edges:
            if d is not c:
                uf.union(d.source.iri, d.target.iri)
        members = {e.iri: e.wiki for d in edges for e in (d.source, d.target)}
        per_side = Counter((uf.find(iri), wiki) for iri, wiki in members.items())
        if all(n == 1 for n in per_side.values()):
            out.add(c.key)
    return out


def next_removal(cluster: IdentityCluster, labels: Mapping[str, str]) -> Correspondence:
    """The correspondence repair removes first from an inconsistent cluster.

    Order: edges whose removal alone repairs the cluster; lower confidence;
    higher error value; larger label edit distance; source then target IRI.
    """
    edges = list(cluster.internal_edges)
    single = _single_repairs(edges)

    def head(c: Correspondence):
        return (c.key not in single, 0.5 if c.confidence is None else c.confidence)

    best = min(head(c) for c in edges)
    tied = [c for c in edges if head(c) == best]
    if len(tied) == 1:
        return tied[0]
    # betweenness is the costly key, so it is only computed to break ties
    scores = error_scores(cluster)

    def tail(c: Correspondence):
        dist = levenshtein(normalize_label(label_for(c.source.iri, labels)),
                           normalize_label(label_for(c.target.iri, labels)))
        return (-round(scores[c.key], 9), -dist, c.source.iri, c.target.iri)

    return min(tied, key=tail)


def repair_identity_sets(a: Alignment, labels: Mapping[str, str] | None = None,
                         report: Counter | None = None) -> Alignment:
    """Remove links until every identity set holds at most one entity per wiki.

    Components are recomputed after each single removal.
    """
    labels = labels or {}
    removed: set[tuple[str, str]] = set()
    work = [cl for cl in compute_identity_sets(a) if not cl.is_consistent()]
    repaired = 0
    while work:
        cl = work.pop()
        if len(cl) > LARGE_CLUSTER:
            logger.warning("repairing a cluster of %d members", len(cl))
        victim = next_removal(cl, labels)
        removed.add(victim.key)
        rest = [c for c in cl.internal_edges if c.key != victim.key]
        work.extend(sub for sub in _clusters(rest) if not sub.is_consistent())
        repaired += 1
    if report is not None:
        report["repair_removed"] += len(removed)
    return a.filter(lambda c: c.key not in removed)


class LinkGraph:
    """Undirected graph of direct links; capacity c and length 1.5 - c per edge."""

    def __init__(self, edges: Iterable[Correspondence]):
        triples = []
        for c in edges:
            conf = 0.5 if c.confidence is None else c.confidence
            triples.append((c.source, c.target, conf))
        self.capacity = adjacency(triples)
        self.length = {u: {v: 1.5 - w for v, w in nbrs.items()} for u, nbrs in self.capacity.items()}

    def __contains__(self, node) -> bool:
        return node in self.capacity

    def has_edge(self, u, v) -> bool:
        return v in self.capacity.get(u, {})

    def max_flow(self, u, v) -> float:
        return edmonds_karp(self.capacity, u, v)

    def distances(self, u) -> dict:
        return dijkstra(self.length, u)

    def shortest_path_length(self, u, v) -> float:
        return self.distances(u)[v]


def confidence_from(max_flow: float, path_length: float) -> float:
    """Harmonic mean of 1 - 1/(flow + 1) and 1/path_length."""
    f = 1.0 - 1.0 / (max_flow + 1.0)
    p = 1.0 / path_length
    return 2.0 * f * p / (f + p)


def transitive_confidence(g: LinkGraph, u, v) -> float:
    if u not in g or v not in g:
        raise ValueError("endpoint not in graph")
    dist = g.distances(u)
    if v not in dist:
        raise ValueError("endpoints are disconnected")
    return confidence_from(g.max_flow(u, v), dist[v])


def _oriented(u: EntityRef, v: EntityRef) -> tuple[EntityRef, EntityRef]:
    return (u, v) if (u.wiki, u.iri) < (v.wiki, v.iri) else (v, u)


def add_transitive_links(a: Alignment, report: Counter | None = None,
                         max_pairs: int = MAX_PAIRS_PER_CLUSTER) -> Alignment:
    """Transitive links for every non-adjacent cross-wiki pair of a cluster.

    Only the direct links of ``a`` feed flow and path computations. The
    result contains the new transitive links alone.
    """
    direct = [c for c in a if c.provenance == Provenance.DIRECT]
    out = []
    skipped = 0
    for cl in _clusters(direct):
        if len(cl) < 3:
            continue
        g = LinkGraph(cl.internal_edges)
        budget = max_pairs
        members = cl.members
        flows = all_pairs_max_flow(g.capacity, list(members))
        for i, u in enumerate(members):
            dist = None
            for v in members[i + 1:]:
                if u.wiki == v.wiki or g.has_edge(u, v):
                    continue
                if budget <= 0:
                    skipped += 1
                    continue
                budget -= 1
                if dist is None:
                    dist = g.distances(u)
                conf = confidence_from(flows[u][v], dist[v])
                s, t = _oriented(u, v)
                out.append(Correspondence(s, t, conf, Provenance.TRANSITIVE))
    if skipped:
        logger.warning("skipped %d transitive pairs over the per-cluster cap", skipped)
    if report is not None:
        report["transitive_added"] += len(out)
        report["transitive_skipped"] += skipped
    return Alignment(out)


def drop_exterior_links(a: Alignment, known_wikis: Iterable[str]) -> Alignment:
    known = set(known_wikis)
    return a.filter(lambda c: c.source.wiki in known and c.target.wiki in known)


def cluster_statistics(a: Alignment) -> dict:
    sizes = [len(cl) for cl in compute_identity_sets(a)]
    return {
        "clusters": len(sizes),
        "size_mean": statistics.fmean(sizes) if sizes else 0.0,
        "size_std": statistics.pstdev(sizes) if sizes else 0.0,
        "size_max": max(sizes, default=0),
    }


def closure_stage(refined: Alignment, labels: Mapping[str, str], known_wikis: Iterable[str] | None,
                  report: dict | None = None) -> tuple[Alignment, Alignment]:
    """Repair, transitive addition and exterior-link removal; returns (direct, transitive)."""
    counts: Counter = Counter()
    direct = repair_identity_sets(refined, labels, counts)
    transitive = add_transitive_links(direct, counts)
    sizes = {"input": len(refined), "after_repair": len(direct),
             "after_addition": len(direct) + len(transitive)}
    if known_wikis is not None:
        known = set(known_wikis)
        direct = drop_exterior_links(direct, known)
        transitive = drop_exterior_links(transitive, known)
    sizes["after_exterior_removal"] = len(direct) + len(transitive)
    stats = cluster_statistics(direct.union(transitive))
    if report is not None:
        report.update(sizes)
        report.update(stats)
        report["repair_removed"] = counts["repair_removed"]
        report["transitive_added"] = counts["transitive_added"]
        report["transitive_skipped"] = counts["transitive_skipped"]
        report["direct"] = len(direct)
        report["transitive"] = len(transitive)
    return direct, transitive
