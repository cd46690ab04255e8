import itertools
import random
import networkx as nx
import pytest

from kgalign.closure import (LinkGraph, add_transitive_links, closure_stage, compute_identity_sets,
                             confidence_from, drop_exterior_links, error_scores, next_removal,
                             repair_identity_sets, transitive_confidence)
from kgalign.model import Alignment, Provenance

from conftest import ent, link, random_alignment
from oracles import consistent, single_edge_repair_exists


def test_single_edge_cluster():
    [cl] = compute_identity_sets(Alignment([link("A", "a", "B", "b")]))
    assert len(cl) == 2


def test_two_components():
    a = Alignment([link("A", "a", "B", "b"), link("B", "b", "C", "c"), link("D", "d", "E", "e")])
    assert sorted(len(cl) for cl in compute_identity_sets(a)) == [2, 3]


def test_components_match_bfs_oracle(rng):
    a = random_alignment(rng, 150, 200, 6)
    g = nx.Graph()
    g.add_edges_from((c.source.iri, c.target.iri) for c in a)
    exp = sorted(sorted(c) for c in nx.connected_components(g))
    got = sorted(sorted(e.iri for e in cl.members) for cl in compute_identity_sets(a))
    assert got == exp


def test_error_value_is_betweenness():
    a = Alignment([link("A", "a", "B", "b"), link("B", "b", "C", "c"), link("C", "c", "D", "d")])
    [cl] = compute_identity_sets(a)
    scores = error_scores(cl)
    assert max(scores, key=scores.get) == (ent("B", "b").iri, ent("C", "c").iri)


def test_consistent_cluster_unchanged():
    a = Alignment([link("A", "a", "B", "b", 0.5), link("B", "b", "C", "c", 0.5)])
    assert repair_identity_sets(a) == a


def test_middle_case_loses_exactly_one_link():
    # a1 and a2 (same wiki) end up in one cluster through b1 and c1
    a = Alignment([link("A", "a1", "B", "b1", 0.5), link("B", "b1", "C", "c1", 0.5),
                   link("A", "a2", "C", "c1", 0.5)])
    out = repair_identity_sets(a)
    assert len(a) - len(out) == 1 and consistent(out)
    assert next_removal(compute_identity_sets(a)[0], {}).key == (ent("B", "b1").iri, ent("C", "c1").iri)


def test_single_repair_edge_preferred():
    # two violations (A twice, B twice); only the bridge x-y fixes both at once
    edges = [link("A", "a1", "C", "x", 0.5), link("B", "b1", "C", "x", 0.5), link("C", "x", "D", "y", 1.0),
             link("A", "a2", "D", "y", 0.5), link("B", "b2", "D", "y", 0.5)]
    a = Alignment(edges)
    out = repair_identity_sets(a)
    assert a.pairs() - out.pairs() == {(ent("C", "x").iri, ent("D", "y").iri)}


def test_repair_against_exhaustive_search():
    rng = random.Random(21)
    checked = 0
    for _ in range(400):
        a = random_alignment(rng, rng.randint(4, 14), rng.randint(1, 12), rng.randint(2, 5))
        out = repair_identity_sets(a)
        assert consistent(out) and out.pairs() <= a.pairs()
        if not consistent(a) and single_edge_repair_exists(a):
            checked += 1
            assert len(a) - len(out) == 1
    assert checked > 20


@pytest.mark.parametrize("edges,expected", [
    ([("u", "x", 0.5), ("x", "v", 0.5)], 0.4),
    ([("u", "x", 1.0), ("x", "v", 1.0)], 2 / 3),
    ([("u", "x", 1.0), ("x", "v", 1.0), ("u", "y", 1.0), ("y", "v", 1.0)], 0.8),
])
def test_transitive_confidence_cases(edges, expected):
    wiki = {"u": "U", "v": "V", "x": "X", "y": "Y"}
    a = Alignment(link(wiki[s], s, wiki[t], t, c) for s, t, c in edges)
    g = LinkGraph(a)
    assert transitive_confidence(g, ent("U", "u"), ent("V", "v")) == pytest.approx(expected, abs=1e-9)


def test_confidence_formula_inputs():
    assert confidence_from(0.5, 2.0) == pytest.approx(0.4, abs=1e-12)


def test_two_member_cluster_gets_nothing():
    assert len(add_transitive_links(Alignment([link("A", "a", "B", "b", 1.0)]))) == 0


def test_chain_of_three_gets_one():
    a = Alignment([link("A", "a", "B", "b", 0.5), link("B", "b", "C", "c", 0.5)])
    [t] = list(add_transitive_links(a))
    assert t.provenance == Provenance.TRANSITIVE
    assert (t.source.wiki, t.target.wiki) == ("A", "C") and t.confidence == pytest.approx(0.4)


def test_additions_cover_all_nonadjacent_pairs():
    rng = random.Random(8)
    for _ in range(100):
        a = repair_identity_sets(random_alignment(rng, 8, 10, 6))
        added = add_transitive_links(a)
        expected = set()
        for cl in compute_identity_sets(a):
            if len(cl) < 3:
                continue
            adjacent = {frozenset((c.source, c.target)) for c in cl.internal_edges}
            for u, v in itertools.combinations(cl.members, 2):
                if u.wiki != v.wiki and frozenset((u, v)) not in adjacent:
                    expected.add(frozenset((u.iri, v.iri)))
        assert {frozenset(p) for p in added.pairs()} == expected
        assert all(0.0 < c.confidence <= 1.0 for c in added)


def test_exterior_links():
    a = Alignment([link("A", "a", "B", "b", 0.5), link("A", "a", "wikipedia", "W", 0.5)])
    assert drop_exterior_links(a, {"A", "B"}).pairs() == {(ent("A", "a").iri, ent("B", "b").iri)}


def test_exterior_hub_leaves_transitive_link():
    a = Alignment([link("A", "a", "X", "x", 1.0), link("B", "b", "X", "x", 1.0)])
    report = {}
    direct, transitive = closure_stage(a, {}, {"A", "B"}, report)
    assert len(direct) == 0
    assert transitive.pairs() == {(ent("A", "a").iri, ent("B", "b").iri)}
    assert report["clusters"] == 1 and report["transitive_added"] == 1


def test_closure_stage_counts():
    a = Alignment([link("A", "a1", "B", "b1", 0.5), link("B", "b1", "C", "c1", 0.5), link("A", "a2", "C", "c1", 0.5)])
    counts = {}
    closure_stage(a, {}, None, counts)
    assert counts["repair_removed"] == 1
    assert counts["transitive_added"] == 0
    assert counts["clusters"] == 2 and counts["size_max"] == 2
