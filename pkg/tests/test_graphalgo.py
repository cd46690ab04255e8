import random

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgalign.graphalgo import (UnionFind, adjacency, all_pairs_max_flow, bridges, connected_components, dijkstra,
                               edge_betweenness, edmonds_karp, levenshtein, min_cut)


def _random_weighted(rng, n, m):
    edges = []
    for _ in range(m):
        u, v = rng.sample(range(n), 2)
        edges.append((u, v, rng.choice([0.5, 1.0, 0.25, 0.75])))
    return edges


def _nx_graph(adj):
    g = nx.Graph()
    for u, nbrs in adj.items():
        for v, w in nbrs.items():
            g.add_edge(u, v, capacity=w, weight=1.5 - w)
    return g


def test_max_flow_matches_networkx():
    rng = random.Random(3)
    for _ in range(100):
        adj = adjacency(_random_weighted(rng, 8, 14))
        nodes = sorted(adj)
        s, t = rng.sample(nodes, 2)
        expected = nx.maximum_flow_value(_nx_graph(adj), s, t)
        assert edmonds_karp(adj, s, t) == pytest.approx(expected, abs=1e-12)


def test_min_cut_side_separates_endpoints():
    rng = random.Random(5)
    for _ in range(50):
        adj = adjacency(_random_weighted(rng, 8, 12))
        s, t = rng.sample(sorted(adj), 2)
        f, side = min_cut(adj, s, t)
        assert s in side and t not in side
        crossing = sum(w for u in side for v, w in adj[u].items() if v not in side)
        assert crossing == pytest.approx(f, abs=1e-12)


def test_all_pairs_flow_matches_pairwise_networkx():
    rng = random.Random(6)
    for _ in range(40):
        adj = adjacency(_random_weighted(rng, rng.randint(2, 10), rng.randint(1, 18)))
        nodes = sorted(adj)
        g = _nx_graph(adj)
        flows = all_pairs_max_flow(adj, nodes)
        for i, u in enumerate(nodes):
            for v in nodes[i + 1:]:
                expected = nx.maximum_flow_value(g, u, v)
                assert flows[u][v] == pytest.approx(expected, abs=1e-12)
                assert flows[v][u] == flows[u][v]


def test_dijkstra_matches_networkx():
    rng = random.Random(4)
    for _ in range(50):
        adj = adjacency(_random_weighted(rng, 10, 18))
        lengths = {u: {v: 1.5 - w for v, w in nbrs.items()} for u, nbrs in adj.items()}
        src = min(adj)
        got = dijkstra(lengths, src)
        exp = nx.single_source_dijkstra_path_length(_nx_graph(adj), src, weight="weight")
        assert got.keys() == exp.keys()
        for k in got:
            assert got[k] == pytest.approx(exp[k], abs=1e-12)


def test_edge_betweenness_matches_networkx():
    rng = random.Random(5)
    for _ in range(50):
        adj = adjacency((u, v, 1) for u, v, _ in _random_weighted(rng, 9, 14))
        eb = edge_betweenness(adj)
        exp = nx.edge_betweenness_centrality(_nx_graph(adj), normalized=False)
        for (u, v), score in exp.items():
            assert eb[frozenset((u, v))] == pytest.approx(score, abs=1e-9)


def test_triangle_scores_equal():
    eb = edge_betweenness(adjacency([(0, 1, 1), (1, 2, 1), (0, 2, 1)]))
    assert len(set(eb.values())) == 1


def test_path_middle_edge_dominates():
    eb = edge_betweenness(adjacency([("A", "B", 1), ("B", "C", 1), ("C", "D", 1)]))
    assert max(eb, key=eb.get) == frozenset("BC")


def test_barbell_bridge_carries_nine_paths():
    edges = [(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1), (2, 3, 1)]
    assert edge_betweenness(adjacency(edges))[frozenset((2, 3))] == 9


def test_components_match_networkx():
    rng = random.Random(6)
    edges = [tuple(rng.sample(range(150), 2)) for _ in range(200)]
    got = sorted(sorted(c) for c in connected_components(edges))
    exp = sorted(sorted(c) for c in nx.connected_components(nx.Graph(edges)))
    assert got == exp


def test_bridges_match_networkx():
    rng = random.Random(8)
    for _ in range(100):
        adj = adjacency(_random_weighted(rng, rng.randint(2, 12), rng.randint(1, 16)))
        expected = {frozenset(e) for e in nx.bridges(_nx_graph(adj))}
        assert bridges(adj) == expected


def test_union_find_groups():
    uf = UnionFind("abcd")
    uf.union("a", "b")
    uf.union("c", "d")
    uf.union("b", "d")
    assert len(uf.groups()) == 1


@given(st.text(max_size=12), st.text(max_size=12))
def test_levenshtein_properties(a, b):
    d = levenshtein(a, b)
    assert d == levenshtein(b, a)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
    assert (d == 0) == (a == b)


def test_levenshtein_known():
    assert levenshtein("kitten", "sitting") == 3
