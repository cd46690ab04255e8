"""Small graph primitives shared by the alignment stages."""
from __future__ import annotations

import heapq
from collections import defaultdict, deque
from typing import Hashable, Iterable, Mapping


class UnionFind:
    def __init__(self, items: Iterable[Hashable] = ()):
        self.parent: dict = {}
        self.size: dict = {}
        for x in items:
            self.add(x)

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        parent = self.parent
        if x not in parent:
            self.add(x)
            return x
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def groups(self) -> list[list]:
        out = defaultdict(list)
        for x in self.parent:
            out[self.find(x)].append(x)
        return list(out.values())


def connected_components(edges: Iterable[tuple], nodes: Iterable = ()) -> list[set]:
    uf = UnionFind(nodes)
    for u, v in edges:
        uf.union(u, v)
    return [set(g) for g in uf.groups()]


def adjacency(edges: Iterable[tuple]) -> dict:
    """Undirected weighted adjacency ``{u: {v: w}}`` from (u, v, w) triples; parallel edges keep the max weight."""
    adj: dict = defaultdict(dict)
    for u, v, w in edges:
        if w > adj[u].get(v, float("-inf")):
            adj[u][v] = w
            adj[v][u] = w
    return dict(adj)


def _residual(capacity: Mapping) -> dict:
    residual = {u: dict(nbrs) for u, nbrs in capacity.items()}
    for u, nbrs in capacity.items():
        for v in nbrs:
            residual.setdefault(v, {}).setdefault(u, 0.0)
    return residual


def min_cut(capacity: Mapping, source, sink) -> tuple[float, set]:
    """Maximum flow from ``source`` to ``sink`` and the source side of a minimum cut.

    ``capacity`` is ``{u: {v: c}}``; an undirected edge is given as two arcs.
    Augmenting paths are found by BFS, so the path with the fewest arcs is used
    at every step.
    """
    if source == sink:
        raise ValueError("source and sink coincide")
    residual = _residual(capacity)
    if source not in residual or sink not in residual:
        return 0.0, {source}
    flow = 0.0
    while True:
        pred = {source: None}
        queue = deque([source])
        while queue and sink not in pred:
            u = queue.popleft()
            for v, cap in residual[u].items():
                if cap > 0 and v not in pred:
                    pred[v] = u
                    queue.append(v)
        if sink not in pred:
            # drain the queue so pred covers everything reachable from the source
            while queue:
                u = queue.popleft()
                for v, cap in residual[u].items():
                    if cap > 0 and v not in pred:
                        pred[v] = u
                        queue.append(v)
            return flow, set(pred)
        bottleneck = float("inf")
        v = sink
        while pred[v] is not None:
            u = pred[v]
            bottleneck = min(bottleneck, residual[u][v])
            v = u
        v = sink
        while pred[v] is not None:
            u = pred[v]
            residual[u][v] -= bottleneck
            residual[v][u] += bottleneck
            v = u
        flow += bottleneck


def edmonds_karp(capacity: Mapping, source, sink) -> float:
    """Maximum flow from ``source`` to ``sink``; see :func:`min_cut`."""
    return min_cut(capacity, source, sink)[0]


def all_pairs_max_flow(capacity: Mapping, nodes: list) -> dict:
    """Max flow between every pair of ``nodes`` in an undirected graph.

    Gusfield's equivalent flow tree: n - 1 flow computations instead of one
    per pair. Returns ``{u: {v: flow}}`` for u != v.
    """
    n = len(nodes)
    index = {x: i for i, x in enumerate(nodes)}
    parent = [0] * n
    flows = [[0.0] * n for _ in range(n)]
    for s in range(1, n):
        t = parent[s]
        f, side = min_cut(capacity, nodes[s], nodes[t])
        inside = {index[x] for x in side if x in index}
        for i in range(s + 1, n):
            if i in inside and parent[i] == t:
                parent[i] = s
        flows[s][t] = flows[t][s] = f
        for i in range(s):
            if i != t:
                flows[s][i] = flows[i][s] = min(f, flows[t][i])
    return {nodes[i]: {nodes[j]: flows[i][j] for j in range(n) if j != i} for i in range(n)}


def dijkstra(lengths: Mapping, source) -> dict:
    """Shortest path distances from ``source`` over non-negative lengths ``{u: {v: l}}``."""
    dist = {source: 0.0}
    heap = [(0.0, 0, source)]
    counter = 1
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in lengths.get(u, {}).items():
            nd = d + w
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(heap, (nd, counter, v))
                counter += 1
    return dist


def edge_betweenness(adj: Mapping) -> dict[frozenset, float]:
    """Unnormalized edge betweenness of an unweighted undirected graph (Brandes).

    Each unordered vertex pair contributes once, split evenly over its
    shortest paths. Keys are ``frozenset({u, v})``.
    """
    nodes = sorted(adj, key=repr)
    index = {x: i for i, x in enumerate(nodes)}
    nbrs = [[index[y] for y in adj[x]] for x in nodes]
    n = len(nodes)
    scores: dict[tuple[int, int], float] = {}
    for u in range(n):
        for v in nbrs[u]:
            scores[(u, v) if u < v else (v, u)] = 0.0
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            dv = dist[v] + 1
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dv
                    queue.append(w)
                if dist[w] == dv:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                c = sigma[v] / sigma[w] * (1.0 + delta[w])
                scores[(v, w) if v < w else (w, v)] += c
                delta[v] += c
    # every pair was counted from both endpoints
    return {frozenset((nodes[a], nodes[b])): x / 2.0 for (a, b), x in scores.items()}


def bridges(adj: Mapping) -> set[frozenset]:
    """Edges whose removal disconnects their component (iterative Tarjan lowlink)."""
    disc: dict = {}
    low: dict = {}
    out: set[frozenset] = set()
    counter = 0
    for root in adj:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, None, iter(adj[root]))]
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v == parent:
                    continue
                if v in disc:
                    low[u] = min(low[u], disc[v])
                else:
                    disc[v] = low[v] = counter
                    counter += 1
                    stack.append((v, u, iter(adj[v])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                if parent is not None:
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        out.add(frozenset((parent, u)))
    return out


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]
