"""Multi-source matching by repeated one-to-one match-and-merge steps.

KGs are ordered by hierarchical agglomerative clustering of tf-idf
fingerprints; walking the dendrogram bottom-up, each internal node matches
its two (possibly already merged) graphs with a pairwise matcher, reduces
the result to a 1:1 alignment and merges the graphs. Correspondences are
reported on the original IRIs.
"""
from __future__ import annotations

import logging
import math
import re
import shutil
import subprocess
import tempfile
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage

from .model import (Alignment, Correspondence, EntityRef, KnowledgeGraph, Literal, local_name, normalize_label,
                    read_alignment, write_ntriples)

logger = logging.getLogger(__name__)

MIN_DF_FRACTION = 0.001
MAX_DF_FRACTION = 0.8

_TOKEN = re.compile(r"[^\W_]+")
_HAS_LETTER = re.compile(r"[^\W\d_]")

Matcher = Callable[[KnowledgeGraph, KnowledgeGraph], Alignment]


# --------------------------------------------------------------------------
# fingerprints and merge order


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def kg_document(kg: KnowledgeGraph) -> list[str]:
    """Tokens of every textual literal and every IRI local name in the graph."""
    tokens: list[str] = []
    for triple in kg.triples:
        for term in triple:
            if isinstance(term, Literal):
                if _HAS_LETTER.search(term.value):
                    tokens.extend(tokenize(term.value))
            elif not term.startswith("_:"):
                tokens.extend(tokenize(local_name(term)))
    return tokens


@dataclass
class DocumentFrequencies:
    n_docs: int
    df: Counter

    @classmethod
    def from_kgs(cls, kgs: Iterable[KnowledgeGraph]) -> DocumentFrequencies:
        df: Counter = Counter()
        n = 0
        for kg in kgs:
            n += 1
            df.update(set(kg_document(kg)))
        return cls(n, df)

    def in_band(self, term: str) -> bool:
        d = self.df.get(term, 0)
        return d > 0 and MIN_DF_FRACTION * self.n_docs <= d <= MAX_DF_FRACTION * self.n_docs


@dataclass
class KgFingerprint:
    wiki: str
    vector: dict[str, float] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not self.vector


def fingerprint(kg: KnowledgeGraph, farm_stats: DocumentFrequencies) -> KgFingerprint:
    """L2-normalized tf-idf vector, weight tf * (ln(N/df) + 1), restricted to the df band."""
    tf = Counter(t for t in kg_document(kg) if farm_stats.in_band(t))
    n = farm_stats.n_docs
    vec = {t: c * (math.log(n / farm_stats.df[t]) + 1.0) for t, c in tf.items()}
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        logger.debug("empty fingerprint for %s", kg.wiki)
        return KgFingerprint(kg.wiki, {})
    return KgFingerprint(kg.wiki, {t: w / norm for t, w in sorted(vec.items())})


def cosine_distance(a: KgFingerprint, b: KgFingerprint) -> float:
    if a.is_empty or b.is_empty:
        return 1.0
    small, large = (a.vector, b.vector) if len(a.vector) <= len(b.vector) else (b.vector, a.vector)
    dot = sum(w * large.get(t, 0.0) for t, w in small.items())
    return min(1.0, max(0.0, 1.0 - dot))


@dataclass
class MergeNode:
    left: MergeNode | str
    right: MergeNode | str
    distance: float

    def leaves(self) -> list[str]:
        out = []
        for child in (self.left, self.right):
            out.extend(child.leaves() if isinstance(child, MergeNode) else [child])
        return out


@dataclass
class MergeTree:
    root: MergeNode | str
    steps: list[MergeNode]  # bottom-up merge sequence

    @property
    def leaves(self) -> list[str]:
        return self.root.leaves() if isinstance(self.root, MergeNode) else [self.root]


def condensed_distances(fps: Sequence[KgFingerprint]) -> np.ndarray:
    n = len(fps)
    out = np.empty(n * (n - 1) // 2)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = cosine_distance(fps[i], fps[j])
            k += 1
    return out


def hac_order(fingerprints: Sequence[KgFingerprint]) -> MergeTree:
    """Average-linkage agglomerative clustering on cosine distance."""
    fps = sorted(fingerprints, key=lambda f: f.wiki)
    if len(fps) < 2:
        raise ValueError("need at least two fingerprints")
    z = linkage(condensed_distances(fps), method="average")
    nodes: list = [f.wiki for f in fps]
    steps = []
    for a, b, dist, _ in z:
        node = MergeNode(nodes[int(a)], nodes[int(b)], float(dist))
        nodes.append(node)
        steps.append(node)
    return MergeTree(nodes[-1], steps)


# --------------------------------------------------------------------------
# matchers and extraction


def resource_kinds(kg: KnowledgeGraph) -> dict[str, str]:
    return {r: kg.kind(r) for r in kg.resources()}


def matcher_label(kg: KnowledgeGraph, iri: str) -> str:
    return normalize_label(kg.label(iri))


def string_matcher(kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> Alignment:
    """Confidence-1.0 links between same-kind resources with equal normalized labels."""
    index: dict[tuple[str, str], list[str]] = defaultdict(list)
    for r, kind in resource_kinds(kg2).items():
        index[(kind, matcher_label(kg2, r))].append(r)
    out = []
    for r1, kind in resource_kinds(kg1).items():
        label = matcher_label(kg1, r1)
        if not label:
            continue
        for r2 in index.get((kind, label), ()):
            if r1 == r2:
                continue
            s, t = EntityRef.from_iri(r1), EntityRef.from_iri(r2)
            if s.wiki != t.wiki:
                out.append(Correspondence(s, t, 1.0))
    return Alignment(out)


def naive_descending_extraction(a: Alignment) -> Alignment:
    """Greedy 1:1 filter: best confidence first, skipping links whose source or target is taken."""
    ranked = sorted(a, key=lambda c: (-(c.confidence if c.confidence is not None else 0.0),
                                      c.source.iri, c.target.iri))
    used: set[str] = set()
    kept = []
    for c in ranked:
        if c.source.iri in used or c.target.iri in used:
            continue
        used.add(c.source.iri)
        used.add(c.target.iri)
        kept.append(c)
    return Alignment(kept)


class ExternalMatcher:
    """Runs a matcher executable as a subprocess.

    The command receives three paths: the two graphs as N-Triples and the
    file where it must write its alignment TSV.
    """

    def __init__(self, command: Sequence[str], timeout: float | None = None):
        self.command = list(command)
        self.timeout = timeout

    def __call__(self, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> Alignment:
        tmp = Path(tempfile.mkdtemp(prefix="kgmatch-"))
        try:
            p1, p2, out = tmp / "source.nt", tmp / "target.nt", tmp / "alignment.tsv"
            write_ntriples(kg1.triples, p1)
            write_ntriples(kg2.triples, p2)
            subprocess.run(self.command + [str(p1), str(p2), str(out)], check=True, timeout=self.timeout,
                           capture_output=True)
            return read_alignment(out)
        finally:
            shutil.rmtree(tmp, ignore_errors=True)


MATCHERS: dict[str, Matcher] = {"string": string_matcher}


def get_matcher(name: str) -> Matcher:
    if name.startswith("cmd:"):
        return ExternalMatcher(name[4:].split())
    try:
        return MATCHERS[name]
    except KeyError:
        raise ValueError(f"unknown matcher {name!r}; known: {sorted(MATCHERS)}") from None


# --------------------------------------------------------------------------
# merging


@dataclass
class MergedGraph:
    """A union graph plus the original IRIs each representative stands for."""

    kg: KnowledgeGraph
    members: dict[str, list[str]]

    @classmethod
    def from_kg(cls, kg: KnowledgeGraph) -> MergedGraph:
        return cls(kg, {r: [r] for r in kg.resources()})


def _rewrite(term, mapping: Mapping[str, str]):
    if isinstance(term, Literal):
        return term
    return mapping.get(term, term)


def merge_graphs(union: MergedGraph, new: MergedGraph, a: Alignment,
                 name: str | None = None) -> MergedGraph:
    """Merge ``new`` into ``union`` along the 1:1 alignment ``a``.

    Matched entities collapse onto one representative, taken from the larger
    graph; unmatched ones are copied. ``members`` keeps track of which
    original IRIs every representative stands for.
    """
    sources, targets = Counter(c.source.iri for c in a), Counter(c.target.iri for c in a)
    if any(n > 1 for n in sources.values()) or any(n > 1 for n in targets.values()):
        raise ValueError("merge requires a 1:1 alignment")
    larger, smaller = (union, new) if len(union.kg) >= len(new.kg) else (new, union)
    mapping: dict[str, str] = {}
    for c in a:
        s, t = c.source.iri, c.target.iri
        if s in smaller.members and t in larger.members:
            mapping[s] = t
        elif t in smaller.members and s in larger.members:
            mapping[t] = s
        else:
            raise ValueError(f"correspondence {s} -> {t} does not connect the two graphs")
    members = {r: list(ms) for r, ms in larger.members.items()}
    for r, ms in smaller.members.items():
        members.setdefault(mapping.get(r, r), []).extend(ms)
    triples = list(larger.kg.triples)
    triples.extend((_rewrite(s, mapping), _rewrite(p, mapping), _rewrite(o, mapping))
                   for s, p, o in smaller.kg.triples)
    return MergedGraph(KnowledgeGraph(name or larger.kg.wiki, triples), members)


@dataclass
class MatchRun:
    alignment: Alignment
    matcher_calls: int = 0
    steps: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


def _expand(union: MergedGraph, new: MergedGraph, step: Alignment) -> list[Correspondence]:
    out = []
    for c in step:
        conf = c.confidence if c.confidence is not None else 1.0
        left = union.members.get(c.source.iri) or new.members.get(c.source.iri) or [c.source.iri]
        right = new.members.get(c.target.iri) or union.members.get(c.target.iri) or [c.target.iri]
        for x in left:
            for y in right:
                ex, ey = EntityRef.from_iri(x), EntityRef.from_iri(y)
                if ex.wiki == ey.wiki:
                    continue
                if ex.iri > ey.iri:
                    ex, ey = ey, ex
                out.append(Correspondence(ex, ey, conf))
    return out


def incremental_match(kgs: Mapping[str, KnowledgeGraph], matcher: Matcher, tree: MergeTree) -> MatchRun:
    """Match and merge along the tree bottom-up; returns links between original IRIs."""
    if sorted(tree.leaves) != sorted(kgs):
        raise ValueError("tree leaves must equal the input KGs")
    run = MatchRun(Alignment())
    graphs: dict[int, MergedGraph] = {}
    found: list[Correspondence] = []

    def resolve(node) -> MergedGraph:
        if isinstance(node, MergeNode):
            return graphs.pop(id(node))
        return MergedGraph.from_kg(kgs[node])

    for k, node in enumerate(tree.steps):
        left, right = resolve(node.left), resolve(node.right)
        run.matcher_calls += 1
        try:
            raw = matcher(left.kg, right.kg)
            step = naive_descending_extraction(raw.filter(
                lambda c: (c.source.iri in left.members and c.target.iri in right.members)
                or (c.source.iri in right.members and c.target.iri in left.members)))
        except Exception as exc:  # a broken matcher only loses this step
            logger.error("matcher failed at merge step %d: %s", k, exc)
            run.errors.append(f"step {k}: {exc}")
            step = Alignment()
        found.extend(_expand(left, right, step))
        merged = merge_graphs(left, right, step, name=f"merged{k}")
        graphs[id(node)] = merged
        run.steps.append({"step": k, "left": len(left.kg), "right": len(right.kg),
                          "matches": len(step), "distance": node.distance})
    run.alignment = Alignment(found)
    return run


def kind_index(kgs: Mapping[str, KnowledgeGraph]) -> dict[str, str]:
    out: dict[str, str] = {}
    for kg in kgs.values():
        out.update(resource_kinds(kg))
    return out


def match_farm(kgs: Mapping[str, KnowledgeGraph], matcher: Matcher) -> tuple[MatchRun, MergeTree]:
    df = DocumentFrequencies.from_kgs(kgs.values())
    fps = [fingerprint(kg, df) for kg in kgs.values()]
    tree = hac_order(fps)
    return incremental_match(kgs, matcher, tree), tree
