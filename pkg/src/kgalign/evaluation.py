"""Closure-aware precision/recall and alignment profiling."""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .closure import compute_identity_sets
from .model import INSTANCE, KINDS, Alignment, label_for, normalize_label

Pair = tuple[str, str]


def closure_pairs(a: Alignment) -> set[Pair]:
    """Unordered cross-wiki entity pairs implied by the transitive closure, as sorted IRI tuples."""
    out: set[Pair] = set()
    for cl in compute_identity_sets(a):
        ms = cl.members
        for i, u in enumerate(ms):
            for v in ms[i + 1:]:
                if u.wiki != v.wiki:
                    out.add((u.iri, v.iri) if u.iri < v.iri else (v.iri, u.iri))
    return out


@dataclass
class Scores:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


@dataclass
class EvalReport:
    per_kind: dict[str, Scores] = field(default_factory=dict)
    overall: Scores = field(default_factory=Scores)
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {"overall": self.overall.as_dict(),
                "per_kind": {k: s.as_dict() for k, s in self.per_kind.items()},
                "degenerate": self.degenerate}


def evaluate(system: Alignment, reference: Alignment, kind_index: Mapping[str, str] | None = None,
             universe: Iterable[str] | None = None) -> EvalReport:
    """Compare closures of ``system`` and ``reference``.

    System pairs are only scored when both entities belong to ``universe``
    (default: entities of the reference), since the reference is partial.
    Each pair is attributed to the kind of its first entity; entities missing
    from ``kind_index`` count as instances. An empty system scores precision
    0 and sets ``degenerate``.
    """
    if not reference:
        raise ValueError("empty reference: recall is undefined")
    kinds = kind_index or {}
    scope = set(universe) if universe is not None else {e.iri for e in reference.entities()}
    ref = closure_pairs(reference)
    sys_pairs = {p for p in closure_pairs(system) if p[0] in scope and p[1] in scope}
    report = EvalReport(per_kind={k: Scores() for k in KINDS}, degenerate=not sys_pairs)

    def bucket(p: Pair) -> Scores:
        return report.per_kind.setdefault(kinds.get(p[0], INSTANCE), Scores())

    for p in sys_pairs:
        s = bucket(p)
        if p in ref:
            s.tp += 1
            report.overall.tp += 1
        else:
            s.fp += 1
            report.overall.fp += 1
    for p in ref - sys_pairs:
        bucket(p).fn += 1
        report.overall.fn += 1
    return report


@dataclass
class ProfileReport:
    links: int = 0
    trivial: int = 0
    non_trivial: int = 0
    kg_pairs: int = 0
    clusters: int = 0
    cluster_size_mean: float = 0.0
    cluster_size_std: float = 0.0
    cluster_size_max: int = 0
    confidence_histogram: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def is_trivial(source: str, target: str, labels: Mapping[str, str]) -> bool:
    return normalize_label(label_for(source, labels)) == normalize_label(label_for(target, labels))


def profile(a: Alignment, labels: Mapping[str, str] | None = None) -> ProfileReport:
    labels = labels or {}
    trivial = sum(1 for c in a if is_trivial(c.source.iri, c.target.iri, labels))
    sizes = [len(cl) for cl in compute_identity_sets(a)]
    hist: dict[str, int] = {}
    for c in a:
        key = "unset" if c.confidence is None else f"{c.provenance.value}:{c.confidence:.3f}"
        hist[key] = hist.get(key, 0) + 1
    return ProfileReport(
        links=len(a), trivial=trivial, non_trivial=len(a) - trivial, kg_pairs=len(a.kg_pairs()),
        clusters=len(sizes),
        cluster_size_mean=statistics.fmean(sizes) if sizes else 0.0,
        cluster_size_std=statistics.pstdev(sizes) if sizes else 0.0,
        cluster_size_max=max(sizes, default=0),
        confidence_histogram=dict(sorted(hist.items())),
    )
