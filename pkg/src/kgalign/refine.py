"""Cleaning of candidate links: direction/confidence normalization, redirect
resolution, per-wiki-pair injectivity, and removal of disambiguation pages,
anchor links and dead links."""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import (Alignment, Correspondence, EntityRef, KnowledgeGraph, PageRecord, Provenance,
                    entity_iri, has_fragment, strip_fragment)

logger = logging.getLogger(__name__)

MAX_REDIRECT_DEPTH = 10
ONE_WAY, BOTH_WAYS = 0.5, 1.0

_REFER_TO = re.compile(r"\b(can|could|may|might)\s+refer\s+to\b", re.IGNORECASE)


@dataclass(frozen=True)
class DisambiguationFlags:
    by_label: bool = False
    by_first_sentence: bool = False
    by_category: bool = False

    def __bool__(self) -> bool:
        return self.by_label or self.by_first_sentence or self.by_category


def _oriented(c: Correspondence) -> Correspondence:
    if c.source.wiki < c.target.wiki:
        return c
    return Correspondence(c.target, c.source, c.confidence, c.provenance)


def normalize_directions(a: Alignment) -> Alignment:
    """Orient every link from the lexicographically smaller wiki and score it.

    A link present in both directions gets 1.0, a one-way link 0.5. A link
    that already carries a higher score keeps it, which makes the step
    idempotent on its own output.
    """
    seen: dict[tuple[str, str], list] = {}
    for c in a:
        o = _oriented(c)
        entry = seen.get(o.key)
        if entry is None:
            seen[o.key] = entry = [o, set(), 0.0]
        entry[1].add(c.source.iri)
        if c.confidence is not None:
            entry[2] = max(entry[2], c.confidence)
    out = []
    for o, directions, prior in seen.values():
        conf = BOTH_WAYS if len(directions) == 2 else ONE_WAY
        out.append(Correspondence(o.source, o.target, max(conf, prior), Provenance.DIRECT))
    return Alignment(out)


def redirect_map(pages: Iterable[PageRecord]) -> dict[str, str]:
    """Page IRI -> IRI of its redirect target, one hop."""
    return {p.iri: entity_iri(p.wiki, p.is_redirect_to) for p in pages if p.is_redirect_to is not None}


def _final_target(iri: str, redirects: Mapping[str, str]) -> str | None:
    base, sep, frag = iri.partition("#")
    current = base
    for _ in range(MAX_REDIRECT_DEPTH + 1):
        nxt = redirects.get(current)
        if nxt is None:
            if sep and "#" not in current:
                return current + sep + frag
            return current
        current = nxt
    return None


def resolve_redirects(a: Alignment, pages: Iterable[PageRecord] | Mapping[str, str],
                      report: Counter | None = None) -> Alignment:
    """Replace each endpoint by its final redirect target.

    Chains longer than ten hops are treated as cycles and the affected links
    dropped (counted under ``redirect_cycles``).
    """
    redirects = pages if isinstance(pages, Mapping) else redirect_map(pages)
    out = []
    cycles = 0
    for c in a:
        src = _final_target(c.source.iri, redirects)
        tgt = _final_target(c.target.iri, redirects)
        if src is None or tgt is None:
            cycles += 1
            continue
        if src == c.source.iri and tgt == c.target.iri:
            out.append(c)
        else:
            out.append(Correspondence(EntityRef(c.source.wiki, src), EntityRef(c.target.wiki, tgt),
                                      c.confidence, c.provenance))
    if report is not None:
        report["redirect_cycles"] += cycles
    if cycles:
        logger.warning("dropped %d links with cyclic redirects", cycles)
    return Alignment(out)


def enforce_injectivity(a: Alignment) -> Alignment:
    """Drop every link of an entity that links more than once into the same other wiki."""
    degree: Counter = Counter()
    for c in a:
        degree[(c.source.iri, c.target.wiki)] += 1
        degree[(c.target.iri, c.source.wiki)] += 1
    return a.filter(lambda c: degree[(c.source.iri, c.target.wiki)] == 1
                    and degree[(c.target.iri, c.source.wiki)] == 1)


def detect_disambiguation(page: PageRecord) -> DisambiguationFlags:
    return DisambiguationFlags(
        by_label="disambiguation" in (page.label or page.title).lower(),
        by_first_sentence=bool(_REFER_TO.search(page.first_sentence or "")),
        by_category=any("disambiguation" in c.lower() for c in page.categories),
    )


def drop_anchor_and_dead_links(a: Alignment, kgs: Mapping[str, KnowledgeGraph],
                               pages: Iterable[PageRecord], report: Counter | None = None) -> Alignment:
    """Remove anchor links, links touching a disambiguation page, and dead links.

    An endpoint is dead when its wiki has a loaded KG and the IRI appears
    there neither as subject nor as object. Wikis without a KG are left for
    the exterior-link step.
    """
    disambiguation = {p.iri for p in pages if detect_disambiguation(p)}
    counts = Counter()

    def dead(e: EntityRef) -> bool:
        kg = kgs.get(e.wiki)
        return kg is not None and e.iri not in kg.presence

    kept = []
    for c in a:
        if has_fragment(c.source.iri) or has_fragment(c.target.iri):
            counts["anchor"] += 1
        elif strip_fragment(c.source.iri) in disambiguation or strip_fragment(c.target.iri) in disambiguation:
            counts["disambiguation"] += 1
        elif dead(c.source) or dead(c.target):
            counts["dead"] += 1
        else:
            kept.append(c)
    if report is not None:
        report.update(counts)
    return Alignment(kept)


def refine(candidates: Alignment, pages: Iterable[PageRecord], kgs: Mapping[str, KnowledgeGraph],
           report: dict | None = None) -> Alignment:
    """Full refinement stage; per-step sizes go into ``report``."""
    pages = list(pages)
    counts: Counter = Counter()
    sizes = {"candidates": len(candidates)}
    a = resolve_redirects(candidates, pages, counts)
    sizes["after_redirects"] = len(a)
    a = normalize_directions(a)
    sizes["after_normalization"] = len(a)
    a = enforce_injectivity(a)
    sizes["after_injectivity"] = len(a)
    a = drop_anchor_and_dead_links(a, kgs, pages, counts)
    sizes["after_page_removal"] = len(a)
    if report is not None:
        report.update(sizes)
        report["removed"] = {k: counts[k] for k in ("redirect_cycles", "anchor", "disambiguation", "dead")}
        report["removed"]["injectivity"] = sizes["after_normalization"] - sizes["after_injectivity"]
    return a
