"""Candidate same-as link mining from wiki page dumps.

Every wiki tends to keep its links to the same entity in other wikis under
one recurring section title ("External links", "See also", ...). Links that
point to a page with the same title in another wiki are taken as seeds; the
section titles of the seeds are scored substring by substring, and the best
substring (the *marker*) selects the sections whose inter-wiki links become
candidate correspondences.
"""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import (Alignment, Correspondence, EntityRef, PageRecord, entity_iri,
                    normalize_label, normalize_section_title)

logger = logging.getLogger(__name__)

DEFAULT_MARKER = "link"
MIN_SEED_LINKS = 5
MIN_SAME_TITLE_FRACTION = 0.2
MIN_MARKER_LEN = 2
MAX_ENUM_TITLE_LEN = 64


@dataclass
class SectionTitleStats:
    """Seed-link counts per normalized section title for one wiki.

    ``section_links`` additionally records, for every section title holding
    inter-wiki links, ``(links, same_title_links)`` so the share of same-title
    links in an extraction can be evaluated without the pages.
    """

    wiki: str = ""
    counts: Counter = field(default_factory=Counter)
    section_links: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def total_seed_links(self) -> int:
        return sum(self.counts.values())

    @property
    def longest_title_len(self) -> int:
        return max((len(t) for t in self.counts), default=0)


@dataclass(frozen=True)
class MarkerChoice:
    wiki: str
    marker: str
    quality: float
    seed_count: int
    fallback: str | None = None  # reason the default marker was used


def title_index(pages: Iterable[PageRecord]) -> dict[str, set[str]]:
    """Normalized titles of all pages (redirects included), per wiki."""
    index: dict[str, set[str]] = defaultdict(set)
    for p in pages:
        index[p.wiki].add(normalize_label(p.title))
    return dict(index)


def collect_seed_links(pages: Iterable[PageRecord], farm_titles: Mapping[str, set[str]]) -> SectionTitleStats:
    stats = SectionTitleStats()
    per_section: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for page in pages:
        stats.wiki = page.wiki
        own = normalize_label(page.title)
        for section in page.sections:
            if not section.links:
                continue
            title = normalize_section_title(section.title)
            bucket = per_section[title]
            for link in section.links:
                target = normalize_label(link.target_title)
                bucket[0] += 1
                if target != own:
                    continue
                bucket[1] += 1
                if target in farm_titles.get(link.target_wiki, ()):
                    stats.counts[title] += 1
    stats.section_links = {t: (n, same) for t, (n, same) in per_section.items()}
    return stats


def substring_quality(text: str, stats: SectionTitleStats) -> float:
    """Harmonic mean of link coverage and relative length of ``text``.

    Coverage is the fraction of seed links whose section title contains
    ``text``; relative length is ``len(text)`` over the longest seed title.
    """
    if len(text) < MIN_MARKER_LEN:
        raise ValueError(f"marker candidates need at least {MIN_MARKER_LEN} characters: {text!r}")
    total = stats.total_seed_links
    if total <= 0:
        raise ValueError("no seed links")
    covered = sum(n for title, n in stats.counts.items() if text in title)
    return _quality(covered, len(text), total, stats.longest_title_len)


def _quality(covered: int, length: int, total: int, longest: int) -> float:
    # 2ab/(a+b) with a = covered/total, b = length/longest, as one exact-integer division
    if covered == 0:
        return 0.0
    return 2 * covered * length / (covered * longest + length * total)


def _substrings(title: str) -> set[str]:
    t = title[:MAX_ENUM_TITLE_LEN]
    n = len(t)
    return {t[i:j] for i in range(n) for j in range(i + MIN_MARKER_LEN, n + 1)}


def best_substring(stats: SectionTitleStats) -> tuple[str, float] | None:
    """Argmax of the substring quality; ties go to the longer, then lexicographically smaller substring."""
    total = stats.total_seed_links
    if total <= 0:
        return None
    coverage: Counter = Counter()
    for title, n in stats.counts.items():
        for sub in _substrings(title):
            coverage[sub] += n
    if not coverage:
        return None
    longest = stats.longest_title_len
    best = min(coverage, key=lambda s: (-_quality(coverage[s], len(s), total, longest), -len(s), s))
    return best, _quality(coverage[best], len(best), total, longest)


def same_title_fraction(marker: str, stats: SectionTitleStats) -> float:
    links = same = 0
    for title, (n, s) in stats.section_links.items():
        if marker in title:
            links += n
            same += s
    return same / links if links else 0.0


def choose_marker(stats: SectionTitleStats, default: str = DEFAULT_MARKER) -> MarkerChoice:
    seeds = stats.total_seed_links
    if seeds < MIN_SEED_LINKS:
        return MarkerChoice(stats.wiki, default, 0.0, seeds, "too few seed links")
    best = best_substring(stats)
    if best is None:
        return MarkerChoice(stats.wiki, default, 0.0, seeds, "no candidate substring")
    marker, q = best
    if same_title_fraction(marker, stats) <= MIN_SAME_TITLE_FRACTION:
        return MarkerChoice(stats.wiki, default, q, seeds, "same-title share too low")
    return MarkerChoice(stats.wiki, marker, q, seeds)


def select_section_marker(stats: SectionTitleStats, default: str = DEFAULT_MARKER) -> str:
    return choose_marker(stats, default).marker


def links_under_marker(pages: Iterable[PageRecord], marker: str) -> list[Correspondence]:
    out = []
    for page in pages:
        if page.is_redirect_to is not None:
            continue
        source = EntityRef(page.wiki, page.iri)
        for section in page.sections:
            if marker not in normalize_section_title(section.title):
                continue
            for link in section.links:
                target = EntityRef(link.target_wiki, entity_iri(link.target_wiki, link.target_title, link.fragment))
                out.append(Correspondence(source, target))
    return out


def extract_candidate_alignment(pages: Iterable[PageRecord], default_marker: str = DEFAULT_MARKER,
                                markers: list[MarkerChoice] | None = None) -> Alignment:
    """Directed, unscored candidate links for the whole farm.

    The marker is chosen per wiki; the chosen markers are appended to
    ``markers`` when given.
    """
    by_wiki: dict[str, list[PageRecord]] = defaultdict(list)
    pages = list(pages)
    for p in pages:
        by_wiki[p.wiki].append(p)
    farm_titles = title_index(pages)
    found = []
    for wiki in sorted(by_wiki):
        stats = collect_seed_links(by_wiki[wiki], farm_titles)
        stats.wiki = wiki
        choice = choose_marker(stats, default_marker)
        if markers is not None:
            markers.append(choice)
        logger.debug("wiki %s: marker %r (Q=%.4f, %d seeds)", wiki, choice.marker, choice.quality, choice.seed_count)
        found.extend(links_under_marker(by_wiki[wiki], choice.marker))
    return Alignment(found)
