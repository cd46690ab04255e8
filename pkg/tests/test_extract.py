import random
from collections import Counter

import pytest

from kgalign.extract import (best_substring, choose_marker, collect_seed_links,
                             extract_candidate_alignment, select_section_marker, substring_quality, title_index)
from kgalign.model import InterWikiLink, PageRecord, Section, entity_iri

from oracles import ELEVEN, brute_force_marker, random_title_counts, stats


def test_no_links_means_no_seeds():
    p = PageRecord("w", "A", sections=(Section("Notes", ()),))
    assert collect_seed_links([p], {}).total_seed_links == 0


def test_single_seed():
    p = PageRecord("wikiA", "Frodo", sections=(Section("External links", (InterWikiLink("wikiB", "Frodo"),)),))
    s = collect_seed_links([p], {"wikiB": {"frodo"}})
    assert s.counts == Counter({"external links": 1})


def test_eleven_seed_fixture_shape():
    s = stats(ELEVEN)
    assert s.total_seed_links == 11 and s.longest_title_len == 14


def test_full_cover_full_length_is_one():
    assert substring_quality("see also", stats({"see also": 6})) == 1.0


def test_worked_values_are_exact_harmonic_means():
    s = stats(ELEVEN)
    # coverage 10/11 and length 13/14 give 260/283 exactly (printed elsewhere as 0.9190)
    assert substring_quality("external link", s) == pytest.approx(260 / 283, abs=1e-12)
    assert substring_quality("li", s) == pytest.approx(20 / 81, abs=1e-12)
    assert substring_quality("external links", s) == pytest.approx(16 / 19, abs=1e-12)


def test_eleven_seed_fixture_selects_external_link():
    assert select_section_marker(stats(ELEVEN)) == "external link"


def test_empty_stats_fall_back_to_link():
    assert select_section_marker(stats({})) == "link"


def test_four_seeds_fall_back_to_link():
    assert select_section_marker(stats({"external links": 4})) == "link"


def test_low_same_title_share_falls_back():
    s = stats({"see also": 6})
    s.section_links = {"see also": (100, 6)}
    assert choose_marker(s).fallback == "same-title share too low"


def test_too_short_candidate_rejected():
    with pytest.raises(ValueError):
        substring_quality("x", stats(ELEVEN))


def test_argmax_matches_brute_force_onrandom_schema_fixtures():
    rng = random.Random(11)
    for _ in range(150):
        counts = random_title_counts(rng)
        text, q = brute_force_marker(counts)
        got, got_q = best_substring(stats(counts))
        assert got == text
        assert got_q == pytest.approx(float(q), abs=1e-12)


def _farm():
    pages = [
        PageRecord("a", "Frodo", sections=(Section("External link", (InterWikiLink("b", "Frodo"),)),)),
        PageRecord("a", "Sam", sections=(Section("Relationships", (InterWikiLink("b", "Frodo"),)),)),
        PageRecord("b", "Frodo"),
    ]
    return pages


def test_single_wiki_farm_gives_nothing():
    assert len(extract_candidate_alignment([PageRecord("a", "X")])) == 0


def test_two_wiki_fixture_under_marker():
    markers = []
    a = extract_candidate_alignment(_farm(), "external link", markers)
    assert [(c.source.iri, c.target.iri) for c in a] == [(entity_iri("a", "Frodo"), entity_iri("b", "Frodo"))]
    assert markers[0].fallback == "too few seed links"


def test_hard_positive_extracted():
    pages = [PageRecord("a", "Bilbo", sections=(Section("Link", (InterWikiLink("b", "Bilbo Baggins"),)),)),
             PageRecord("b", "Bilbo Baggins")]
    a = extract_candidate_alignment(pages)
    assert len(a) == 1 and all(c.confidence is None for c in a)


def test_marker_learned_per_wiki():
    pages = []
    for i in range(6):
        name = f"E{i}"
        pages.append(PageRecord("a", name, sections=(Section("Other wikis", (InterWikiLink("b", name),)),
                                                     Section("Notes", (InterWikiLink("b", "E0"),)))))
        pages.append(PageRecord("b", name))
    markers = []
    a = extract_candidate_alignment(pages, markers=markers)
    assert markers[0].marker == "other wikis"
    assert len(a) == 6
    assert title_index(pages)["b"] == {f"e{i}" for i in range(6)}
