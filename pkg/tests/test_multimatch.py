import itertools
import math
import random
import sys
import textwrap

import pytest

from kgalign.model import RDF_TYPE, RDFS_LABEL, Alignment, KnowledgeGraph, Literal, class_iri, entity_iri
from kgalign.multimatch import (DocumentFrequencies, ExternalMatcher, KgFingerprint, cosine_distance,
                                fingerprint, get_matcher, hac_order, merge_graphs,
                                MergedGraph, match_farm, naive_descending_extraction, string_matcher)

from conftest import link
from oracles import greedy_oracle


def kg(wiki, names, cls=None):
    triples = [(entity_iri(wiki, n.replace(" ", "_")), RDFS_LABEL, Literal(n)) for n in names]
    if cls:
        triples += [(entity_iri(wiki, n.replace(" ", "_")), RDF_TYPE, class_iri(wiki, cls)) for n in names]
    return KnowledgeGraph(wiki, triples)


def test_bnode_only_kg_has_zero_vector():
    g = KnowledgeGraph("w", [("_:a", "_:b", Literal("123"))])
    fp = fingerprint(g, DocumentFrequencies.from_kgs([g]))
    assert fp.is_empty


def test_term_in_every_wiki_excluded():
    kgs = [kg("a", ["Common Frodo"]), kg("b", ["Common Sam"]), kg("c", ["Common Pippin"])]
    df = DocumentFrequencies.from_kgs(kgs)
    assert not df.in_band("common") and df.in_band("frodo")


def test_tf_idf_hand_table():
    kgs = [kg("a", ["x", "y"]), kg("b", ["y"]), kg("c", ["z"])]
    # documents: a={x,x,y,y} (local name + label), b={y,y}, c={z,z}; y in 2/3 docs <= 0.8 band
    df = DocumentFrequencies.from_kgs(kgs)
    fp = fingerprint(kgs[0], df)
    wx, wy = 2 * (math.log(3) + 1), 2 * (math.log(3 / 2) + 1)
    norm = math.hypot(wx, wy)
    assert fp.vector["x"] == pytest.approx(wx / norm)
    assert fp.vector["y"] == pytest.approx(wy / norm)


def test_two_kgs_single_merge():
    tree = hac_order([KgFingerprint("a", {"x": 1.0}), KgFingerprint("b", {"y": 1.0})])
    assert len(tree.steps) == 1 and sorted(tree.leaves) == ["a", "b"]


def test_nearest_pair_merges_first():
    fps = [KgFingerprint("a", {"x": 0.8, "y": 0.6}), KgFingerprint("b", {"x": 0.6, "y": 0.8}), KgFingerprint("c", {"z": 1.0})]
    first = hac_order(fps).steps[0]
    assert {first.left, first.right} == {"a", "b"}


def naive_average_linkage(dist: dict, names: list[str]):
    """O(n^3) average linkage: repeatedly merge the closest pair of clusters."""
    clusters = [frozenset([n]) for n in names]
    merges = []
    while len(clusters) > 1:
        best = None
        for i, j in itertools.combinations(range(len(clusters)), 2):
            d = sum(dist[frozenset((x, y))] for x in clusters[i] for y in clusters[j]) / (len(clusters[i]) * len(clusters[j]))
            if best is None or d < best[0] - 1e-12:
                best = (d, i, j)
        d, i, j = best
        merges.append((clusters[i] | clusters[j], d))
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)] + [clusters[i] | clusters[j]]
    return merges


def test_dendrogram_matches_naive_hac():
    rng = random.Random(4)
    for _ in range(20):
        fps = []
        for k in range(6):
            vec = {t: rng.random() for t in rng.sample("abcdefgh", 3)}
            norm = sum(v * v for v in vec.values()) ** 0.5
            fps.append(KgFingerprint(f"k{k}", {t: v / norm for t, v in vec.items()}))
        dist = {frozenset((a.wiki, b.wiki)): cosine_distance(a, b) for a, b in itertools.combinations(fps, 2)}
        tree = hac_order(fps)
        got = [(frozenset(s.leaves()), s.distance) for s in tree.steps]
        exp = naive_average_linkage(dist, [f.wiki for f in fps])
        assert [g[0] for g in got] == [e[0] for e in exp]
        for g, e in zip(got, exp):
            assert g[1] == pytest.approx(e[1], abs=1e-9)


def test_string_matcher_normalizes_labels():
    k1 = KnowledgeGraph("a", [(entity_iri("a", "Frodo_Baggins"), RDFS_LABEL, Literal("Frodo_Baggins"))])
    k2 = KnowledgeGraph("b", [(entity_iri("b", "x"), RDFS_LABEL, Literal("frodo baggins"))])
    assert len(string_matcher(k1, k2)) == 1


def test_string_matcher_separates_kinds():
    k1 = KnowledgeGraph("a", [(entity_iri("a", "e"), RDF_TYPE, class_iri("a", "Character")),
                              (class_iri("a", "Character"), RDFS_LABEL, Literal("Character"))])
    k2 = KnowledgeGraph("b", [(entity_iri("b", "Character"), RDFS_LABEL, Literal("Character"))])
    assert len(string_matcher(k1, k2)) == 0


def test_string_matcher_empty():
    assert len(string_matcher(KnowledgeGraph("a"), kg("b", ["x"]))) == 0


def test_extraction_examples():
    one_to_one = Alignment([link("a", "1", "b", "1", 0.3), link("a", "2", "b", "2", 0.9)])
    assert naive_descending_extraction(one_to_one) == one_to_one
    out = naive_descending_extraction(Alignment([link("a", "a", "b", "b", 0.9), link("a", "a", "b", "c", 0.8)]))
    assert out.pairs() == {(entity_iri("a", "a"), entity_iri("b", "b"))}
    out = naive_descending_extraction(Alignment([link("a", "a", "b", "b", 0.7), link("a", "c", "b", "b", 0.9),
                                                 link("a", "c", "b", "d", 0.8)]))
    assert out.pairs() == {(entity_iri("a", "c"), entity_iri("b", "b"))}


def test_extraction_matches_greedy_oracle():
    rng = random.Random(12)
    for _ in range(300):
        cs = [link("a", f"s{rng.randrange(8)}", "b", f"t{rng.randrange(8)}", rng.choice([0.2, 0.5, 0.7, 1.0]))
              for _ in range(rng.randint(0, 40))]
        a = Alignment(cs)
        out = naive_descending_extraction(a)
        assert out.pairs() == greedy_oracle(a)


def test_merge_with_empty_alignment_is_disjoint_union():
    g1, g2 = MergedGraph.from_kg(kg("a", ["x"])), MergedGraph.from_kg(kg("b", ["y"]))
    merged = merge_graphs(g1, g2, Alignment())
    assert set(merged.kg.triples) == set(g1.kg.triples) | set(g2.kg.triples)


def test_merge_rewrites_matched_entity():
    g1 = MergedGraph.from_kg(kg("a", ["x"]))
    g2 = MergedGraph.from_kg(KnowledgeGraph("b", [(entity_iri("b", "y"), RDFS_LABEL, Literal("y")),
                                                  (entity_iri("b", "z"), entity_iri("b", "rel"), entity_iri("b", "y"))]))
    merged = merge_graphs(g1, g2, Alignment([link("a", "x", "b", "y", 1.0)]))
    mentioned = {t for tr in merged.kg.triples for t in tr if isinstance(t, str)}
    assert (entity_iri("a", "x") in mentioned) != (entity_iri("b", "y") in mentioned)
    rep = entity_iri("b", "y") if entity_iri("b", "y") in mentioned else entity_iri("a", "x")
    assert sorted(merged.members[rep]) == sorted([entity_iri("a", "x"), entity_iri("b", "y")])


def test_identical_single_entity_kgs():
    kgs = {"a": kg("a", ["Frodo"]), "b": kg("b", ["Frodo"])}
    run, _ = match_farm(kgs, string_matcher)
    assert len(run.alignment) == 1


def test_chained_merges_expand_to_all_pairs():
    kgs = {w: kg(w, ["Frodo"]) for w in ("a", "b", "c")}
    run, tree = match_farm(kgs, string_matcher)
    assert run.matcher_calls == 2
    assert {frozenset(p) for p in run.alignment.pairs()} == {
        frozenset((entity_iri(x, "Frodo"), entity_iri(y, "Frodo"))) for x, y in itertools.combinations("abc", 2)}


def test_transitive_only_pair_is_expanded():
    # a and c never share a label, but both match b through different labels
    kgs = {"a": KnowledgeGraph("a", [(entity_iri("a", "f"), RDFS_LABEL, Literal("Frodo"))]),
           "b": KnowledgeGraph("b", [(entity_iri("b", "f"), RDFS_LABEL, Literal("Frodo")),
                                     (entity_iri("b", "f"), RDFS_LABEL, Literal("Ringbearer"))]),
           "c": KnowledgeGraph("c", [(entity_iri("c", "f"), RDFS_LABEL, Literal("Frodo"))])}
    run, _ = match_farm(kgs, string_matcher)
    assert frozenset((entity_iri("a", "f"), entity_iri("c", "f"))) in {frozenset(p) for p in run.alignment.pairs()}


@pytest.mark.parametrize("n", [2, 5, 9])
def test_n_minus_one_calls(n):
    calls = []

    def counting(k1, k2):
        calls.append((k1.wiki, k2.wiki))
        return Alignment()

    kgs = {f"k{i}": kg(f"k{i}", [f"e{i}", "shared"]) for i in range(n)}
    run, _ = match_farm(kgs, counting)
    assert run.matcher_calls == len(calls) == n - 1


def test_failing_matcher_is_contained():
    def broken(k1, k2):
        raise RuntimeError("boom")

    run, _ = match_farm({"a": kg("a", ["x"]), "b": kg("b", ["x"])}, broken)
    assert run.errors and len(run.alignment) == 0


def test_external_matcher_subprocess(tmp_path):
    script = tmp_path / "m.py"
    script.write_text(textwrap.dedent(f"""
        import sys
        src, tgt, out = sys.argv[1:]
        with open(out, "w") as fh:
            fh.write("{entity_iri('a', 'x')}\\t{entity_iri('b', 'x')}\\t=\\t0.9\\tdirect\\n")
    """))
    m = get_matcher(f"cmd:{sys.executable} {script}")
    assert isinstance(m, ExternalMatcher)
    out = m(kg("a", ["x"]), kg("b", ["x"]))
    assert [c.confidence for c in out] == [0.9]


def test_unknown_matcher():
    with pytest.raises(ValueError):
        get_matcher("nope")
