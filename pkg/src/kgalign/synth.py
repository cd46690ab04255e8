"""Synthetic wiki farm generator for desk-scale end-to-end runs.

Entities are spread over wikis; every page of an entity links to pages of
the same entity in other wikis from the wiki's identity section, forming a
connected link structure per entity (optionally through an exterior wiki
that has no KG). Noise links are injected per page at configurable rates.
The planted truth is every cross-wiki pair of pages showing the same entity.
"""
from __future__ import annotations

import json
import logging
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import EvalReport, evaluate
from .model import (OWL_CLASS, OWL_DATATYPE_PROPERTY, OWL_OBJECT_PROPERTY, RDF_TYPE, RDFS_LABEL, Alignment,
                    Correspondence, EntityRef, InterWikiLink, Literal, PageRecord, Section, class_iri,
                    entity_iri, property_iri, write_alignment, write_ntriples, write_page_dump)

logger = logging.getLogger(__name__)

EXTERIOR_WIKI = "wikipedia"

# (usual, variant): the variant contains the usual title, so one marker covers both
IDENTITY_TITLES = [("External link", "External links"), ("See also", "See Also"),
                   ("Other wiki", "Other wikis"), ("Weblink", "Weblinks"),
                   ("Interwiki", "Interwikis"), ("Elsewhere", "Elsewhere on the farm")]
OTHER_TITLES = ["Relationships", "Appearances", "Biography", "Notes", "Gallery"]

TYPES = {"Character": ("Character", "Person"), "Location": ("Location", "Place"),
         "Item": ("Item", "Artifact"), "Event": ("Event", "Battle")}
PROPERTIES = {"species": ("species", "race"), "home": ("home", "residence"), "born": ("born", "birth")}
SPECIES = ["elf", "dwarf", "human", "hobbit", "orc", "wizard", "dragon", "ent", "troll", "spirit"]

_SYLLABLES = ["ar", "bel", "cor", "dan", "el", "fin", "gal", "har", "is", "jor", "kal", "lor", "mir", "nor",
              "or", "per", "quel", "ran", "sil", "tor", "ul", "val", "wen", "xan", "yor", "zan", "bri", "dro",
              "fea", "gwa", "thal", "mor"]

NOISE_TYPES = ("fan_out", "disambiguation", "dead_link", "anchor", "wrong_link")


@dataclass
class NoiseRates:
    fan_out: float = 0.0
    disambiguation: float = 0.0
    dead_link: float = 0.0
    anchor: float = 0.0
    wrong_link: float = 0.0

    @classmethod
    def mixed(cls, total: float) -> NoiseRates:
        """``total`` noise rate per page split evenly over the five noise types."""
        share = total / len(NOISE_TYPES)
        return cls(*(share for _ in NOISE_TYPES))

    def validate(self) -> None:
        for name in NOISE_TYPES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"noise rate {name}={v} outside [0, 1]")


@dataclass
class FarmConfig:
    n_wikis: int = 20
    n_entities: int = 500
    share: float = 0.3  # chance that a wiki of the entity's universe has a page for it
    seed: int = 0
    wikis_per_universe: int = 20
    universe_affinity: float = 0.8
    hard_positive_rate: float = 0.15
    redirect_rate: float = 0.05
    exterior_rate: float = 0.2
    backlink_rate: float = 0.3
    extra_link_rate: float = 0.3
    title_variant_rate: float = 0.1
    related_links: int = 1
    noise: NoiseRates = field(default_factory=NoiseRates)

    def validate(self) -> None:
        if self.n_entities < 1:
            raise ValueError("need at least one entity")
        if self.n_wikis < 2:
            raise ValueError("need at least two wikis")
        for name in ("share", "universe_affinity", "hard_positive_rate", "redirect_rate", "exterior_rate",
                     "backlink_rate", "extra_link_rate", "title_variant_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        self.noise.validate()

    @classmethod
    def from_dict(cls, d: dict) -> FarmConfig:
        d = dict(d)
        noise = d.pop("noise", {})
        if isinstance(noise, (int, float)):
            noise = NoiseRates.mixed(float(noise))
        elif isinstance(noise, dict):
            noise = NoiseRates(**noise)
        return cls(noise=noise, **d)


@dataclass
class Entity:
    name: str
    kind: str
    species: str
    universe: int
    home: int | None = None
    born: int = 0


@dataclass
class SyntheticFarm:
    root: Path
    pages_dir: Path
    kgs_dir: Path
    truth_path: Path
    truth: Alignment
    wikis: list[str]
    stats: dict

    def score(self, system: Alignment) -> EvalReport:
        """Closure-aware scores against the planted truth.

        The truth is complete, so every system pair is scored.
        """
        universe = {e.iri for e in system.entities()} | {e.iri for e in self.truth.entities()}
        return evaluate(system, self.truth, universe=universe)


class _Builder:
    def __init__(self, cfg: FarmConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.nprng = np.random.default_rng(cfg.seed)
        width = len(str(cfg.n_wikis - 1))
        self.wikis = [f"wiki{i:0{width}d}" for i in range(cfg.n_wikis)]
        self.n_universes = max(1, cfg.n_wikis // max(1, cfg.wikis_per_universe))
        self.universe_wikis: dict[int, list[str]] = defaultdict(list)
        self.wiki_universe = {w: i % self.n_universes for i, w in enumerate(self.wikis)}
        for w, u in self.wiki_universe.items():
            self.universe_wikis[u].append(w)
        rng = self.rng
        self.identity_title = {w: rng.choice(IDENTITY_TITLES) for w in self.wikis}
        self.class_name = {w: {t: rng.choice(names) for t, names in TYPES.items()} for w in self.wikis}
        self.prop_name = {w: {p: rng.choice(names) for p, names in PROPERTIES.items()} for w in self.wikis}
        self.titles: dict[str, set[str]] = {w: set() for w in self.wikis}
        self.page_title: dict[tuple[str, int], str] = {}
        self.link_title: dict[tuple[str, int], str] = {}
        self.entity_wikis: dict[int, list[str]] = {}
        self.wiki_entities: dict[str, list[int]] = defaultdict(list)
        # page -> {section title: [InterWikiLink]}
        self.sections: dict[tuple[str, int], dict[str, list[InterWikiLink]]] = {}
        self.linked_wikis: dict[tuple[str, int], set[str]] = defaultdict(set)
        self.extra_pages: dict[str, list[PageRecord]] = defaultdict(list)
        self.redirects: dict[str, list[PageRecord]] = defaultdict(list)
        self.stats: dict[str, int] = defaultdict(int)

    # -- entities and pages

    def _names(self, n: int) -> list[str]:
        rng = self.rng
        seen, out = set(), []
        while len(out) < n:
            first = "".join(rng.choice(_SYLLABLES) for _ in range(2)).capitalize()
            last = "".join(rng.choice(_SYLLABLES) for _ in range(rng.choice((2, 3)))).capitalize()
            name = f"{first} {last}"
            if name not in seen:
                seen.add(name)
                out.append(name)
        return out

    def make_entities(self) -> None:
        cfg, rng = self.cfg, self.rng
        kinds = list(TYPES)
        names = self._names(cfg.n_entities)
        self.entities = [Entity(n, rng.choice(kinds), rng.choice(SPECIES), rng.randrange(self.n_universes),
                                born=rng.randrange(1, 3000)) for n in names]
        locations = [i for i, e in enumerate(self.entities) if e.kind == "Location"]
        for e in self.entities:
            if locations and rng.random() < 0.7:
                e.home = rng.choice(locations)
        for i, e in enumerate(self.entities):
            home_wikis = self.universe_wikis[e.universe]
            k = max(1, int(self.nprng.binomial(len(home_wikis), cfg.share)))
            chosen: list[str] = []
            tries = 0
            while len(chosen) < k and tries < 20 * k:
                tries += 1
                pool = home_wikis if rng.random() < cfg.universe_affinity else self.wikis
                w = rng.choice(pool)
                if w not in chosen:
                    chosen.append(w)
            self.entity_wikis[i] = chosen
            for w in chosen:
                self._add_page(w, i)

    def _claim(self, wiki: str, title: str) -> bool:
        if title in self.titles[wiki]:
            return False
        self.titles[wiki].add(title)
        return True

    def _alias(self, name: str) -> str:
        first, last = name.split(" ", 1)
        return self.rng.choice((first, f"{last}, {first}", f"{name} the Elder", f"Lord {last}"))

    def _add_page(self, wiki: str, i: int) -> None:
        cfg, rng = self.cfg, self.rng
        name = self.entities[i].name
        title = name
        if rng.random() < cfg.hard_positive_rate:
            alias = self._alias(name)
            if alias not in self.titles[wiki]:
                title = alias
                self.stats["hard_positive_pages"] += 1
        if not self._claim(wiki, title):
            title = f"{name} ({wiki})"
            self._claim(wiki, title)
        self.page_title[(wiki, i)] = title
        self.link_title[(wiki, i)] = title
        self.wiki_entities[wiki].append(i)
        self.sections[(wiki, i)] = {}
        if rng.random() < cfg.redirect_rate:
            alt = f"{name} (redirect)" if title == name else name
            if self._claim(wiki, alt):
                self.redirects[wiki].append(PageRecord(wiki, alt, alt, is_redirect_to=title))
                self.link_title[(wiki, i)] = alt
                self.stats["redirects"] += 1

    # -- links

    def _identity_section(self, wiki: str) -> str:
        primary, variant = self.identity_title[wiki]
        return variant if self.rng.random() < self.cfg.title_variant_rate else primary

    def _link(self, page: tuple[str, int], target_wiki: str, title: str, fragment: str | None = None,
              section: str | None = None) -> None:
        sec = section if section is not None else self._identity_section(page[0])
        self.sections[page].setdefault(sec, []).append(InterWikiLink(target_wiki, title, fragment))
        if section is None:
            self.linked_wikis[page].add(target_wiki)

    def plant_identity_links(self) -> None:
        cfg, rng = self.cfg, self.rng
        for i, e in enumerate(self.entities):
            nodes: list[str] = list(self.entity_wikis[i])
            if rng.random() < cfg.exterior_rate:
                nodes.append(EXTERIOR_WIKI)
            if len(nodes) < 2:
                continue
            rng.shuffle(nodes)
            edges: set[frozenset] = set()
            for k in range(1, len(nodes)):
                edges.add(frozenset((nodes[k], nodes[rng.randrange(k)])))
            for a in nodes:
                if rng.random() < cfg.extra_link_rate:
                    b = rng.choice(nodes)
                    if b != a:
                        edges.add(frozenset((a, b)))
            for edge in sorted(edges, key=sorted):
                a, b = sorted(edge)
                if EXTERIOR_WIKI in edge:
                    farm = a if b == EXTERIOR_WIKI else b
                    self._link((farm, i), EXTERIOR_WIKI, e.name)
                    self.stats["exterior_links"] += 1
                    continue
                if rng.random() < 0.5:
                    a, b = b, a
                self._link((a, i), b, self.link_title[(b, i)])
                self.stats["identity_links"] += 1
                if rng.random() < cfg.backlink_rate:
                    self._link((b, i), a, self.link_title[(a, i)])
                    self.stats["identity_links"] += 1

    def plant_related_links(self) -> None:
        rng = self.rng
        for (wiki, i) in self.page_title:
            for _ in range(self.cfg.related_links):
                other_wiki = rng.choice(self.wikis)
                if other_wiki == wiki or not self.wiki_entities[other_wiki]:
                    continue
                j = rng.choice(self.wiki_entities[other_wiki])
                self._link((wiki, i), other_wiki, self.page_title[(other_wiki, j)], section=rng.choice(OTHER_TITLES))
            # intra-wiki link, dropped at parse time
            j = rng.choice(self.wiki_entities[wiki])
            self._link((wiki, i), wiki, self.page_title[(wiki, j)], section=rng.choice(OTHER_TITLES))

    def _foreign_wiki(self, page: tuple[str, int]) -> str | None:
        """A farm wiki without a page of this entity and not yet linked from this page."""
        wiki, i = page
        excluded = set(self.entity_wikis[i]) | self.linked_wikis[page]
        for _ in range(20):
            w = self.rng.choice(self.wikis)
            if w not in excluded and self.wiki_entities[w]:
                return w
        return None

    def _other_page(self, wiki: str, not_entity: int) -> int | None:
        ents = self.wiki_entities[wiki]
        for _ in range(10):
            j = self.rng.choice(ents)
            if j != not_entity:
                return j
        return None

    def inject_noise(self) -> None:
        noise, rng = self.cfg.noise, self.rng
        for page in sorted(self.page_title):
            wiki, i = page
            if rng.random() < noise.fan_out:
                linked = sorted(w for w in self.linked_wikis[page] if w != EXTERIOR_WIKI)
                if linked:
                    w = rng.choice(linked)
                    j = self._other_page(w, i)
                    if j is not None:
                        self._link(page, w, self.page_title[(w, j)])
                        self.stats["noise_fan_out"] += 1
            if rng.random() < noise.wrong_link:
                w = self._foreign_wiki(page)
                if w is not None:
                    j = self._other_page(w, i)
                    if j is not None:
                        self._link(page, w, self.page_title[(w, j)])
                        self.stats["noise_wrong_link"] += 1
            if rng.random() < noise.anchor:
                w = self._foreign_wiki(page)
                if w is not None:
                    j = self._other_page(w, i)
                    if j is not None:
                        self._link(page, w, self.page_title[(w, j)], fragment=rng.choice(OTHER_TITLES))
                        self.stats["noise_anchor"] += 1
            if rng.random() < noise.dead_link:
                w = self._foreign_wiki(page)
                if w is not None:
                    self._link(page, w, f"{self.entities[i].name} (deleted)")
                    self.stats["noise_dead_link"] += 1
            if rng.random() < noise.disambiguation:
                w = self._foreign_wiki(page)
                if w is not None:
                    d = self._disambiguation_page(w, self.entities[i].name)
                    if d is not None:
                        self._link(page, w, d.title)
                        self.stats["noise_disambiguation"] += 1

    def _disambiguation_page(self, wiki: str, name: str) -> PageRecord | None:
        style = self.rng.randrange(3)
        if style == 0:
            title = f"{name} (disambiguation)"
            page = PageRecord(wiki, title, title, first_sentence=f"{name} is a name.")
        elif style == 1:
            title = name
            page = PageRecord(wiki, title, title, first_sentence=f"{name} may refer to:")
        else:
            title = name
            page = PageRecord(wiki, title, title, categories=("Disambiguation pages",),
                              first_sentence=f"{name} is ambiguous.")
        existing = next((p for p in self.extra_pages[wiki] if p.title == title), None)
        if existing is not None:
            return existing
        if not self._claim(wiki, title):
            return None
        self.extra_pages[wiki].append(page)
        return page

    # -- output

    def pages_of(self, wiki: str) -> list[PageRecord]:
        out = []
        for i in self.wiki_entities[wiki]:
            e = self.entities[i]
            title = self.page_title[(wiki, i)]
            secs = tuple(Section(t, tuple(ls)) for t, ls in sorted(self.sections[(wiki, i)].items()))
            out.append(PageRecord(wiki, title, title, None, (f"{e.kind}s",),
                                  f"{title} is a {e.species} {e.kind.lower()}.", secs))
        out.extend(self.redirects[wiki])
        out.extend(self.extra_pages[wiki])
        out.sort(key=lambda p: p.title)
        return out

    def triples_of(self, wiki: str) -> list[tuple]:
        out = []
        cls = self.class_name[wiki]
        props = self.prop_name[wiki]
        for t, name in sorted(cls.items()):
            c = class_iri(wiki, name)
            out.append((c, RDF_TYPE, OWL_CLASS))
            out.append((c, RDFS_LABEL, Literal(name, "en")))
        for p, name in sorted(props.items()):
            iri = property_iri(wiki, name)
            out.append((iri, RDF_TYPE, OWL_OBJECT_PROPERTY if p == "home" else OWL_DATATYPE_PROPERTY))
            out.append((iri, RDFS_LABEL, Literal(name, "en")))
        universe = f"saga{self.wiki_universe[wiki]}"
        for i in self.wiki_entities[wiki]:
            e = self.entities[i]
            title = self.page_title[(wiki, i)]
            s = entity_iri(wiki, title)
            out.append((s, RDFS_LABEL, Literal(title, "en")))
            out.append((s, RDF_TYPE, class_iri(wiki, cls[e.kind])))
            out.append((s, property_iri(wiki, props["species"]), Literal(e.species.capitalize())))
            out.append((s, property_iri(wiki, props["born"]), Literal(str(e.born))))
            if e.home is not None:
                if (wiki, e.home) in self.page_title:
                    out.append((s, property_iri(wiki, props["home"]), entity_iri(wiki, self.page_title[(wiki, e.home)])))
                else:
                    out.append((s, property_iri(wiki, props["home"]), Literal(self.entities[e.home].name)))
            out.append((s, property_iri(wiki, "abstract"),
                        Literal(f"{title} is a {e.species} {e.kind.lower()} of the {universe} chronicles.", "en")))
        for p in self.extra_pages[wiki]:
            s = entity_iri(wiki, p.title)
            out.append((s, RDFS_LABEL, Literal(p.label, "en")))
        return out

    def truth(self) -> Alignment:
        out = []
        for i, ws in self.entity_wikis.items():
            refs = sorted(EntityRef(w, entity_iri(w, self.page_title[(w, i)])) for w in ws)
            for a_idx, a in enumerate(refs):
                for b in refs[a_idx + 1:]:
                    out.append(Correspondence(a, b, 1.0))
        return Alignment(out)


def generate_synthetic_farm(cfg: FarmConfig, out_dir: str | Path) -> SyntheticFarm:
    """Write ``pages/``, ``kgs/``, ``truth.tsv`` and ``farm.json`` under ``out_dir``."""
    cfg.validate()
    b = _Builder(cfg)
    b.make_entities()
    b.plant_identity_links()
    b.plant_related_links()
    b.inject_noise()
    root = Path(out_dir)
    pages_dir, kgs_dir = root / "pages", root / "kgs"
    pages_dir.mkdir(parents=True, exist_ok=True)
    kgs_dir.mkdir(parents=True, exist_ok=True)
    for w in b.wikis:
        write_page_dump(b.pages_of(w), pages_dir / f"{w}.jsonl")
        write_ntriples(b.triples_of(w), kgs_dir / f"{w}.nt")
    truth = b.truth()
    truth_path = root / "truth.tsv"
    write_alignment(truth, truth_path)
    stats = dict(sorted(b.stats.items()))
    stats["pages"] = len(b.page_title)
    stats["truth_pairs"] = len(truth)
    with open(root / "farm.json", "w", encoding="utf-8") as fh:
        json.dump({"config": asdict(cfg), "stats": stats}, fh, indent=2, sort_keys=True)
    logger.info("synthetic farm: %d wikis, %d pages, %d truth pairs", len(b.wikis), stats["pages"], len(truth))
    return SyntheticFarm(root, pages_dir, kgs_dir, truth_path, truth, list(b.wikis), stats)
