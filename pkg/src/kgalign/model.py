"""Core domain types and file formats.

Holds the identity-link types (EntityRef, Correspondence, Alignment), the
page-dump records mined for inter-wiki links, and an indexed in-memory
KnowledgeGraph, together with readers and writers for the three on-disk
formats: alignment TSV, page-dump JSON-Lines and N-Triples.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import re
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple
from urllib.parse import quote, unquote, urlsplit

logger = logging.getLogger(__name__)

IRI_BASE = "http://kg.wikifarm.local/"

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
RDFS_CLASS = "http://www.w3.org/2000/01/rdf-schema#Class"
OWL_CLASS = "http://www.w3.org/2002/07/owl#Class"
OWL_OBJECT_PROPERTY = "http://www.w3.org/2002/07/owl#ObjectProperty"
OWL_DATATYPE_PROPERTY = "http://www.w3.org/2002/07/owl#DatatypeProperty"
RDF_PROPERTY = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property"

_CLASS_TYPES = frozenset({RDFS_CLASS, OWL_CLASS})
_PROPERTY_TYPES = frozenset({OWL_OBJECT_PROPERTY, OWL_DATATYPE_PROPERTY, RDF_PROPERTY})

# characters left unescaped in IRI local names; '/' and '#' are always escaped
_LOCAL_SAFE = "_()',.-!:;~*$&+=@"
_WIKI_ID_RE = re.compile(r"^\S+$")
_WS_RE = re.compile(r"\s+")

INSTANCE, CLASS, PROPERTY = "instance", "class", "property"
KINDS = (INSTANCE, CLASS, PROPERTY)


class FormatError(ValueError):
    """Raised for malformed input in strict mode (and always for alignment TSV)."""


# --------------------------------------------------------------------------
# IRIs and normalization


def validate_wiki_id(name: str) -> str:
    if not name or not _WIKI_ID_RE.match(name) or "/" in name:
        raise ValueError(f"invalid wiki id: {name!r}")
    return name


def _local_name(title: str) -> str:
    return quote(_WS_RE.sub("_", title.strip()), safe=_LOCAL_SAFE)


def entity_iri(wiki: str, title: str, fragment: str | None = None) -> str:
    """IRI of the resource generated for page ``title`` of ``wiki``."""
    iri = f"{IRI_BASE}{wiki}/resource/{_local_name(title)}"
    if fragment is not None:
        iri += "#" + quote(fragment, safe=_LOCAL_SAFE)
    return iri


def class_iri(wiki: str, name: str) -> str:
    return f"{IRI_BASE}{wiki}/class/{_local_name(name)}"


def property_iri(wiki: str, name: str) -> str:
    return f"{IRI_BASE}{wiki}/property/{_local_name(name)}"


def wiki_of(iri: str) -> str:
    """Recover the wiki id from an IRI.

    IRIs under :data:`IRI_BASE` carry the wiki as the first path segment;
    any other IRI falls back to its authority.
    """
    if iri.startswith(IRI_BASE):
        n = len(IRI_BASE)
        end = iri.find("/", n)
        wiki = iri[n:] if end < 0 else iri[n:end]
        if wiki:
            return wiki
    host = urlsplit(iri).netloc
    if not host:
        raise ValueError(f"cannot derive wiki from IRI {iri!r}")
    return host


def has_fragment(iri: str) -> bool:
    return "#" in iri


def strip_fragment(iri: str) -> str:
    return iri.split("#", 1)[0]


def local_name(iri: str) -> str:
    """Last path segment or fragment of an IRI, percent-decoded."""
    cut = max(iri.rfind("/"), iri.rfind("#"))
    return unquote(iri[cut + 1:])


def title_of(iri: str) -> str:
    return local_name(strip_fragment(iri)).replace("_", " ")


@lru_cache(maxsize=1 << 16)
def normalize_label(text: str) -> str:
    """Shared label/title normalization: lowercase, underscores to spaces, collapse whitespace."""
    return _WS_RE.sub(" ", text.replace("_", " ")).strip().lower()


def normalize_section_title(text: str) -> str:
    return _WS_RE.sub(" ", text).strip().lower()


# --------------------------------------------------------------------------
# correspondences and alignments


@dataclass(frozen=True, slots=True, eq=False)
class EntityRef:
    """A resource of one wiki. Identity is the IRI, which already determines the wiki."""

    wiki: str
    iri: str

    def __eq__(self, other) -> bool:
        if other.__class__ is EntityRef:
            return self.iri == other.iri
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.iri)

    def __lt__(self, other: EntityRef) -> bool:
        return (self.wiki, self.iri) < (other.wiki, other.iri)

    @classmethod
    def from_iri(cls, iri: str) -> EntityRef:
        return cls(wiki_of(iri), iri)

    def __str__(self) -> str:
        return self.iri


class Provenance(str, enum.Enum):
    DIRECT = "direct"
    TRANSITIVE = "transitive"


@dataclass(frozen=True, slots=True)
class Correspondence:
    """An equivalence link between resources of two different wikis.

    ``confidence`` is None for candidate links that have not been scored yet.
    """

    source: EntityRef
    target: EntityRef
    confidence: float | None = None
    provenance: Provenance = Provenance.DIRECT

    relation = "="

    def __post_init__(self):
        if self.source.wiki == self.target.wiki:
            raise ValueError(f"correspondence within one wiki: {self.source.iri} / {self.target.iri}")
        c = self.confidence
        if c is not None and not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence out of range: {c}")

    @property
    def key(self) -> tuple[str, str]:
        return self.source.iri, self.target.iri

    def with_confidence(self, confidence: float | None) -> Correspondence:
        return Correspondence(self.source, self.target, confidence, self.provenance)


def correspondence(source: str, target: str, confidence: float | None = None,
                   provenance: Provenance = Provenance.DIRECT) -> Correspondence:
    """Shorthand building a correspondence from two IRIs."""
    return Correspondence(EntityRef.from_iri(source), EntityRef.from_iri(target), confidence, provenance)


def _conf_rank(c: Correspondence) -> float:
    return -1.0 if c.confidence is None else c.confidence


class Alignment:
    """Immutable set of correspondences keyed by (source IRI, target IRI).

    Iteration is sorted by source IRI, then target IRI. Duplicate keys passed
    to the constructor are merged keeping the highest confidence.
    """

    __slots__ = ("_items", "_sorted")

    def __init__(self, correspondences: Iterable[Correspondence] = ()):
        items: dict[tuple[str, str], Correspondence] = {}
        for c in correspondences:
            old = items.get(c.key)
            if old is None or _conf_rank(c) > _conf_rank(old):
                items[c.key] = c
        self._items = items
        self._sorted: list[Correspondence] | None = None

    def __iter__(self) -> Iterator[Correspondence]:
        if self._sorted is None:
            self._sorted = [self._items[k] for k in sorted(self._items)]
        return iter(self._sorted)

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __contains__(self, item) -> bool:
        if isinstance(item, Correspondence):
            return self._items.get(item.key) == item
        return item in self._items

    def __eq__(self, other) -> bool:
        if not isinstance(other, Alignment):
            return NotImplemented
        return self._items == other._items

    def __repr__(self) -> str:
        return f"Alignment({len(self)} correspondences)"

    def get(self, source: str, target: str) -> Correspondence | None:
        return self._items.get((source, target))

    def pairs(self) -> set[tuple[str, str]]:
        return set(self._items)

    def union(self, *others: Alignment) -> Alignment:
        return Alignment(c for a in (self, *others) for c in a._items.values())

    __or__ = union

    def filter(self, keep) -> Alignment:
        return Alignment(c for c in self._items.values() if keep(c))

    def entities(self) -> set[EntityRef]:
        out: set[EntityRef] = set()
        for c in self._items.values():
            out.add(c.source)
            out.add(c.target)
        return out

    def wikis(self) -> set[str]:
        return {e.wiki for e in self.entities()}

    def kg_pairs(self) -> set[tuple[str, str]]:
        return {tuple(sorted((c.source.wiki, c.target.wiki))) for c in self._items.values()}

    def by_provenance(self, provenance: Provenance) -> Alignment:
        return self.filter(lambda c: c.provenance == provenance)


def format_confidence(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_alignment(a: Alignment, path: str | Path) -> None:
    """Write ``a`` as header-free TSV: source, target, '=', confidence, provenance."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in a:
            fh.write(f"{c.source.iri}\t{c.target.iri}\t=\t{format_confidence(c.confidence)}\t{c.provenance.value}\n")


def read_alignment(path: str | Path) -> Alignment:
    out = []
    refs: dict[str, EntityRef] = {}  # one shared EntityRef per IRI

    def ref(iri: str) -> EntityRef:
        e = refs.get(iri)
        if e is None:
            e = refs[iri] = EntityRef.from_iri(sys.intern(iri))
        return e

    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            try:
                if len(cols) != 5 or cols[2] != "=":
                    raise ValueError("expected 5 columns with '=' relation")
                conf = None if cols[3] == "" else float(cols[3])
                if conf is not None and math.isnan(conf):
                    raise ValueError("confidence is NaN")
                out.append(Correspondence(ref(cols[0]), ref(cols[1]), conf, Provenance(cols[4])))
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
    return Alignment(out)


def read_alignments(paths: Iterable[str | Path]) -> Alignment:
    return Alignment().union(*(read_alignment(p) for p in paths))


# --------------------------------------------------------------------------
# parse reports


@dataclass
class ParseReport:
    path: str = ""
    lines: int = 0
    records: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)

    def reject(self, lineno: int, message: str, strict: bool) -> None:
        msg = f"{self.path}:{lineno}: {message}"
        if strict:
            raise FormatError(msg)
        self.skipped += 1
        if len(self.errors) < 20:
            self.errors.append(msg)
        logger.debug("skipped %s", msg)

    def as_dict(self) -> dict:
        return {"path": self.path, "lines": self.lines, "records": self.records,
                "skipped": self.skipped, "errors": list(self.errors)}


# --------------------------------------------------------------------------
# page dumps


@dataclass(frozen=True, slots=True)
class InterWikiLink:
    target_wiki: str
    target_title: str
    fragment: str | None = None


@dataclass(frozen=True, slots=True)
class Section:
    title: str
    links: tuple[InterWikiLink, ...] = ()


@dataclass(frozen=True, slots=True)
class PageRecord:
    wiki: str
    title: str
    label: str = ""
    is_redirect_to: str | None = None
    categories: tuple[str, ...] = ()
    first_sentence: str = ""
    sections: tuple[Section, ...] = ()

    @property
    def iri(self) -> str:
        return entity_iri(self.wiki, self.title)

    def to_json(self) -> dict:
        def link(l: InterWikiLink) -> dict:
            title = l.target_title if l.fragment is None else f"{l.target_title}#{l.fragment}"
            return {"wiki": l.target_wiki, "title": title}

        return {
            "wiki": self.wiki,
            "title": self.title,
            "label": self.label,
            "redirect_to": self.is_redirect_to,
            "categories": list(self.categories),
            "first_sentence": self.first_sentence,
            "sections": [{"title": s.title, "links": [link(l) for l in s.links]} for s in self.sections],
        }


def split_fragment(title: str) -> tuple[str, str | None]:
    if "#" in title:
        base, frag = title.split("#", 1)
        return base, frag
    return title, None


def _parse_link(raw, own_wiki: str) -> InterWikiLink | None:
    if isinstance(raw, str):
        if "::" not in raw:
            raise ValueError(f"link string without '::': {raw!r}")
        wiki, title = raw.split("::", 1)
    elif isinstance(raw, dict) and isinstance(raw.get("wiki"), str) and isinstance(raw.get("title"), str):
        wiki, title = raw["wiki"], raw["title"]
    else:
        raise ValueError(f"bad link: {raw!r}")
    if wiki == own_wiki:
        return None
    title, frag = split_fragment(title)
    if not wiki or not title.strip():
        raise ValueError(f"empty link target: {raw!r}")
    return InterWikiLink(wiki, title, frag)


def page_from_json(obj) -> PageRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    wiki, title = obj.get("wiki"), obj.get("title")
    if not isinstance(wiki, str) or not isinstance(title, str) or not title:
        raise ValueError("missing wiki/title")
    validate_wiki_id(wiki)
    redirect = obj.get("redirect_to")
    if redirect is not None and (not isinstance(redirect, str) or not redirect):
        raise ValueError("redirect_to must be a non-empty string or null")
    cats = obj.get("categories", [])
    if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
        raise ValueError("categories must be a list of strings")
    sections = []
    for s in obj.get("sections", []):
        if not isinstance(s, dict) or not isinstance(s.get("title", ""), str):
            raise ValueError("bad section")
        links = tuple(l for l in (_parse_link(r, wiki) for r in s.get("links", [])) if l is not None)
        sections.append(Section(s.get("title", ""), links))
    label = obj.get("label") or title
    first = obj.get("first_sentence") or ""
    if not isinstance(label, str) or not isinstance(first, str):
        raise ValueError("label/first_sentence must be strings")
    return PageRecord(wiki, title, label, redirect, tuple(cats), first, tuple(sections))


def parse_page_dump(path: str | Path, strict: bool = False,
                    report: ParseReport | None = None) -> list[PageRecord]:
    """Read a JSON-Lines page dump.

    Intra-wiki links are dropped and link fragments are split off at the first
    '#'. Malformed lines are skipped and counted in ``report`` unless ``strict``.
    """
    report = report if report is not None else ParseReport()
    report.path = str(path)
    pages: list[PageRecord] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            report.lines += 1
            if not line.strip():
                continue
            try:
                page = page_from_json(json.loads(line))
            except ValueError as exc:  # JSONDecodeError is a ValueError
                report.reject(lineno, str(exc), strict)
                continue
            if (page.wiki, page.title) in seen:
                report.reject(lineno, f"duplicate title {page.title!r}", strict)
                continue
            seen.add((page.wiki, page.title))
            pages.append(page)
    report.records = len(pages)
    return pages


def write_page_dump(pages: Iterable[PageRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pages:
            fh.write(json.dumps(p.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def load_pages(directory: str | Path, strict: bool = False,
               reports: list[ParseReport] | None = None) -> list[PageRecord]:
    """All page records from every ``*.jsonl`` file in ``directory``, sorted by (wiki, title)."""
    pages = []
    for path in sorted(Path(directory).glob("*.jsonl")):
        rep = ParseReport()
        pages.extend(parse_page_dump(path, strict, rep))
        if reports is not None:
            reports.append(rep)
    pages.sort(key=lambda p: (p.wiki, p.title))
    return pages


# --------------------------------------------------------------------------
# N-Triples and the knowledge graph index


class Literal(NamedTuple):
    value: str
    lang: str | None = None
    datatype: str | None = None



_NT_IRI = r"<([^<>\"{}|^`\\\s]*)>"
_NT_BNODE = r"(_:[A-Za-z0-9_.\-]+)"
_NT_LITERAL = r'"((?:[^"\\]|\\.)*)"(?:@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)|\^\^<([^<>\s]*)>)?'
_NT_LINE = re.compile(
    rf"^\s*(?:{_NT_IRI}|{_NT_BNODE})\s*{_NT_IRI}\s*(?:{_NT_IRI}|{_NT_BNODE}|{_NT_LITERAL})\s*\.\s*(?:#.*)?$"
)
_NT_ESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_SIMPLE_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape(text: str) -> str:
    if "\\" not in text:
        return text

    def repl(m: re.Match) -> str:
        if m.group(1) or m.group(2):
            return chr(int(m.group(1) or m.group(2), 16))
        ch = m.group(3)
        if ch not in _SIMPLE_ESCAPES:
            raise ValueError(f"bad escape \\{ch}")
        return _SIMPLE_ESCAPES[ch]

    return _NT_ESCAPE.sub(repl, text)


def _escape_literal(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
            .replace("\r", "\\r").replace("\t", "\\t"))


def parse_ntriples_line(line: str):
    """Parse one statement; returns None for blank/comment lines, raises ValueError if malformed."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    m = _NT_LINE.match(line)
    if m is None:
        raise ValueError("not an N-Triples statement")
    # IRIs repeat across many triples; interning keeps large farms in memory
    s = sys.intern(m.group(1) if m.group(1) is not None else m.group(2))
    p = sys.intern(m.group(3))
    if m.group(4) is not None:
        o = sys.intern(m.group(4))
    elif m.group(5) is not None:
        o = m.group(5)
    else:
        o = Literal(_unescape(m.group(6)), m.group(7), m.group(8))
    return s, p, o


def format_term(term) -> str:
    if isinstance(term, Literal):
        out = f'"{_escape_literal(term.value)}"'
        if term.lang:
            out += "@" + term.lang
        elif term.datatype:
            out += f"^^<{term.datatype}>"
        return out
    if term.startswith("_:"):
        return term
    return f"<{term}>"


def write_ntriples(triples: Iterable[tuple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s, p, o in triples:
            fh.write(f"{format_term(s)} {format_term(p)} {format_term(o)} .\n")


class KnowledgeGraph:
    """Triples of one wiki plus the lookup indexes used by the pipeline.

    Indexes: ``labels`` (entity -> first rdfs:label), ``class_instances``
    (class -> set of typed subjects), ``types`` (subject -> classes),
    ``property_counts`` (predicate -> number of statements),
    ``statements`` (subject -> list of (predicate, object)) and ``presence``
    (every IRI used as subject or object). Triples are stored once, in
    ``statements``; duplicates are dropped.
    """

    def __init__(self, wiki: str, triples: Iterable[tuple] = ()):
        self.wiki = validate_wiki_id(wiki)
        labels: dict[str, str] = {}
        class_instances: dict[str, set[str]] = defaultdict(set)
        types: dict[str, set[str]] = defaultdict(set)
        counts: dict[str, int] = defaultdict(int)
        statements: dict[str, list] = defaultdict(list)
        presence: set[str] = set()
        n = 0
        for s, p, o in dict.fromkeys(triples):
            n += 1
            presence.add(s)
            if not isinstance(o, Literal):
                presence.add(o)
            if p == RDF_TYPE:
                class_instances[o].add(s)
                types[s].add(o)
            elif p == RDFS_LABEL:
                if isinstance(o, Literal) and s not in labels:
                    labels[s] = o.value
            counts[p] += 1
            statements[s].append((p, o))
        self._size = n
        self.labels = labels
        self.class_instances = dict(class_instances)
        self.types = dict(types)
        self.property_counts = dict(counts)
        self.statements = dict(statements)
        self.presence = presence

    @property
    def triples(self) -> list[tuple]:
        """All triples, grouped by subject in first-seen order."""
        return [(s, p, o) for s, pos in self.statements.items() for p, o in pos]

    def __len__(self) -> int:
        return self._size

    def __repr__(self) -> str:
        return f"KnowledgeGraph({self.wiki!r}, {len(self)} triples)"

    @property
    def entities(self) -> set[str]:
        return self.presence

    def label(self, iri: str) -> str:
        """Label of ``iri``; falls back to the IRI local name."""
        lab = self.labels.get(iri)
        return lab if lab is not None else title_of(iri)

    def is_class(self, iri: str) -> bool:
        return iri in self.class_instances or bool(self.types.get(iri, set()) & _CLASS_TYPES)

    def is_property(self, iri: str) -> bool:
        return ((iri in self.property_counts and iri not in (RDF_TYPE, RDFS_LABEL))
                or bool(self.types.get(iri, set()) & _PROPERTY_TYPES))

    def kind(self, iri: str) -> str:
        if self.is_class(iri):
            return CLASS
        if self.is_property(iri):
            return PROPERTY
        return INSTANCE

    def resources(self) -> set[str]:
        """Every non-vocabulary IRI mentioned anywhere in the graph."""
        out = set(self.presence)
        out.update(p for p in self.property_counts if p not in (RDF_TYPE, RDFS_LABEL))
        return {r for r in out if not r.startswith("_:") and not is_vocabulary(r)}


_VOCAB_PREFIXES = (
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "http://www.w3.org/2000/01/rdf-schema#",
    "http://www.w3.org/2002/07/owl#",
    "http://www.w3.org/2001/XMLSchema#",
)


def is_vocabulary(iri: str) -> bool:
    return iri.startswith(_VOCAB_PREFIXES)


def parse_ntriples(path: str | Path, strict: bool = False, report: ParseReport | None = None,
                   wiki: str | None = None) -> KnowledgeGraph:
    """Load one wiki's N-Triples file; the wiki id defaults to the file name stem."""
    path = Path(path)
    report = report if report is not None else ParseReport()
    report.path = str(path)
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            report.lines += 1
            try:
                t = parse_ntriples_line(line)
            except ValueError as exc:
                report.reject(lineno, str(exc), strict)
                continue
            if t is not None:
                triples.append(t)
    report.records = len(triples)
    stem = path.name[: -len(".nt")] if path.name.endswith(".nt") else path.stem
    return KnowledgeGraph(wiki or stem, triples)


def _load_one(args):
    path, strict = args
    rep = ParseReport()
    return parse_ntriples(path, strict, rep), rep


def load_kgs(directory: str | Path, strict: bool = False, threads: int = 1,
             reports: list[ParseReport] | None = None) -> dict[str, KnowledgeGraph]:
    """Parse every ``*.nt`` file in ``directory`` into a dict keyed by wiki id."""
    paths = sorted(Path(directory).glob("*.nt"))
    jobs = [(p, strict) for p in paths]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_load_one, jobs, chunksize=16))
    else:
        results = [_load_one(j) for j in jobs]
    if reports is not None:
        reports.extend(rep for _, rep in results)
    return {kg.wiki: kg for kg, _ in results}


def label_index(kgs: Mapping[str, KnowledgeGraph]) -> dict[str, str]:
    out: dict[str, str] = {}
    for kg in kgs.values():
        out.update(kg.labels)
    return out


def label_for(iri: str, labels: Mapping[str, str]) -> str:
    lab = labels.get(iri)
    return lab if lab is not None else title_of(iri)
