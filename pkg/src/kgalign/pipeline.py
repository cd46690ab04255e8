"""End-to-end orchestration: extract -> refine -> closure -> schema -> split."""
from __future__ import annotations

import json
import logging
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import closure, extract, refine, schema, split
from .evaluation import is_trivial, profile
from .model import Alignment, label_index, load_kgs, load_pages, read_alignment, write_alignment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_STAGE_FAILURE = 4
EXIT_IO = 5

STAGES = ("extract", "refine", "closure", "schema", "split")


class MissingInputError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineManifest:
    pages: Path
    kgs: Path
    out: Path
    stages: dict[str, bool] = field(default_factory=lambda: {s: True for s in STAGES})
    seed: int = 0
    default_marker: str = extract.DEFAULT_MARKER
    schema_metric: str = "min"
    schema_threshold: float = schema.DEFAULT_THRESHOLD
    split_fraction: float = split.TEST_FRACTION
    split_variants: tuple[str, ...] = ("shared", "exclusive")
    strict: bool = False
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict[str, Any], base: Path | None = None) -> PipelineManifest:
        base = base or Path(".")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        for key in ("pages", "kgs", "out"):
            if key not in d:
                raise ValueError(f"manifest lacks {key!r}")
        stages = {s: True for s in STAGES}
        stages.update(d.get("stages", {}))
        m = cls(
            pages=base / d["pages"], kgs=base / d["kgs"], out=base / d["out"], stages=stages,
            seed=int(d.get("seed", 0)), default_marker=d.get("default_marker", extract.DEFAULT_MARKER),
            schema_metric=d.get("schema_metric", "min"),
            schema_threshold=float(d.get("schema_threshold", schema.DEFAULT_THRESHOLD)),
            split_fraction=float(d.get("split_fraction", split.TEST_FRACTION)),
            split_variants=tuple(d.get("split_variants", ("shared", "exclusive"))),
            strict=bool(d.get("strict", False)), threads=int(d.get("threads", 1)),
        )
        m.validate()
        return m

    @classmethod
    def load(cls, path: str | Path) -> PipelineManifest:
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), path.parent)

    def validate(self) -> None:
        if set(self.stages) - set(STAGES):
            raise ValueError(f"unknown stages: {sorted(set(self.stages) - set(STAGES))}")
        if self.schema_metric not in schema.METRICS:
            raise ValueError(f"schema_metric must be one of {schema.METRICS}")
        if not 0.0 <= self.schema_threshold <= 1.0:
            raise ValueError("schema_threshold outside [0, 1]")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")
        if len(self.default_marker) < extract.MIN_MARKER_LEN:
            raise ValueError("default_marker too short")
        for v in self.split_variants:
            if v not in ("shared", "exclusive"):
                raise ValueError(f"unknown split variant {v!r}")


@dataclass
class PipelineResult:
    status: int
    reports: dict[str, Any]


def peak_rss_mb() -> float | None:
    """Peak resident set size of this process in MB, where the platform reports it."""
    try:
        import resource
    except ImportError:
        return None
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # Linux reports kilobytes, macOS bytes
    return peak / (1024 * 1024) if sys.platform == "darwin" else peak / 1024


def write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_markers(choices: list[extract.MarkerChoice], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in choices:
            fh.write(f"{c.wiki}\t{c.marker}\t{c.quality!r}\t{c.seed_count}\n")


def write_overlaps(tables: list[schema.OverlapTable], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("source\ttarget\tshared\tn1\tn2\tdice\tmin\n")
        for t in tables:
            for r in t.rows():
                fh.write("\t".join(map(str, r[:5])) + f"\t{r[5]!r}\t{r[6]!r}\n")


def _step_row(name: str, a: Alignment, labels) -> dict:
    trivial = sum(1 for c in a if is_trivial(c.source.iri, c.target.iri, labels))
    return {"step": name, "links": len(a), "trivial": trivial, "non_trivial": len(a) - trivial,
            "kg_pairs": len(a.kg_pairs())}


class _Run:
    def __init__(self, m: PipelineManifest):
        self.m = m
        self.out = m.out
        self.reports: dict[str, Any] = {}
        self.steps: list[dict] = []
        self._pages = None
        self._kgs = None

    def path(self, name: str) -> Path:
        return self.out / name

    @property
    def pages(self):
        if self._pages is None:
            reports = []
            self._pages = load_pages(self.m.pages, self.m.strict, reports)
            self.reports["parse_pages"] = {"files": len(reports), "records": sum(r.records for r in reports),
                                           "skipped": sum(r.skipped for r in reports)}
        return self._pages

    @property
    def kgs(self):
        if self._kgs is None:
            reports = []
            self._kgs = load_kgs(self.m.kgs, self.m.strict, self.m.threads, reports)
            self.reports["parse_kgs"] = {"files": len(reports), "triples": sum(r.records for r in reports),
                                         "skipped": sum(r.skipped for r in reports)}
        return self._kgs

    def read(self, name: str) -> Alignment:
        p = self.path(name)
        if not p.exists():
            raise MissingInputError(f"{p} not found (enable the stage that produces it)")
        return read_alignment(p)

    def stage(self, name: str, fn) -> None:
        if not self.m.stages.get(name, True):
            logger.info("stage %s disabled", name)
            return
        t0 = time.perf_counter()
        try:
            fn()
        except (MissingInputError, OSError):
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        logger.info("stage %s done in %.2fs, peak RSS %.0f MB", name, time.perf_counter() - t0, peak_rss_mb() or 0)

    # -- stages

    def do_extract(self) -> None:
        markers: list[extract.MarkerChoice] = []
        cand = extract.extract_candidate_alignment(self.pages, self.m.default_marker, markers)
        write_alignment(cand, self.path("candidates.tsv"))
        write_markers(markers, self.path("markers.tsv"))
        self.reports["extract"] = {"candidates": len(cand), "wikis": len(markers),
                                   "fallback_markers": sum(1 for c in markers if c.fallback)}
        self.steps.append(_step_row("1 extracting candidate links", cand, self.labels))

    def do_refine(self) -> None:
        cand = self.read("candidates.tsv")
        rep: dict = {}
        counts: Counter = Counter()
        pages = self.pages
        a = refine.resolve_redirects(cand, pages, counts)
        a = refine.normalize_directions(a)
        a = refine.enforce_injectivity(a)
        self.steps.append(_step_row("2 normalization and injectivity", a, self.labels))
        a = refine.drop_anchor_and_dead_links(a, self.kgs, pages, counts)
        self.steps.append(_step_row("3 disambiguation and page removal", a, self.labels))
        rep.update({"candidates": len(cand), "refined": len(a), **{k: counts[k] for k in sorted(counts)}})
        write_alignment(a, self.path("refined.tsv"))
        self.reports["refine"] = rep
        self._pages = None  # later stages only need the KGs

    def do_closure(self) -> None:
        refined = self.read("refined.tsv")
        counts: Counter = Counter()
        repaired = closure.repair_identity_sets(refined, self.labels, counts)
        self.steps.append(_step_row("4 transitive closure removal", repaired, self.labels))
        transitive = closure.add_transitive_links(repaired, counts)
        self.steps.append(_step_row("5 transitive closure addition", repaired.union(transitive), self.labels))
        known = set(self.kgs)
        direct = closure.drop_exterior_links(repaired, known)
        transitive = closure.drop_exterior_links(transitive, known)
        final = direct.union(transitive)
        self.steps.append(_step_row("6 removal of exterior links", final, self.labels))
        write_alignment(direct, self.path("direct.tsv"))
        write_alignment(transitive, self.path("transitive.tsv"))
        rep = {"input": len(refined), "repair_removed": counts["repair_removed"],
               "transitive_added": counts["transitive_added"], "transitive_skipped": counts["transitive_skipped"],
               "direct": len(direct), "transitive": len(transitive)}
        rep.update(closure.cluster_statistics(final))
        self.reports["closure"] = rep
        self.reports["profile"] = profile(final, self.labels).as_dict()
        del self._labels  # only repair and the step rows read labels

    def do_schema(self) -> None:
        instances = self.read("direct.tsv").union(self.read("transitive.tsv"))
        kgs = self.kgs
        ctab = schema.class_overlap(instances, kgs)
        ptab = schema.property_overlap(instances, kgs)
        classes = schema._emit(ctab, self.m.schema_metric, self.m.schema_threshold)
        props = schema._emit(ptab, self.m.schema_metric, self.m.schema_threshold)
        write_alignment(classes, self.path("classes.tsv"))
        write_alignment(props, self.path("properties.tsv"))
        write_overlaps(ctab, self.path("class_overlap.tsv"))
        write_overlaps(ptab, self.path("property_overlap.tsv"))
        self.reports["schema"] = {"classes": len(classes), "properties": len(props),
                                  "metric": self.m.schema_metric, "threshold": self.m.schema_threshold,
                                  "class_overlap_rows": sum(len(t.shared) for t in ctab),
                                  "property_overlap_rows": sum(len(t.shared) for t in ptab)}

    def do_split(self) -> None:
        gold = self.read("direct.tsv").union(self.read("transitive.tsv"))
        rep = {}
        for variant in self.m.split_variants:
            fn = split.split_shared_kg if variant == "shared" else split.split_exclusive_kg
            bundle = fn(gold, self.m.seed, self.m.split_fraction)
            write_alignment(bundle.train, self.path(f"train_{variant}.tsv"))
            write_alignment(bundle.test, self.path(f"test_{variant}.tsv"))
            r = bundle.report()
            r["closure_leakage"] = split.closure_leakage(bundle)
            rep[variant] = r
        sizes = {w: len(kg) for w, kg in self.kgs.items()}
        subsets = split.select_subsets(sizes, gold, min(40000, len(sizes)))
        rep["subsets"] = {"gold_set": len(subsets["gold_set"]), "top_n": len(subsets["top_n"])}
        with open(self.path("gold_kgs.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(w + "\n" for w in subsets["gold_set"])
        self.reports["split"] = rep

    @property
    def labels(self):
        if not hasattr(self, "_labels"):
            self._labels = label_index(self.kgs)
        return self._labels


def run_pipeline(manifest: PipelineManifest) -> PipelineResult:
    """Run the enabled stages in fixed order; outputs and reports land in ``manifest.out``."""
    run = _Run(manifest)
    try:
        for p in (manifest.pages, manifest.kgs):
            if not Path(p).is_dir():
                raise MissingInputError(f"input directory {p} not found")
        manifest.out.mkdir(parents=True, exist_ok=True)
        run.stage("extract", run.do_extract)
        run.stage("refine", run.do_refine)
        run.stage("closure", run.do_closure)
        run.stage("schema", run.do_schema)
        run.stage("split", run.do_split)
        run.reports["steps"] = run.steps
        write_json(run.reports, manifest.out / "pipeline_report.json")
    except MissingInputError as exc:
        logger.error("%s", exc)
        return PipelineResult(EXIT_MISSING_INPUT, run.reports)
    except StageError as exc:
        logger.error("%s", exc)
        return PipelineResult(EXIT_STAGE_FAILURE, run.reports)
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return PipelineResult(EXIT_IO, run.reports)
    return PipelineResult(EXIT_OK, run.reports)
