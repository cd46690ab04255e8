"""Command-line entry point; each subcommand wraps one library stage."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import closure, extract, refine, schema, split
from .evaluation import evaluate, profile
from .model import (FormatError, label_index, load_kgs, load_pages, read_alignment, read_alignments,
                    write_alignment)
from .multimatch import get_matcher, kind_index, match_farm
from .pipeline import (EXIT_IO, EXIT_MISSING_INPUT, EXIT_OK, EXIT_STAGE_FAILURE, EXIT_USAGE, PipelineManifest,
                       run_pipeline, write_json, write_markers)
from .synth import FarmConfig, NoiseRates, generate_synthetic_farm

logger = logging.getLogger("kgalign")


def _kgs(args, path):
    return load_kgs(path, args.strict, args.threads)


def cmd_extract(args) -> int:
    pages = load_pages(args.pages, args.strict)
    markers: list[extract.MarkerChoice] = []
    cand = extract.extract_candidate_alignment(pages, args.default_marker, markers)
    write_alignment(cand, args.out)
    write_markers(markers, Path(args.markers) if args.markers else Path(args.out).with_suffix(".markers.tsv"))
    logger.info("%d candidate links from %d wikis", len(cand), len(markers))
    return EXIT_OK


def cmd_refine(args) -> int:
    report: dict = {}
    out = refine.refine(read_alignment(args.inp), load_pages(args.pages, args.strict), _kgs(args, args.kgs), report)
    write_alignment(out, args.out)
    if args.report:
        write_json(report, Path(args.report))
    return EXIT_OK


def cmd_closure(args) -> int:
    kgs = _kgs(args, args.labels)
    labels = label_index(kgs)
    known = list(kgs)
    if args.known_wikis:
        known = [ln.strip() for ln in Path(args.known_wikis).read_text(encoding="utf-8").splitlines() if ln.strip()]
    report: dict = {}
    direct, transitive = closure.closure_stage(read_alignment(args.inp), labels, known, report)
    write_alignment(direct, args.out_direct)
    write_alignment(transitive, args.out_transitive)
    if args.report:
        write_json(report, Path(args.report))
    return EXIT_OK


def cmd_schema(args) -> int:
    instances = read_alignments(args.instances)
    kgs = _kgs(args, args.kgs)
    ctab = schema.class_overlap(instances, kgs)
    ptab = schema.property_overlap(instances, kgs)
    write_alignment(schema._emit(ctab, args.metric, args.threshold), args.out_classes)
    write_alignment(schema._emit(ptab, args.metric, args.threshold), args.out_properties)
    if args.report:
        write_json({"classes": schema.overlap_report(ctab), "properties": schema.overlap_report(ptab)},
                   Path(args.report))
    return EXIT_OK


def cmd_split(args) -> int:
    gold = read_alignments(args.gold)
    fn = split.split_shared_kg if args.variant == "shared" else split.split_exclusive_kg
    bundle = fn(gold, args.seed, args.fraction)
    write_alignment(bundle.train, args.out_train)
    write_alignment(bundle.test, args.out_test)
    if args.report:
        rep = bundle.report()
        rep["closure_leakage"] = split.closure_leakage(bundle)
        write_json(rep, Path(args.report))
    return EXIT_OK


def cmd_match(args) -> int:
    kgs = _kgs(args, args.kgs)
    run, tree = match_farm(kgs, get_matcher(args.matcher))
    write_alignment(run.alignment, args.out)
    if args.report:
        write_json({"matcher": args.matcher, "kgs": len(kgs), "matcher_calls": run.matcher_calls,
                    "links": len(run.alignment), "steps": run.steps, "errors": run.errors,
                    "order": tree.leaves}, Path(args.report))
    return EXIT_STAGE_FAILURE if run.errors else EXIT_OK


def cmd_evaluate(args) -> int:
    kinds = kind_index(_kgs(args, args.kgs)) if args.kgs else None
    universe = None
    if args.universe:
        universe = {e.iri for e in read_alignments(args.universe).entities()}
    rep = evaluate(read_alignments(args.system), read_alignments(args.reference), kinds, universe)
    write_json(rep.as_dict(), Path(args.out))
    o = rep.overall
    print(f"precision={o.precision:.4f} recall={o.recall:.4f} f1={o.f1:.4f}")
    return EXIT_OK


def cmd_profile(args) -> int:
    labels = label_index(_kgs(args, args.labels)) if args.labels else None
    write_json(profile(read_alignments(args.inp), labels).as_dict(), Path(args.out))
    return EXIT_OK


def cmd_run(args) -> int:
    m = PipelineManifest.load(args.manifest)
    if args.seed is not None:
        m.seed = args.seed
    m.strict = m.strict or args.strict
    m.threads = args.threads or m.threads
    return run_pipeline(m).status


def cmd_synth(args) -> int:
    noise = NoiseRates.mixed(args.noise) if args.per_type_noise is None else NoiseRates(
        *([args.per_type_noise] * 5))
    cfg = FarmConfig(n_wikis=args.wikis, n_entities=args.entities, share=args.share,
                     seed=args.seed or 0, noise=noise)
    farm = generate_synthetic_farm(cfg, args.out)
    logger.info("farm written to %s: %d truth links", farm.root, len(farm.truth))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        g = argparse.ArgumentParser(add_help=False, argument_default=default)
        g.add_argument("--seed", type=int, help="PRNG seed")
        g.add_argument("--threads", type=int, help="worker processes for parsing")
        g.add_argument("--strict", action="store_true", help="fail on malformed input records")
        g.add_argument("-v", "--verbose", action="store_true")
        return g

    common = global_flags(argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="kgalign", parents=[common], argument_default=argparse.SUPPRESS,
                                description="Identity alignments across the KGs of a wiki farm.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("extract", cmd_extract, "candidate links from page dumps")
    sp.add_argument("--pages", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--default-marker", default=extract.DEFAULT_MARKER)
    sp.add_argument("--markers", default=None, help="marker report path (default: <out>.markers.tsv)")

    sp = add("refine", cmd_refine, "normalize, resolve redirects, enforce 1:1, drop bad pages")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--pages", required=True)
    sp.add_argument("--kgs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report", default=None)

    sp = add("closure", cmd_closure, "repair identity sets and add transitive links")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--labels", required=True, help="KG directory providing rdfs:label values")
    sp.add_argument("--out-direct", required=True)
    sp.add_argument("--out-transitive", required=True)
    sp.add_argument("--known-wikis", default=None,
                    help="file with one wiki id per line (default: the wikis of the --labels KGs)")
    sp.add_argument("--report", default=None)

    sp = add("schema", cmd_schema, "induce class and property matches")
    sp.add_argument("--instances", nargs="+", required=True)
    sp.add_argument("--kgs", required=True)
    sp.add_argument("--metric", choices=schema.METRICS, default="min")
    sp.add_argument("--threshold", type=float, default=schema.DEFAULT_THRESHOLD)
    sp.add_argument("--out-classes", required=True)
    sp.add_argument("--out-properties", required=True)
    sp.add_argument("--report", default=None)

    sp = add("split", cmd_split, "grouped train/test split")
    sp.add_argument("--gold", nargs="+", required=True)
    sp.add_argument("--variant", choices=("shared", "exclusive"), required=True)
    sp.add_argument("--fraction", type=float, default=split.TEST_FRACTION)
    sp.add_argument("--out-train", required=True)
    sp.add_argument("--out-test", required=True)
    sp.add_argument("--report", default=None)

    sp = add("match", cmd_match, "incremental multi-source matching")
    sp.add_argument("--kgs", required=True)
    sp.add_argument("--matcher", default="string", help="registered name or 'cmd:<executable ...>'")
    sp.add_argument("--out", required=True)
    sp.add_argument("--report", default=None)

    sp = add("evaluate", cmd_evaluate, "closure-aware precision/recall")
    sp.add_argument("--system", nargs="+", required=True)
    sp.add_argument("--reference", nargs="+", required=True)
    sp.add_argument("--kgs", default=None, help="KG directory for per-kind scores")
    sp.add_argument("--universe", nargs="+", default=None,
                    help="alignments whose entities bound the scored system pairs (default: the reference)")
    sp.add_argument("--out", required=True)

    sp = add("profile", cmd_profile, "alignment statistics")
    sp.add_argument("--in", dest="inp", nargs="+", required=True)
    sp.add_argument("--labels", default=None)
    sp.add_argument("--out", required=True)

    sp = add("run", cmd_run, "manifest-driven end-to-end pipeline")
    sp.add_argument("--manifest", required=True)

    sp = add("synth", cmd_synth, "generate a synthetic wiki farm")
    sp.add_argument("--out", required=True)
    sp.add_argument("--wikis", type=int, default=20)
    sp.add_argument("--entities", type=int, default=500)
    sp.add_argument("--share", type=float, default=0.3)
    sp.add_argument("--noise", type=float, default=0.0, help="total noise rate split over the five noise types")
    sp.add_argument("--per-type-noise", type=float, default=None, help="same rate for every noise type")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # global flags are suppressed in both parsers so either position works
    for key, default in (("seed", None), ("threads", 1), ("strict", False), ("verbose", False)):
        if not hasattr(args, key):
            setattr(args, key, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "split" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        logger.error("missing input: %s", exc)
        return EXIT_MISSING_INPUT
    except (FormatError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
