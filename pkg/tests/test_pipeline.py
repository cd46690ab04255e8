import json

import pytest

from kgalign import pipeline
from kgalign.model import read_alignment
from kgalign.pipeline import (EXIT_IO, EXIT_MISSING_INPUT, EXIT_OK, EXIT_STAGE_FAILURE, PipelineManifest,
                              run_pipeline)
from kgalign.synth import FarmConfig, NoiseRates, generate_synthetic_farm

SMALL = dict(n_wikis=8, n_entities=150, seed=5)


def run_on(farm, out, **kw):
    m = PipelineManifest(pages=farm.pages_dir, kgs=farm.kgs_dir, out=out, **kw)
    return run_pipeline(m)


def final_alignment(out):
    return read_alignment(out / "direct.tsv").union(read_alignment(out / "transitive.tsv"))


@pytest.fixture(scope="module")
def clean_farm(tmp_path_factory):
    return generate_synthetic_farm(FarmConfig(**SMALL), tmp_path_factory.mktemp("clean"))


def test_empty_farm(tmp_path):
    (tmp_path / "pages").mkdir()
    (tmp_path / "kgs").mkdir()
    m = PipelineManifest(pages=tmp_path / "pages", kgs=tmp_path / "kgs", out=tmp_path / "out")
    res = run_pipeline(m)
    assert res.status == EXIT_OK
    for name in ("candidates.tsv", "refined.tsv", "direct.tsv", "transitive.tsv", "classes.tsv",
                 "properties.tsv", "train_shared.tsv", "test_exclusive.tsv"):
        assert (tmp_path / "out" / name).read_text() == ""


def test_stage_counts_follow_expected_shape(clean_farm, tmp_path):
    res = run_on(clean_farm, tmp_path / "out")
    assert res.status == EXIT_OK
    links = [row["links"] for row in res.reports["steps"]]
    assert len(links) == 6
    assert links[0] >= links[1] >= links[2] >= links[3]
    assert links[4] > links[3]
    assert links[5] <= links[4]


def test_zero_noise_recovers_truth(clean_farm, tmp_path):
    run_on(clean_farm, tmp_path / "out")
    o = clean_farm.score(final_alignment(tmp_path / "out")).overall
    assert (o.precision, o.recall) == (1.0, 1.0)


def test_rerun_is_byte_identical(clean_farm, tmp_path):
    run_on(clean_farm, tmp_path / "a")
    run_on(clean_farm, tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_fan_out_noise_costs_recall_only(tmp_path):
    farm = generate_synthetic_farm(FarmConfig(**SMALL, noise=NoiseRates(fan_out=0.1)), tmp_path / "farm")
    assert farm.stats["noise_fan_out"] > 0
    run_on(farm, tmp_path / "out")
    o = farm.score(final_alignment(tmp_path / "out")).overall
    assert o.precision == 1.0 and o.recall < 1.0


def test_truth_file_reproducible(tmp_path):
    cfg = dict(SMALL, noise=NoiseRates.mixed(0.05))
    a = generate_synthetic_farm(FarmConfig(**cfg), tmp_path / "a")
    b = generate_synthetic_farm(FarmConfig(**cfg), tmp_path / "b")
    assert a.truth_path.read_bytes() == b.truth_path.read_bytes()
    for sub in ("pages", "kgs"):
        for p in sorted((tmp_path / "a" / sub).iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / sub / p.name).read_bytes()


@pytest.mark.parametrize("bad", [dict(noise=NoiseRates(anchor=1.5)), dict(share=-0.1), dict(n_wikis=1),
                                 dict(n_entities=0)])
def test_invalid_farm_config(bad, tmp_path):
    with pytest.raises(ValueError):
        generate_synthetic_farm(FarmConfig(**bad), tmp_path)


def test_missing_input_exit_code(tmp_path):
    m = PipelineManifest(pages=tmp_path / "nope", kgs=tmp_path / "nope", out=tmp_path / "out")
    assert run_pipeline(m).status == EXIT_MISSING_INPUT


def test_disabled_producer_is_missing_input(clean_farm, tmp_path):
    stages = {"extract": False}
    assert run_on(clean_farm, tmp_path / "out", stages=stages).status == EXIT_MISSING_INPUT


def test_stage_failure_exit_code(clean_farm, tmp_path, monkeypatch):
    def broken(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(pipeline.closure, "repair_identity_sets", broken)
    assert run_on(clean_farm, tmp_path / "out").status == EXIT_STAGE_FAILURE


def test_disk_error_exit_code(clean_farm, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_on(clean_farm, blocker / "out").status == EXIT_IO


def test_manifest_loading(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"pages": "p", "kgs": "k", "out": "o", "seed": 3,
                                                 "stages": {"split": False}}))
    m = PipelineManifest.load(tmp_path / "m.json")
    assert m.pages == tmp_path / "p" and m.seed == 3 and m.stages["split"] is False and m.stages["extract"]


@pytest.mark.parametrize("bad", [{"schema_threshold": 2}, {"split_fraction": 0}, {"schema_metric": "x"},
                                 {"stages": {"bogus": True}}, {"surprise": 1}])
def test_manifest_validation(bad):
    with pytest.raises(ValueError):
        PipelineManifest.from_dict({"pages": "p", "kgs": "k", "out": "o", **bad})


def test_reports_are_sorted_json(clean_farm, tmp_path):
    run_on(clean_farm, tmp_path / "out")
    text = (tmp_path / "out" / "pipeline_report.json").read_text()
    data = json.loads(text)
    assert text == json.dumps(data, indent=2, sort_keys=True) + "\n"
    assert data["schema"]["classes"] > 0 and data["schema"]["properties"] > 0
    assert data["split"]["shared"]["closure_leakage"] == 0
