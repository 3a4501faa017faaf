import csv
import json

import pytest

from citebalance import cli, pipeline
from citebalance.corpus import parse_corpus

FAST = ["--replicates-bootstrap", "20", "--replicates-null", "20", "--regression-replicates", "5"]


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--out", str(d), "--n-papers", "400", "--n-authors", "200", "--seed", "2",
                     "--refs-mean", "3"]) == 0
    return d


def test_synth_writes_parseable_corpus(synth_dir):
    corpus = parse_corpus(synth_dir / "synthetic.jsonl")
    assert len(corpus) == 400 and corpus.rejections == []
    truth = json.loads((synth_dir / "synthetic.truth.json").read_text())
    assert set(truth["categories"]) == set(corpus.records)
    cfg = json.loads((synth_dir / "synthetic.config.json").read_text())
    assert cfg["n_papers"] == 400 and cfg["seed"] == 2


def test_synth_repeat_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(["synth", "--out", str(tmp_path / name), "--n-papers", "100", "--seed", "7"], capsys)[0] == 0
    for f in ("synthetic.jsonl", "synthetic.truth.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_synth_infeasible(tmp_path, capsys):
    code, _, err = run(["synth", "--out", str(tmp_path), "--n-papers", "0"], capsys)
    assert code == 2
    payload = json.loads(err)
    assert payload["stage"] == "synth" and "infeasible" in payload["error"]


def test_missing_gender_table(synth_dir, tmp_path, capsys):
    code, _, err = run(["analyze", "--corpus", str(synth_dir / "synthetic.jsonl"), "--out", str(tmp_path),
                        "--gender-table", str(tmp_path / "absent.csv")] + FAST, capsys)
    assert code == 2 and json.loads(err)["stage"] == "authors"


def test_missing_corpus(tmp_path, capsys):
    code, _, err = run(["ingest", "--corpus", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(err)["stage"] == "corpus"


def test_bad_config(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(["analyze", "--config", str(path)], capsys)
    assert code == 2 and json.loads(err)["stage"] == "config"


def test_flags_override_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 1, "replicates_null": 5, "synth": {"n_papers": 10}}))
    args = cli.build_parser().parse_args(["analyze", "--config", str(path), "--seed", "9",
                                          "--self-cite-def", "broad-citing"])
    cfg, synth_cfg = cli.load_config(args)
    assert cfg.seed == 9 and cfg.replicates_null == 5 and cfg.self_cite_def == "broad_citing"
    assert synth_cfg == {"n_papers": 10}


def test_options_hash_ignores_output_location():
    a = pipeline.RunConfig(corpus="x", out="o1", workers=1)
    b = pipeline.RunConfig(corpus="x", out="o2", workers=4)
    c = pipeline.RunConfig(corpus="x", seed=1)
    assert a.options_hash("d") == b.options_hash("d") != c.options_hash("d")
    assert a.options_hash("d") != a.options_hash("e")


def test_stage_subcommands(synth_dir, tmp_path, capsys):
    corpus = ["--corpus", str(synth_dir / "synthetic.jsonl"), "--out", str(tmp_path)]
    for cmd in ("ingest", "disambiguate", "gender", "fit", "network"):
        assert run([cmd] + corpus, capsys)[0] == 0
    assert run(["regress"] + corpus + FAST, capsys)[0] == 0
    for name in ("corpus.jsonl", "ingest.json", "authors.csv", "gender.csv", "categories.csv", "model.json",
                 "probabilities.csv", "edges.csv", "neighborhoods.csv", "regression.csv"):
        assert (tmp_path / name).exists(), name
    cats = list(csv.DictReader(open(tmp_path / "categories.csv")))
    assert {r["category"] for r in cats} <= {"MM", "WM", "MW", "WW", "UNKNOWN"}


def test_analyze_outputs_carry_run_hash(synth_dir, tmp_path, capsys):
    out = tmp_path / "run"
    code, _, _ = run(["analyze", "--corpus", str(synth_dir / "synthetic.jsonl"), "--out", str(out)] + FAST, capsys)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    h = manifest["run_hash"]
    assert len(h) == 16
    for path in out.iterdir():
        if path.suffix == ".csv":
            rows = list(csv.DictReader(open(path)))
            col = "run_hash" if "run_hash" in rows[0] else "options_hash"
            assert {r[col] for r in rows} == {h}, path.name
        else:
            assert json.loads(path.read_text())["run_hash"] == h, path.name
    results = list(csv.DictReader(open(out / "results.csv")))
    assert {r["expectation"] for r in results} == {"characteristics", "random_draws"}
    assert manifest["B"] == 20 and manifest["R"] == 20
    # a changed option changes the hash
    code, _, _ = run(["analyze", "--corpus", str(synth_dir / "synthetic.jsonl"), "--out", str(tmp_path / "r2"),
                      "--seed", "3"] + FAST, capsys)
    assert json.loads((tmp_path / "r2" / "manifest.json").read_text())["run_hash"] != h


def test_analyze_is_deterministic(synth_dir, tmp_path, capsys):
    for name in ("a", "b"):
        argv = ["analyze", "--corpus", str(synth_dir / "synthetic.jsonl"), "--out", str(tmp_path / name)] + FAST
        assert run(argv, capsys)[0] == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_analyze_variants(synth_dir, tmp_path, capsys):
    argv = ["analyze", "--corpus", str(synth_dir / "synthetic.jsonl"), "--out", str(tmp_path),
            "--impute-missing", "--weighting", "both", "--self-cite-def", "surname", "--subfield"] + FAST
    assert run(argv, capsys)[0] == 0
    stats = {r["statistic"] for r in csv.DictReader(open(tmp_path / "results.csv"))}
    assert "delta_unweighted" in stats and "delta_percent" in stats
    models = {r["model"] for r in csv.DictReader(open(tmp_path / "regression.csv"))}
    assert "quantile_unweighted" in models


def test_diversity_statement_counts(capsys):
    code, out, _ = run(["diversity-statement", "--counts", "24,9,8,30"], capsys)
    assert code == 0
    assert "34% (n = 24) were MM, 13% (n = 9) were WM, 11% (n = 8) were MW, and 42% (n = 30) were WW" in out
    code, out, _ = run(["diversity-statement", "--counts", "4,0,0,0"], capsys)
    assert "100% (n = 4) were MM." in out and "WM" not in out
    code, out, _ = run(["diversity-statement", "--counts", "1,0,0,1", "--unknown", "1"], capsys)
    assert "50% (n = 1) were MM and 50% (n = 1) were WW" in out and "1 further cited work" in out
    code, _, err = run(["diversity-statement", "--counts", "0,0,0,0"], capsys)
    assert code == 2 and json.loads(err)["stage"] == "diversity-statement"


def test_diversity_statement_from_corpus(synth_dir, tmp_path, capsys):
    corpus = parse_corpus(synth_dir / "synthetic.jsonl")
    dois = sorted(corpus.records)[:12]
    code, out, _ = run(["diversity-statement", *dois, "https://doi.org/10.9/absent", "--corpus",
                        str(synth_dir / "synthetic.jsonl"), "--out", str(tmp_path), "--write"], capsys)
    assert code == 0
    stmt = json.loads((tmp_path / "diversity_statement.json").read_text())
    assert stmt["total"] + stmt["unknown"] == 12
    assert stmt["not_in_corpus"] == ["10.9/absent"]
    assert (tmp_path / "diversity_statement.txt").read_text().strip() == out.strip()


def test_round_half_up():
    assert pipeline.round_half_up(12.5) == 13 and pipeline.round_half_up(11.49) == 11
    st = pipeline.diversity_statement([1, 1, 0, 0])
    assert st["percent"] == {"MM": 50, "WM": 50, "MW": 0, "WW": 0}
    st = pipeline.diversity_statement([1, 7, 0, 0])
    assert st["percent"]["MM"] == 13  # 12.5 rounds up
