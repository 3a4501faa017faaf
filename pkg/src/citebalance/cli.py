"""Command-line entry point: ``citebalance <subcommand> [options]``.

Options come from a JSON ``--config`` file and are overridden by flags.
Each subcommand recomputes the stages it depends on. Failures print
``{"error": ..., "stage": ...}`` on stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _kernels, network, pipeline, synth
from .authors import CATEGORY_NAMES, seniority_counts
from .corpus import link_references, unresolved_counts, write_corpus, write_rejections
from .pipeline import RunConfig, StageError

logger = logging.getLogger("citebalance")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--corpus", help="corpus file (.jsonl or .csv)")
    p.add_argument("--format", dest="corpus_format", choices=("jsonl", "csv"))
    p.add_argument("--gender-table", help="CSV name,p_woman,count (default: bundled synthetic names)")
    p.add_argument("--nickname-table")
    p.add_argument("--cache", help="JSON-lines cache for the remote gender service")
    p.add_argument("--overrides", help="JSON manual gender overrides")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates-bootstrap", type=int)
    p.add_argument("--replicates-null", type=int)
    p.add_argument("--regression-replicates", type=int)
    p.add_argument("--self-cite-def", choices=("primary", "broad-citing", "broad-cited", "surname", "none"))
    p.add_argument("--impute-missing", action="store_true", default=None)
    p.add_argument("--subfield", action="store_true", default=None, help="add subfield to the expectation model")
    p.add_argument("--weighting", choices=("citations", "unweighted", "both"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--offline", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


_FLAG_KEYS = ("corpus", "corpus_format", "gender_table", "nickname_table", "cache", "overrides", "out", "seed",
              "replicates_bootstrap", "replicates_null", "regression_replicates", "self_cite_def",
              "impute_missing", "subfield", "weighting", "threshold", "offline", "workers")


def load_config(args) -> tuple[RunConfig, dict]:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise StageError("config", f"cannot read config: {exc}") from exc
    synth_cfg = dict(data.get("synth", {}))
    for key in _FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    try:
        return RunConfig.from_mapping(data), synth_cfg
    except (TypeError, ValueError) as exc:
        raise StageError("config", str(exc)) from exc


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig, args) -> int:
    a = pipeline.run_stages(cfg, upto="corpus")
    out = _out(cfg)
    write_corpus(a.corpus, out / "corpus.jsonl")
    write_rejections(a.corpus.rejections, out / "rejections.jsonl")
    edges = link_references(a.corpus)
    pipeline.write_json(out / "ingest.json", {
        "records": len(a.corpus), "rejections": len(a.corpus.rejections), "edges": len(edges),
        "unresolved_references": int(sum(unresolved_counts(a.corpus).values())),
    }, a.run_hash)
    return 0


def cmd_disambiguate(cfg: RunConfig, args) -> int:
    a = pipeline.run_stages(cfg, upto="corpus")
    pipeline.stage_authors(a)
    out = _out(cfg)
    sen = seniority_counts(a.corpus, a.authorship)
    rows = [[i, ident.family, ident.canonical_given, ident.middle_initials, sen.get(i, 0)]
            for i, ident in sorted(a.authorship.identities.items())]
    pipeline.write_csv(out / "authors.csv", ["author_id", "family", "given", "middle_initials", "seniority"],
                       rows, a.run_hash)
    pipeline.write_csv(out / "authorship.csv", ["doi", "author_ids"],
                       [[d, " ".join(map(str, ids))] for d, ids in sorted(a.authorship.ids.items())], a.run_hash)
    pipeline.write_json(out / "disambiguation.json", {
        "identities": len(a.authorship.identities),
        "unresolved_initials": a.authorship.unresolved_initials,
    }, a.run_hash)
    return 0


def cmd_gender(cfg: RunConfig, args) -> int:
    a = pipeline.run_stages(cfg, upto="authors")
    out = _out(cfg)
    rows = [[i, a.authorship.identities[i].display(), g.label.value, g.p_woman, g.source]
            for i, g in sorted(a.assignments.items())]
    pipeline.write_csv(out / "gender.csv", ["author_id", "name", "label", "p_woman", "source"], rows, a.run_hash)
    cats = [[d, CATEGORY_NAMES[c] if c >= 0 else "UNKNOWN"] for d, c in sorted(a.categories.items())]
    pipeline.write_csv(out / "categories.csv", ["doi", "category"], cats, a.run_hash)
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    a = pipeline.run_stages(cfg, upto="expectation")
    out = _out(cfg)
    pipeline.write_json(out / "model.json", a.model.to_json(), a.run_hash)
    rows = [[d, *p] for d, p in sorted(a.probabilities.items())]
    pipeline.write_csv(out / "probabilities.csv", ["doi"] + [f"p_{c}" for c in CATEGORY_NAMES], rows, a.run_hash)
    return 0


def cmd_analyze(cfg: RunConfig, args) -> int:
    pipeline.analyze(cfg)
    return 0


def cmd_network(cfg: RunConfig, args) -> int:
    a = pipeline.run_stages(cfg, upto="network")
    out = _out(cfg)
    network.write_edge_list(a.provider, out / "edges.csv", a.run_hash)
    network.write_neighborhoods(a.neighborhoods.values(), out / "neighborhoods.csv", a.run_hash)
    return 0


def cmd_regress(cfg: RunConfig, args) -> int:
    a = pipeline.run_stages(cfg, upto="network")
    reg = pipeline.estimate_regressions(a)
    pipeline.write_regressions(_out(cfg), reg, a.run_hash)
    return 0


def cmd_synth(cfg: RunConfig, args, synth_cfg: dict) -> int:
    data = dict(synth_cfg)
    for key in ("n_papers", "n_authors", "homophily_strength", "refs_mean"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if args.seed is not None:
        data["seed"] = args.seed
    if args.bias_mm is not None:
        bias = np.ones((4, 4))
        bias[:, 0] = args.bias_mm
        data["bias_matrix"] = bias.tolist()
    try:
        config = synth.SynthConfig.from_json(data)
        corpus, truth = synth.generate(config)
    except (TypeError, ValueError) as exc:
        raise StageError("synth", str(exc)) from exc
    out = _out(cfg)
    corpus_path, truth_path = synth.write_synthetic(corpus, truth, out, args.stem)
    (out / f"{args.stem}.config.json").write_text(json.dumps(config.to_json(), indent=1, sort_keys=True) + "\n")
    print(json.dumps({"corpus": str(corpus_path), "truth": str(truth_path), "papers": len(corpus)}))
    return 0


def cmd_diversity(cfg: RunConfig, args) -> int:
    dois = list(args.dois or [])
    if args.dois_file:
        dois += [line.strip() for line in Path(args.dois_file).read_text(encoding="utf-8").splitlines()
                 if line.strip()]
    try:
        if args.counts:
            counts = [int(v) for v in args.counts.split(",")]
            if len(counts) != 4:
                raise ValueError("--counts takes four comma-separated integers (MM,WM,MW,WW)")
            counts, unknown, missing = counts, int(args.unknown or 0), []
        else:
            a = pipeline.run_stages(cfg, upto="authors")
            if not dois:
                dois = sorted(a.corpus.records)
            from .corpus import normalize_doi
            counts, unknown, missing = pipeline.diversity_counts([normalize_doi(d) for d in dois], a.categories)
        if sum(counts) + unknown == 0:
            raise ValueError("empty reference list")
        stmt = pipeline.diversity_statement(counts, unknown)
    except StageError:
        raise
    except ValueError as exc:
        raise StageError("diversity-statement", str(exc)) from exc
    stmt["not_in_corpus"] = missing
    print(stmt["text"])
    if cfg.out and args.write:
        out = _out(cfg)
        (out / "diversity_statement.txt").write_text(stmt["text"] + "\n", encoding="utf-8")
        pipeline.write_json(out / "diversity_statement.json", stmt, cfg.options_hash())
    return 0


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citebalance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "parse and normalize a corpus; write rejections",
        "disambiguate": "resolve author identities",
        "gender": "assign gender labels and paper categories",
        "fit": "fit the expectation model",
        "analyze": "run the full pipeline",
        "network": "co-authorship neighborhoods",
        "regress": "median regression on neighborhood composition",
        "synth": "generate a synthetic corpus",
        "diversity-statement": "gender composition of a reference list",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "synth":
            p.add_argument("--n-papers", dest="n_papers", type=int)
            p.add_argument("--n-authors", dest="n_authors", type=int)
            p.add_argument("--homophily", dest="homophily_strength", type=float)
            p.add_argument("--refs-mean", dest="refs_mean", type=float)
            p.add_argument("--bias-mm", type=float, help="weight on citing MM papers from every category")
            p.add_argument("--stem", default="synthetic")
        if name == "diversity-statement":
            p.add_argument("dois", nargs="*", help="cited DOIs (default: whole corpus)")
            p.add_argument("--dois-file")
            p.add_argument("--counts", help="MM,WM,MW,WW counts instead of a corpus")
            p.add_argument("--unknown", type=int)
            p.add_argument("--write", action="store_true", help="also write files to --out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logger.debug("kernel backend: %s", _kernels.BACKEND)
    try:
        cfg, synth_cfg = load_config(args)
        handlers = {
            "ingest": cmd_ingest, "disambiguate": cmd_disambiguate, "gender": cmd_gender, "fit": cmd_fit,
            "analyze": cmd_analyze, "network": cmd_network, "regress": cmd_regress,
            "diversity-statement": cmd_diversity,
        }
        if args.command == "synth":
            return cmd_synth(cfg, args, synth_cfg)
        return handlers[args.command](cfg, args)
    except StageError as exc:
        sys.stderr.write(json.dumps({"error": exc.message, "stage": exc.stage}) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "stage": args.command}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
