import numpy as np
import pytest

from citebalance import pipeline, synth
from citebalance.corpus import ArticleRecord, Corpus, write_corpus


def record(doi, year, authors, refs=(), month=6, journal="J1", **kw):
    return ArticleRecord(doi=doi, journal=journal, pub_year=year, pub_month=month,
                         authors=tuple(authors), references=tuple(refs), **kw)


@pytest.fixture
def rec():
    return record


@pytest.fixture(scope="session")
def small_synth():
    cfg = synth.SynthConfig(n_papers=400, n_authors=200, seed=11, refs_mean=3.0)
    return synth.generate(cfg)


@pytest.fixture(scope="session")
def small_corpus_path(small_synth, tmp_path_factory):
    path = tmp_path_factory.mktemp("syn") / "small.jsonl"
    write_corpus(small_synth[0], path)
    return path


@pytest.fixture(scope="session")
def small_analysis(small_corpus_path):
    cfg = pipeline.RunConfig(corpus=str(small_corpus_path), replicates_bootstrap=50, replicates_null=50,
                             regression_replicates=10)
    return pipeline.run_stages(cfg, upto="network")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_corpus(records, **kw):
    return Corpus.from_records(records, **kw)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
