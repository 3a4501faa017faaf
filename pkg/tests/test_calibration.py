"""Calibration of the bootstrap interval and the null p-value on zero-bias synthetic corpora.

The interval check uses the fitted expectation model end to end. The
p-value uniformity check swaps in the generator's own category
probabilities. That isolates the graph-preserving null from estimation
error in the model. With fitted probabilities the null is mildly
conservative, because each cited paper's own category also feeds its
fitted probability.
"""

import numpy as np
import pytest
from scipy import stats

from citebalance import imbalance, pipeline, synth
from citebalance.corpus import write_corpus

N_SEEDS = 200
KEY = [imbalance.StatKey("delta_percent", "MM", "ALL")]


def generating_probabilities(cfg: synth.SynthConfig) -> np.ndarray:
    """Category probabilities of one synthetic paper, for a constant woman share."""
    p, s, h = cfg.p_woman(cfg.years[0]), cfg.single_author_rate, cfg.homophily_strength
    q = np.array([(1 - p) ** 2, p * (1 - p), (1 - p) * p, p**2])
    same = np.array([1 - p, 0.0, 0.0, p])
    keep = s + (1 - s) * h
    return (1 - keep) * q + keep * same


def test_generating_probabilities_match_draws():
    cfg = synth.SynthConfig(n_papers=20000, n_authors=2000, refs_mean=0.0, seed=3)
    _, truth = synth.generate(cfg)
    freq = np.bincount(list(truth.categories.values()), minlength=4) / cfg.n_papers
    np.testing.assert_allclose(freq, generating_probabilities(cfg), atol=0.01)


@pytest.fixture(scope="module")
def calibration_runs(tmp_path_factory):
    path = tmp_path_factory.mktemp("calibration") / "corpus.jsonl"
    fitted, true = [], []
    for i in range(N_SEEDS):
        cfg = synth.SynthConfig(seed=1000 + i)
        corpus, _ = synth.generate(cfg)
        write_corpus(corpus, path)
        a = pipeline.run_stages(pipeline.RunConfig(corpus=str(path)), upto="imbalance")
        fitted.append(imbalance.infer_panel(a.panel, KEY, B=1000, R=1000, seed=i).estimates()[0])
        probs = dict.fromkeys(a.probabilities, generating_probabilities(cfg))
        panel = imbalance.build_panel(a.corpus, a.edges, a.categories, probabilities=probs,
                                      self_mask=a.self_masks["primary"])
        true.append(imbalance.infer_panel(panel, KEY, B=10, R=1000, seed=i).estimates()[0])
    return fitted, true


@pytest.mark.slow
def test_bootstrap_interval_coverage(calibration_runs):
    fitted, _ = calibration_runs
    coverage = np.mean([e.ci_low <= 0.0 <= e.ci_high for e in fitted])
    print(f"coverage of zero over {N_SEEDS} seeds: {coverage:.3f}")
    assert 0.92 <= coverage <= 0.98


@pytest.mark.slow
def test_null_pvalues_uniform(calibration_runs):
    _, true = calibration_runs
    pvals = [e.p_raw for e in true]
    ks = stats.kstest(pvals, "uniform").pvalue
    print(f"KS p over {N_SEEDS} seeds: {ks:.3f}; deciles {np.histogram(pvals, bins=10, range=(0, 1))[0]}")
    assert ks > 0.01


@pytest.mark.slow
def test_fitted_null_is_not_anticonservative(calibration_runs):
    fitted, _ = calibration_runs
    small = np.mean([e.p_raw < 0.05 for e in fitted])
    print(f"fitted-model rejection rate at 0.05: {small:.3f}")
    assert small <= 0.05 + 2 * np.sqrt(0.05 * 0.95 / N_SEEDS)
