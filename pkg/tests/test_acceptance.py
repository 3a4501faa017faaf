"""Acceptance criteria 1-11, each reporting one PASS/FAIL line.

Lines are printed as the tests run and repeated in the terminal summary.
"""

import itertools
import time

import numpy as np
import pytest
from scipy import stats

from citebalance import cli, expectation, imbalance, inference, network, pipeline, synth
from citebalance.authors import NicknameTable, merge_name_variants, parse_author_name, resolve_initials
from citebalance.corpus import write_corpus

from conftest import ACCEPTANCE_LINES


def report(n, ok, detail, elapsed=None):
    t = f" [{elapsed:.2f}s]" if elapsed is not None else ""
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'} - {detail}{t}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _synth_corpus(tmp_path, name, **kw):
    corpus, truth = synth.generate(synth.SynthConfig(**kw))
    path = tmp_path / f"{name}.jsonl"
    write_corpus(corpus, path)
    return path, corpus, truth


# -- 1 --------------------------------------------------------------------------

def test_criterion_01_delta_arithmetic():
    t0 = time.perf_counter()
    obs = [61.7, 23.6, 9.0, 5.8]
    cases = [([55.3, 26.2, 10.2, 8.3], [11.6, -10.1, -12.5, -30.2]),
             ([58.6, 25.3, 9.4, 6.7], [5.2, -6.7, -4.6, -13.9])]
    worst = 0.0
    for exp, target in cases:
        got = [imbalance.delta_from_shares(obs, exp, g) for g in ("MM", "WM", "MW", "WW")]
        worst = max(worst, max(abs(a - b) for a, b in zip(got, target)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 1
    assert report(1, ok, f"max |delta - quoted| = {worst:.3f} points", elapsed)


# -- 2 --------------------------------------------------------------------------

def test_criterion_02_diversity_statement():
    t0 = time.perf_counter()
    st = pipeline.diversity_statement([24, 9, 8, 30])
    pct = [st["percent"][g] for g in ("MM", "WM", "MW", "WW")]
    elapsed = time.perf_counter() - t0
    ok = pct == [34, 13, 11, 42] and "34% (n = 24) were MM" in st["text"] and elapsed < 1
    assert report(2, ok, f"percentages {pct}", elapsed)


# -- 3 --------------------------------------------------------------------------

def test_criterion_03_dolan_cases():
    t0 = time.perf_counter()
    nick = NicknameTable.bundled()
    P = parse_author_name
    merged, u1 = resolve_initials([P("R. J. Dolan"), P("Ray J. Dolan"), P("Raymond J. Dolan"),
                                   P("Raymond J. Dolan")], nick)
    refused, u2 = resolve_initials([P("R. J. Dolan"), P("Ray J. Dolan"), P("Rebecca J. Dolan")], nick)
    variants = merge_name_variants([P("Ray Dolan")] * 3 + [P("Raymond Dolan")] * 7, nick)
    blocked = merge_name_variants([P("Ray Dolan"), P("Raymond S. Dolan"), P("Raymond J. Dolan")], nick)
    elapsed = time.perf_counter() - t0
    checks = {
        "initials merged": merged[P("R. J. Dolan")] == P("Raymond J. Dolan") and u1 == 0,
        "initials refused": refused[P("R. J. Dolan")] == P("R. J. Dolan") and u2 == 1,
        "variants merged": set(variants.values()) == {P("Raymond Dolan")},
        "conflict blocks": all(k == v for k, v in blocked.items()),
    }
    ok = all(checks.values()) and elapsed < 1
    assert report(3, ok, ", ".join(f"{k}={v}" for k, v in checks.items()), elapsed)


# -- 4 --------------------------------------------------------------------------

def test_criterion_04_null_structure(tmp_path):
    t0 = time.perf_counter()
    path, _, _ = _synth_corpus(tmp_path, "c4", seed=4)
    a = pipeline.run_stages(pipeline.RunConfig(corpus=str(path)), upto="imbalance")
    panel = a.panel
    before = panel.checksum()
    edges = (panel.edge_row.copy(), panel.edge_cited.copy())
    sizes = panel.obs.sum(axis=1)
    citing = panel.row_cat.copy()
    varied = 0
    structure_ok = True
    for i in range(100):
        rng = imbalance.replicate_rng(0, imbalance.STREAM_NULL, i)
        cats = panel.null_categories(rng)
        counts = panel.observed(cats)
        structure_ok &= np.array_equal(counts.sum(axis=1), sizes)
        varied += not np.array_equal(cats, panel.cited_cat)
    structure_ok &= (panel.checksum() == before and np.array_equal(panel.edge_row, edges[0])
                     and np.array_equal(panel.edge_cited, edges[1]) and np.array_equal(panel.row_cat, citing))
    elapsed = time.perf_counter() - t0
    ok = structure_ok and varied == 100 and elapsed < 60
    assert report(4, ok, f"{len(a.corpus)} papers, {panel.n_edges} edges, checksum stable={structure_ok}, "
                         f"cited categories changed in {varied}/100", elapsed)


# -- 5 --------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_05_null_calibration(tmp_path):
    t0 = time.perf_counter()
    key = [imbalance.StatKey("delta_percent", "MM", "ALL")]
    pvals, covered = [], 0
    for seed in range(20):
        path, _, _ = _synth_corpus(tmp_path, "c5", seed=seed)
        a = pipeline.run_stages(pipeline.RunConfig(corpus=str(path)), upto="imbalance")
        est = imbalance.infer_panel(a.panel, key, B=1000, R=10000, seed=seed).estimates()[0]
        pvals.append(est.p_raw)
        covered += est.ci_low <= 0.0 <= est.ci_high
    ks = stats.kstest(pvals, "uniform").pvalue
    elapsed = time.perf_counter() - t0
    ok = ks > 0.01 and covered >= 18 and elapsed < 600
    assert report(5, ok, f"KS p = {ks:.3f} (need > 0.01), CI covers 0 in {covered}/20 (need >= 18)", elapsed)


# -- 6 --------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_06_bias_recovery(tmp_path):
    t0 = time.perf_counter()
    deltas, p_holm = [], []
    for b in (0.8, 1.0, 1.2, 1.5):
        bias = np.ones((4, 4))
        bias[:, 0] = b
        path, _, _ = _synth_corpus(tmp_path, "c6", seed=0, bias_matrix=bias.tolist())
        cfg = pipeline.RunConfig(corpus=str(path), replicates_bootstrap=200, replicates_null=10000)
        rows = pipeline.estimate_imbalance(pipeline.run_stages(cfg, upto="imbalance"))
        e = next(r.estimate for r in rows if r.expectation == "characteristics" and r.estimate.kind ==
                 "delta_percent" and r.estimate.group == "MM" and r.estimate.conditioning == "ALL")
        deltas.append(e.value)
        p_holm.append(e.p_adjusted)
    elapsed = time.perf_counter() - t0
    increasing = all(x < y for x, y in zip(deltas, deltas[1:]))
    extremes = deltas[0] < 0 < deltas[-1] and p_holm[0] < 0.05 and p_holm[-1] < 0.05
    ok = increasing and extremes and elapsed < 600
    assert report(6, ok, "delta_MM " + ", ".join(f"{d:+.1f}" for d in deltas) +
                  f"; p_holm at extremes {p_holm[0]:.4f}, {p_holm[-1]:.4f}", elapsed)


# -- 7 --------------------------------------------------------------------------

def test_criterion_07_expectation_model():
    t0 = time.perf_counter()
    rng = np.random.default_rng(70)
    n = 600

    def table(m):
        return expectation.FeatureTable({
            "months_since_epoch": rng.integers(0, 288, m).astype(float),
            "team_size": rng.integers(1, 15, m).astype(float),
            "combined_seniority": rng.integers(2, 80, m).astype(float),
            "journal": rng.choice(np.array(["J1", "J2", "J3"], dtype=object), m),
            "is_review": rng.choice(np.array(["False", "True"], dtype=object), m),
            "subfield": np.array(["none"] * m, dtype=object),
        })

    tab = table(n)
    cats = rng.choice(4, n, p=[0.45, 0.25, 0.2, 0.1])
    freq = np.bincount(cats, minlength=4) / n
    io = expectation.fit(expectation.ModelSpec.intercept_only(), tab, cats).predict_proba(tab)
    err_freq = float(np.max(np.abs(io - freq)))

    full = expectation.fit(expectation.ModelSpec(), tab, cats)
    probs = full.predict_proba(table(1000))
    err_sum = float(np.max(np.abs(probs.sum(axis=1) - 1)))

    X = np.column_stack([np.ones(5), rng.normal(size=(5, 2))])
    Y = expectation.one_hot(np.array([0, 1, 2, 3, 0]))
    A = rng.normal(size=(3, 3))
    S = A @ A.T
    beta = rng.normal(scale=0.3, size=(3, 3))
    g = expectation.penalized_gradient(X, Y, beta, S)
    fd = np.zeros_like(beta)
    h = 1e-6
    for idx in np.ndindex(beta.shape):
        bp, bm = beta.copy(), beta.copy()
        bp[idx] += h
        bm[idx] -= h
        fd[idx] = (expectation.penalized_loglik(X, Y, bp, S) - expectation.penalized_loglik(X, Y, bm, S)) / (2 * h)
    rel = float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8)))
    elapsed = time.perf_counter() - t0
    ok = err_freq <= 1e-8 and err_sum <= 1e-12 and rel < 1e-5 and elapsed < 60
    assert report(7, ok, f"intercept-only error {err_freq:.1e}, sum error {err_sum:.1e}, "
                         f"gradient rel error {rel:.1e}", elapsed)


# -- 8 --------------------------------------------------------------------------

def test_criterion_08_quantile_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(80)
    worst, ls_ok = 0.0, True
    for _ in range(25):
        n = int(rng.integers(5, 51))
        p = int(rng.integers(1, 4))
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        y = X @ rng.normal(size=p) + rng.standard_t(2, size=n)
        w = rng.integers(1, 5, n).astype(float)
        beta, obj = inference.quantile_coefficients(X, y, w)
        ob, _ = inference.vertex_oracle(X, y, w)
        worst = max(worst, float(np.max(np.abs(beta - ob))))
        ls = inference.least_squares_coefficients(X, y, w)
        ls_ok &= obj <= inference.check_loss(y - X @ ls, w) + 1e-9
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and ls_ok and elapsed < 60
    assert report(8, ok, f"max |LP - oracle| = {worst:.1e}, objective <= least squares: {ls_ok}", elapsed)


# -- 9 --------------------------------------------------------------------------

def test_criterion_09_holm():
    cases = [([0.01, 0.04], [0.02, 0.04]), ([0.2], [0.2]), ([0.03, 0.01, 0.04], [0.06, 0.03, 0.06])]
    results = [np.allclose(imbalance.holm_bonferroni(p), want, rtol=0, atol=1e-15) for p, want in cases]
    assert report(9, all(results), f"examples matched: {sum(results)}/3")


# -- 10 -------------------------------------------------------------------------

def test_criterion_10_network(tmp_path):
    from test_network import FIXTURE, LABELS, brute_force

    t0 = time.perf_counter()
    prov = network.SnapshotProvider(FIXTURE, LABELS)
    exact = True
    for doi, *_ in FIXTURE:
        n_a, n_p, ma, mmp = brute_force(FIXTURE, LABELS, doi)
        s = prov.overrepresentation(doi)
        same = lambda u, v: (np.isnan(u) and np.isnan(v)) or u == v  # noqa: E731
        exact &= (prov.author_neighborhood(doi) == n_a and prov.paper_neighborhood(doi) == n_p
                  and same(s.MA_or, ma) and same(s.MMP_or, mmp))
    medians, mm_medians = [], []
    for h in (0.0, 0.3, 0.6):
        path, _, _ = _synth_corpus(tmp_path, "c10", seed=0, homophily_strength=h)
        a = pipeline.run_stages(pipeline.RunConfig(corpus=str(path)), upto="authors")
        provider = network.build_snapshots(a.corpus, a.authorship, a.categories, a.labels)
        st = [provider.overrepresentation(d) for d in a.corpus.records]
        avail = [s for s in st if s.available]
        medians.append(float(np.median([s.MA_or for s in avail])))
        mm_medians.append(float(np.median([s.MA_or for s in avail if a.categories[s.doi] == 0])))
    increasing = all(x < y for x, y in zip(medians, medians[1:]))
    elapsed = time.perf_counter() - t0
    ok = exact and increasing and elapsed < 60
    assert report(10, ok, f"fixtures exact={exact}; median MA_or " + ", ".join(f"{m:.4f}" for m in medians)
                  + " (MM teams " + ", ".join(f"{m:.4f}" for m in mm_medians) + ")", elapsed)


# -- 11 -------------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    path, _, _ = _synth_corpus(tmp_path, "c11", seed=11)
    argv = ["--corpus", str(path), "--seed", "5", "--replicates-bootstrap", "100", "--replicates-null", "200",
            "--regression-replicates", "20"]
    outs = [tmp_path / "run_a", tmp_path / "run_b"]
    codes = [cli.main(["analyze", *argv, "--out", str(o)]) for o in outs]
    csvs = sorted(p.name for p in outs[0].glob("*.csv"))
    identical = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in csvs]
    elapsed = time.perf_counter() - t0
    ok = codes == [0, 0] and bool(csvs) and all(identical)
    assert report(11, ok, f"{sum(identical)}/{len(csvs)} result CSVs byte-identical", elapsed)
