import warnings

import numpy as np
import pytest

from citebalance import expectation as ex
from citebalance.authors import GenderCategory, Label


def random_table(rng, n, journals=("J1", "J2", "J3")):
    return ex.FeatureTable({
        "months_since_epoch": rng.integers(0, 288, n).astype(float),
        "team_size": rng.integers(1, 12, n).astype(float),
        "combined_seniority": rng.integers(2, 60, n).astype(float),
        "journal": rng.choice(np.array(journals, dtype=object), n),
        "is_review": rng.choice(np.array(["False", "True"], dtype=object), n, p=[0.9, 0.1]),
        "subfield": np.array(["none"] * n, dtype=object),
    })


def trend_categories(rng, table):
    # women become more common over time
    t = table["months_since_epoch"] / 288.0
    p_w = 0.15 + 0.4 * t
    first = rng.random(len(t)) < p_w
    last = rng.random(len(t)) < p_w * 0.8
    return first.astype(int) + 2 * last.astype(int)


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(0)
    table = random_table(rng, 1500)
    cats = trend_categories(rng, table)
    return ex.fit(ex.ModelSpec(), table, cats), table, cats


def test_intercept_only_matches_frequencies():
    rng = np.random.default_rng(1)
    table = random_table(rng, 400)
    cats = rng.choice(4, 400, p=[0.5, 0.2, 0.2, 0.1])
    model = ex.fit(ex.ModelSpec.intercept_only(), table, cats)
    freq = np.bincount(cats, minlength=4) / len(cats)
    np.testing.assert_allclose(model.predict_proba(table), np.tile(freq, (400, 1)), atol=1e-8)


def test_probabilities_sum_to_one(fitted):
    model, _, _ = fitted
    rng = np.random.default_rng(2)
    probs = model.predict_proba(random_table(rng, 1000))
    assert np.all(probs >= 0)
    assert np.max(np.abs(probs.sum(axis=1) - 1)) <= 1e-12


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(5), rng.normal(size=(5, 2))])
    Y = ex.one_hot(np.array([0, 1, 2, 3, 1]))
    A = rng.normal(size=(3, 3))
    S = A @ A.T
    w = rng.uniform(0.5, 2, 5)
    beta = rng.normal(scale=0.5, size=(3, 3))
    g = ex.penalized_gradient(X, Y, beta, S, w)
    fd = np.zeros_like(beta)
    h = 1e-6
    for idx in np.ndindex(beta.shape):
        bp, bm = beta.copy(), beta.copy()
        bp[idx] += h
        bm[idx] -= h
        fd[idx] = (ex.penalized_loglik(X, Y, bp, S, w) - ex.penalized_loglik(X, Y, bm, S, w)) / (2 * h)
    rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8)
    assert rel.max() < 1e-5


def test_newton_never_decreases_objective(fitted):
    model, _, _ = fitted
    path = model.trace.objective_path
    assert model.trace.converged
    assert all(b >= a - 1e-9 for a, b in zip(path, path[1:]))


def test_time_shift_invariance():
    rng = np.random.default_rng(4)
    table = random_table(rng, 600)
    cats = trend_categories(rng, table)
    base = ex.fit(ex.ModelSpec(), table, cats).predict_proba(table)
    cols = dict(table.columns)
    cols["months_since_epoch"] = cols["months_since_epoch"] + 120.0
    shifted_table = ex.FeatureTable(cols)
    shifted = ex.fit(ex.ModelSpec(), shifted_table, cats).predict_proba(shifted_table)
    np.testing.assert_allclose(base, shifted, atol=1e-6)


def test_heavy_smoothing_tends_to_marginals():
    rng = np.random.default_rng(5)
    table = random_table(rng, 800)
    cats = trend_categories(rng, table)
    spec = ex.ModelSpec(categorical=(), lam=1e9)
    probs = ex.fit(spec, table, cats).predict_proba(table)
    freq = np.bincount(cats, minlength=4) / len(cats)
    assert np.max(np.abs(probs - freq)) < 1e-3


def test_ww_probability_rises_with_time(fitted):
    model, _, _ = fitted
    grid = ex.FeatureTable({
        "months_since_epoch": np.linspace(0, 287, 12),
        "team_size": np.full(12, 4.0),
        "combined_seniority": np.full(12, 20.0),
        "journal": np.array(["J1"] * 12, dtype=object),
        "is_review": np.array(["False"] * 12, dtype=object),
        "subfield": np.array(["none"] * 12, dtype=object),
    })
    p_ww = model.predict_proba(grid)[:, 3]
    assert p_ww[-1] > 2 * p_ww[0]
    assert np.all(np.diff(p_ww) > -0.01)


def test_gcv_selects_from_grid():
    rng = np.random.default_rng(6)
    table = random_table(rng, 500)
    cats = trend_categories(rng, table)
    model = ex.fit(ex.ModelSpec(select="gcv"), table, cats)
    assert len(set(model.lambdas)) == 1 and model.lambdas[0] in ex.GCV_GRID
    assert model.edf is not None and model.edf > 3


def test_linear_fallback_for_few_distinct_values():
    rng = np.random.default_rng(7)
    table = random_table(rng, 300)
    table.columns["team_size"] = rng.integers(1, 4, 300).astype(float)
    model = ex.fit(ex.ModelSpec(), table, rng.integers(0, 4, 300))
    kinds = {t.name: type(t).__name__ for t in model.terms}
    assert kinds["team_size"] == "LinearTerm"
    assert kinds["months_since_epoch"] == "SmoothTerm"


def test_degenerate_categories():
    rng = np.random.default_rng(8)
    table = random_table(rng, 200)
    cats = rng.integers(0, 3, 200)
    with pytest.raises(ex.ModelError):
        ex.fit(ex.ModelSpec.intercept_only(), table, cats)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = ex.fit(ex.ModelSpec.intercept_only(), table, cats, allow_degenerate=True)
    assert m.predict_proba(table)[0, 3] < 1e-3
    with pytest.raises(ex.ModelError):
        ex.fit(ex.ModelSpec(), table, np.full(200, -1))


def test_unseen_level_maps_to_reference(fitted):
    model, table, _ = fitted
    one = table.take(np.arange(1))
    cols = dict(one.columns)
    cols["journal"] = np.array(["J_new"], dtype=object)
    with pytest.warns(UserWarning):
        p_new = model.predict_proba(ex.FeatureTable(cols))
    term = next(t for t in model.terms if t.name == "journal")
    cols["journal"] = np.array([term.reference], dtype=object)
    np.testing.assert_allclose(p_new, model.predict_proba(ex.FeatureTable(cols)))


def test_reference_category_invariance(fitted):
    model, table, _ = fitted
    base = model.predict_proba(table)
    for k in range(4):
        np.testing.assert_allclose(model.with_reference(k).predict_proba(table), base, atol=1e-12)


def test_save_load_round_trip(fitted, tmp_path):
    model, table, _ = fitted
    path = tmp_path / "model.json"
    model.save(path)
    back = ex.ExpectationModel.load(path)
    np.testing.assert_array_equal(back.predict_proba(table), model.predict_proba(table))


def test_pool_shares_strictly_before():
    dk = [10, 10, 12, 15]
    cats = [0, 3, -1, 1]
    shares = ex.pool_shares_before(dk, cats, [10, 11, 13, 16])
    assert np.isnan(shares[0]).all()
    np.testing.assert_allclose(shares[1], [0.5, 0, 0, 0.5])
    np.testing.assert_allclose(shares[2], [0.5, 0, 0, 0.5])
    np.testing.assert_allclose(shares[3], [1 / 3, 1 / 3, 0, 1 / 3])
    pool = ex.random_draws_expectation([0, 0, 1, 3, -1])
    np.testing.assert_allclose(pool.as_array(), [0.5, 0.25, 0, 0.25])


def test_compatible_weights():
    probs = np.array([0.4, 0.3, 0.2, 0.1])
    np.testing.assert_allclose(ex.compatible_weights(Label.WOMAN, Label.UNKNOWN, probs), [0, 0.75, 0, 0.25])
    np.testing.assert_allclose(ex.compatible_weights(Label.UNKNOWN, Label.MAN, probs), [4 / 7, 3 / 7, 0, 0])
    np.testing.assert_allclose(ex.compatible_weights(Label.UNKNOWN, Label.UNKNOWN, probs), probs)
    np.testing.assert_allclose(ex.compatible_weights(Label.WOMAN, Label.UNKNOWN, [1, 0, 0, 0]), [0, .5, 0, .5])
    with pytest.raises(ValueError):
        ex.compatible_weights(Label.MAN, Label.MAN, probs)


def test_imputation_draw_frequencies():
    rng = np.random.default_rng(9)
    probs = np.array([0.4, 0.3, 0.2, 0.1])
    n = 20000
    draws = [ex.impute_unknown(Label.MAN, Label.UNKNOWN, probs, rng) for _ in range(n)]
    assert set(draws) <= {GenderCategory.MM, GenderCategory.MW}
    share_mm = np.mean([d is GenderCategory.MM for d in draws])
    # binomial SE ~ 0.0033
    assert abs(share_mm - 2 / 3) < 0.015
