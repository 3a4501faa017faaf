import numpy as np
import pytest

from citebalance import inference as inf


def random_instance(rng, n, p):
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = X @ rng.normal(size=p) + rng.standard_t(3, size=n)
    w = rng.integers(1, 6, size=n).astype(float)
    return X, y, w


@pytest.mark.parametrize("seed", range(10))
def test_lp_matches_vertex_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 31))
    p = int(rng.integers(1, 4))
    X, y, w = random_instance(rng, n, p)
    beta, obj = inf.quantile_coefficients(X, y, w)
    ob, oobj = inf.vertex_oracle(X, y, w)
    np.testing.assert_allclose(beta, ob, atol=1e-6)
    assert obj == pytest.approx(oobj, rel=1e-9, abs=1e-9)


def test_objective_never_above_least_squares():
    rng = np.random.default_rng(42)
    for _ in range(10):
        X, y, w = random_instance(rng, 40, 3)
        _, obj = inf.quantile_coefficients(X, y, w)
        ls = inf.least_squares_coefficients(X, y, w)
        assert obj <= inf.check_loss(y - X @ ls, w) + 1e-9


def test_weighted_median_via_lp():
    one = np.ones((3, 1))
    beta, _ = inf.quantile_coefficients(one, [1, 2, 100], [1, 3, 1])
    assert beta[0] == pytest.approx(2.0)
    beta, _ = inf.quantile_coefficients(np.ones((2, 1)), [1, 2], [1, 1])
    assert beta[0] == pytest.approx(1.0)
    ob, _ = inf.vertex_oracle(np.ones((2, 1)), [1, 2], [1, 1])
    assert ob[0] == 1.0


def test_other_quantiles():
    y = np.arange(1.0, 11.0)
    beta, _ = inf.quantile_coefficients(np.ones((10, 1)), y, tau=0.9)
    assert beta[0] == pytest.approx(9.0)


def test_least_squares_exact():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(20), rng.normal(size=20)])
    y = X @ np.array([1.5, -2.0])
    np.testing.assert_allclose(inf.least_squares_coefficients(X, y, rng.uniform(1, 2, 20)), [1.5, -2.0])


def test_rank_and_empty_errors():
    with pytest.raises(inf.RegressionError):
        inf.quantile_coefficients(np.zeros((0, 1)), [])
    X = np.column_stack([np.ones(5), np.ones(5)])
    with pytest.raises(inf.RegressionError):
        inf.quantile_coefficients(X, np.arange(5.0))


def test_check_loss():
    assert inf.check_loss([1, -2], [1, 1], 0.5) == pytest.approx(1.5)
    assert inf.check_loss([1, -2], [2, 1], 0.25) == pytest.approx(0.5 + 1.5)


def _toy_data():
    rng = np.random.default_rng(7)
    n = 200
    group = rng.integers(0, 4, n)
    ma = rng.normal(0, 10, n)
    mmp = rng.normal(0, 10, n)
    delta = np.array([5.0, 1.0, 0.0, -2.0])[group] + 0.3 * ma + 0.1 * mmp + rng.laplace(0, 1, n)
    return inf.RegressionData([f"d{i}" for i in range(n)], group, delta, np.ones(n), ma, mmp)


def test_design_and_fits():
    data = _toy_data()
    X, names = inf.design_matrix(data)
    assert names == ["MM", "WM", "MW", "WW", "MA_or", "MMP_or"]
    np.testing.assert_array_equal(X[:, :4].sum(axis=1), 1)
    q = inf.fit_quantile(inf.RegressionSpec(), data)
    ls = inf.fit_least_squares(inf.RegressionSpec(), data)
    for fit in (q, ls):
        np.testing.assert_allclose(fit.coef, [5, 1, 0, -2, 0.3, 0.1], atol=0.5)
    cond = inf.conditional_overcitation(q, "MM")
    assert cond["value"] == q.coefficient("MM") and np.isnan(cond["p_raw"])
    with pytest.raises(KeyError):
        inf.conditional_overcitation(q, "MA_or")


def test_missing_group_drops_column():
    data = _toy_data()
    keep = np.flatnonzero(data.group != 2)
    _, names = inf.design_matrix(data.take(keep))
    assert "MW" not in names


def test_regression_data_and_inference(small_analysis):
    a = small_analysis
    data = inf.regression_data(a.panel, a.neighborhoods)
    assert len(data.delta) + data.excluded == a.panel.n_rows
    for i, doi in enumerate(data.doi):
        st = a.neighborhoods[doi]
        assert st.available
        assert data.MA_or[i] == pytest.approx(100 * st.MA_or)
    spec = inf.RegressionSpec()
    fit = inf.infer_regression(spec, a.panel, a.neighborhoods, B=15, R=15, seed=2)
    again = inf.infer_regression(spec, a.panel, a.neighborhoods, B=15, R=15, seed=2)
    np.testing.assert_array_equal(fit.p_raw, again.p_raw)
    np.testing.assert_array_equal(fit.ci_low, again.ci_low)
    assert np.all(fit.ci_low <= fit.coef) and np.all(fit.coef <= fit.ci_high)
    assert np.all(fit.p_adjusted >= fit.p_raw)
    rows = fit.rows()
    assert [r["term"] for r in rows] == fit.columns
