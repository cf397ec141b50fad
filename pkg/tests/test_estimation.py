import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st

from bpvarx.errors import CollinearDesign, InconsistentInputs, Underdetermined, UnknownEquation
from bpvarx.estimation import (VarEstimate, equation_summary, fit_varx_ols, robust_se,
                               stability_check, star_code)
from bpvarx.panel import build_design

from conftest import simulate_varx


def normal_equations(X, Y):
    return np.linalg.solve(X.T @ X, X.T @ Y)


def test_noiseless_var1_recovered_exactly():
    B = np.array([[0.5, 0.2], [-0.1, 0.3]])
    _, truth, model, design = simulate_varx(B, sigma=np.zeros((2, 2)), n_exog=0,
                                            n_firms=20, n_years=6, burn_in=1)
    # a short burn-in keeps the deterministic transient informative
    est = fit_varx_ols(design, model)
    assert_allclose(est.lag_matrices[0], B, rtol=1e-8, atol=1e-8)


def test_noiseless_varx_with_controls_recovered():
    _, truth, model, design = simulate_varx(sigma=np.zeros((2, 2)), n_exog=2, n_firms=40,
                                            n_years=8)
    est = fit_varx_ols(design, model)
    t = truth.estimate()
    assert_allclose(est.coef, t.coef, rtol=1e-8, atol=1e-8)


def test_matches_generic_least_squares_oracle(varx_panel):
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    X, Y = design.regressors, design.response
    assert_allclose(est.coef, normal_equations(X, Y), rtol=1e-8, atol=1e-10)
    import scipy.linalg as sla
    oracle, *_ = sla.lstsq(X, Y, lapack_driver="gelsy")
    assert_allclose(est.coef, oracle, rtol=1e-8, atol=1e-10)
    resid = Y - X @ oracle
    assert_allclose(est.sigma, resid.T @ resid / (X.shape[0] - X.shape[1]), rtol=1e-8)


def test_rmse_shrinks_with_sample_size():
    errs = []
    for n in (50, 400):
        _, truth, model, design = simulate_varx(n_firms=n, seed=11)
        est = fit_varx_ols(design, model)
        errs.append(np.sqrt(np.mean((est.coef - truth.estimate().coef) ** 2)))
    assert errs[1] < errs[0]


def test_duplicate_exog_column_is_collinear(varx_panel):
    ds, _, model, _ = varx_panel
    ds2 = ds.with_columns({"x1_copy": ds.column("x1")})
    m2 = model.replace(exogenous=("x1", "x1_copy"))
    with pytest.raises(CollinearDesign) as info:
        fit_varx_ols(build_design(ds2, m2), m2)
    assert set(info.value.columns) & {"x1", "x1_copy"}


def test_underdetermined():
    _, _, model, design = simulate_varx(n_firms=1, n_years=5)
    with pytest.raises(Underdetermined):
        fit_varx_ols(design, model)


def test_sigma_symmetric_psd_and_residual_means(varx_panel):
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    assert_allclose(est.sigma, est.sigma.T)
    assert np.linalg.eigvalsh(est.sigma).min() >= 0
    scale = np.abs(design.response).max()
    assert np.abs(est.residuals.mean(axis=0)).max() < 1e-10 * scale


def test_fitted_plus_residuals_reconstruct(varx_panel):
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    rebuilt = design.regressors @ est.coef + est.residuals
    assert_allclose(rebuilt, design.response, rtol=1e-10, atol=1e-12)


def test_row_permutation_invariance(varx_panel):
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    perm = np.random.default_rng(5).permutation(design.nobs)
    est2 = fit_varx_ols(design.take(perm), model)
    assert_allclose(est2.coef, est.coef, rtol=1e-9, atol=1e-12)
    assert_allclose(est2.sigma, est.sigma, rtol=1e-9)


def test_irrelevant_exog_never_increases_rss(varx_panel):
    ds, _, model, design = varx_panel
    rng = np.random.default_rng(3)
    ds2 = ds.with_columns({"noise": rng.standard_normal(ds.n_obs)})
    m2 = model.replace(exogenous=model.exogenous + ("noise",))
    rss1 = (fit_varx_ols(design, model).residuals ** 2).sum(axis=0)
    rss2 = (fit_varx_ols(build_design(ds2, m2), m2).residuals ** 2).sum(axis=0)
    assert np.all(rss2 <= rss1 + 1e-9 * rss1)


def test_robust_equals_classical_under_homoskedasticity():
    _, _, model, design = simulate_varx(n_firms=1000, n_years=7, seed=2)
    assert design.nobs >= 5000
    est = fit_varx_ols(design, model)
    rel = np.abs(est.se_robust / est.se - 1)
    assert np.mean(rel < 0.05) >= 0.95


def test_robust_se_zero_residuals():
    _, _, model, design = simulate_varx(sigma=np.zeros((2, 2)), n_firms=30)
    est = fit_varx_ols(design, model)
    zero = VarEstimate(est.endog_names, est.exog_names, est.lags, est.coef, est.sigma,
                       est.nobs, residuals=np.zeros_like(est.residuals), xtx_inv=est.xtx_inv)
    assert_allclose(robust_se(zero, design), 0.0)


def test_robust_se_dimension_mismatch(varx_panel):
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    with pytest.raises(InconsistentInputs):
        robust_se(est, design.take(np.arange(design.nobs - 3)))


def test_robust_matches_statsmodels_hc1(varx_panel):
    sm = pytest.importorskip("statsmodels.api")
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    res = sm.OLS(design.response[:, 0], design.regressors).fit(cov_type="HC1")
    assert_allclose(est.se_robust[:, 0], res.bse, rtol=1e-8)
    assert_allclose(est.se[:, 0], sm.OLS(design.response[:, 0], design.regressors).fit().bse,
                    rtol=1e-8)


@pytest.mark.slow
def test_robust_coverage_under_heteroskedasticity():
    from scipy import stats
    rng = np.random.default_rng(7)
    n, beta = 400, np.array([1.0, 2.0])
    cover_r = cover_c = 0
    reps = 500
    for _ in range(reps):
        x = rng.standard_normal(n)
        y = beta[0] + beta[1] * x + np.abs(x) * 1.5 * rng.standard_normal(n)
        X = np.column_stack([x, np.ones(n)])
        b = np.linalg.lstsq(X, y, rcond=None)[0]
        u = y - X @ b
        est = VarEstimate(("y",), ("x", "const"), 0, b[:, None], np.array([[u @ u / (n - 2)]]),
                          n, residuals=u[:, None], xtx_inv=np.linalg.inv(X.T @ X))

        class _D:
            regressors = X
            nobs = n

        se_r = robust_se(est, _D)[0, 0]
        se_c = np.sqrt(u @ u / (n - 2) * est.xtx_inv[0, 0])
        z = stats.t.ppf(0.975, n - 2)
        cover_r += abs(b[0] - beta[1]) <= z * se_r
        cover_c += abs(b[0] - beta[1]) <= z * se_c
    assert 0.93 <= cover_r / reps <= 0.97
    assert cover_c / reps < 0.93


@pytest.mark.parametrize("coef, modulus, stable", [(0.5, 0.5, True), (1.0, 1.0, False),
                                                   (1.2, 1.2, False)])
def test_stability_univariate(coef, modulus, stable):
    est = VarEstimate.from_matrices([[[coef]]], [[1.0]])
    chk = stability_check(est)
    assert_allclose(chk.moduli, [modulus])
    assert chk.stable is stable


def test_stability_companion_var2():
    B = np.array([[[0.5, 0.1], [0.2, 0.3]], [[0.2, 0.0], [0.0, 0.1]]])
    chk = stability_check(VarEstimate.from_matrices(B, np.eye(2)))
    assert chk.moduli.shape == (4,)
    assert np.all(np.diff(chk.moduli) <= 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_stable_flag_agrees_with_simulation(seed):
    rng = np.random.default_rng(seed)
    B = rng.uniform(-0.6, 0.6, size=(2, 2, 2))
    est = VarEstimate.from_matrices(B, np.eye(2))
    chk = stability_check(est)
    if chk.spectral_radius > 1 - 1e-3 and chk.spectral_radius < 1 + 1e-3:
        return
    y = np.zeros((10_002, 2))
    y[:2] = rng.standard_normal((2, 2))
    for t in range(2, 10_002):
        y[t] = B[0] @ y[t - 1] + B[1] @ y[t - 2]
        if not np.isfinite(y[t]).all() or np.abs(y[t]).max() > 1e12:
            break
    bounded = np.isfinite(y).all() and np.abs(y).max() < 1e6
    assert bounded == chk.stable


@pytest.mark.parametrize("p, code", [(0.04, "**"), (0.0005, "†"), (0.2, ""), (0.005, "***"),
                                     (0.09, "*"), (0.1, ""), (0.01, "**")])
def test_star_codes(p, code):
    assert star_code(p) == code


def test_equation_summary_layout(varx_panel):
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    s = equation_summary(est, "y1")
    assert s.terms == est.regressor_names
    assert_allclose(s.se, est.se_robust[:, 0])
    text = s.to_text()
    for label in ("Adjusted R-square", "Included obs.", "Akaike Criterion", "Schwarz Criterion"):
        assert label in text
    assert "y1.L1" in text and "const" in text
    csv_text = s.to_csv()
    assert csv_text.splitlines()[0] == "equation,term,coef,se,p_value,stars"
    with pytest.raises(UnknownEquation):
        equation_summary(est, "nope")


def test_equation_summary_criteria_match_statsmodels(varx_panel):
    sm = pytest.importorskip("statsmodels.api")
    _, _, model, design = varx_panel
    est = fit_varx_ols(design, model)
    s = equation_summary(est, "y2", robust=False)
    res = sm.OLS(design.response[:, 1], design.regressors).fit()
    assert_allclose(s.aic, res.aic, rtol=1e-10)
    assert_allclose(s.sic, res.bic, rtol=1e-10)
    assert_allclose(s.adj_r2, res.rsquared_adj, rtol=1e-10)
    assert_allclose(s.p_values, res.pvalues, rtol=1e-6, atol=1e-300)
