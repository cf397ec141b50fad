import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from hypothesis import given, settings, strategies as st

from bpvarx.bayes import build_niw_prior, sample_posterior
from bpvarx.errors import AlreadyAccumulated, NoStableDraws, SingularCovariance
from bpvarx.estimation import VarEstimate, stability_check
from bpvarx.irf import (IrfResult, accumulate_irf, compute_irf, girf, irf_bands,
                        long_run_multiplier, ma_coefficients, oirf)

from conftest import simulate_varx

SIGMA = np.array([[1.0, 0.4, 0.2], [0.4, 2.0, -0.3], [0.2, -0.3, 0.5]])
B2 = np.array([[[0.4, 0.1, 0.0], [0.05, 0.3, 0.1], [0.0, -0.1, 0.2]],
               [[0.1, 0.0, 0.05], [0.0, 0.1, 0.0], [0.02, 0.0, 0.1]]])


def var_estimate(B=B2, sigma=SIGMA):
    return VarEstimate.from_matrices(B, sigma, endog_names=("a", "b", "c")[: sigma.shape[0]])


def test_ma_univariate_geometric():
    phi = ma_coefficients(VarEstimate.from_matrices([[[0.5]]], [[1.0]]), 12)
    assert_allclose(phi[:, 0, 0], 0.5 ** np.arange(13), rtol=1e-14)


def test_ma_zero_lags():
    phi = ma_coefficients(VarEstimate.from_matrices(np.zeros((2, 3, 3)), np.eye(3)), 5)
    assert_array_equal(phi[0], np.eye(3))
    assert_array_equal(phi[1:], 0.0)


def test_ma_matches_impulse_simulation():
    est = var_estimate()
    H = 15
    phi = ma_coefficients(est, H)
    for j in range(3):
        y = np.zeros((H + 1, 3))
        for t in range(H + 1):
            y[t] = np.eye(3)[j] if t == 0 else 0.0
            for lag in (1, 2):
                if t - lag >= 0:
                    y[t] += B2[lag - 1] @ y[t - lag]
        assert_allclose(phi[:, :, j], y, atol=1e-10)


def test_diagonal_var1_closed_forms():
    est = VarEstimate.from_matrices(np.diag([0.5, 0.8]), np.eye(2))
    H = 20
    h = np.arange(H + 1)
    for res in (oirf(est, H), girf(est, H)):
        assert_allclose(res.values[:, 0, 0], 0.5 ** h, atol=1e-10)
        assert_allclose(res.values[:, 1, 1], 0.8 ** h, atol=1e-10)
        assert_allclose(res.values[:, 0, 1], 0.0, atol=1e-10)
        assert_allclose(res.values[:, 1, 0], 0.0, atol=1e-10)


def test_diagonal_var1_closed_forms_scaled_shocks():
    sd = np.array([2.0, 0.3])
    est = VarEstimate.from_matrices(np.diag([0.5, 0.8]), np.diag(sd ** 2))
    h = np.arange(11)
    for res in (oirf(est, 10), girf(est, 10)):
        assert_allclose(res.values[:, 0, 0], sd[0] * 0.5 ** h, atol=1e-10)
        assert_allclose(res.values[:, 1, 1], sd[1] * 0.8 ** h, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 4.0), min_size=3, max_size=3), st.integers(0, 1000))
def test_girf_equals_oirf_under_diagonal_sigma(variances, seed):
    B = np.random.default_rng(seed).uniform(-0.3, 0.3, (2, 3, 3))
    est = var_estimate(B, np.diag(variances))
    assert_allclose(girf(est, 12).values, oirf(est, 12).values, rtol=0, atol=1e-12)


def test_oirf_impact_is_cholesky_column():
    est = var_estimate()
    res = oirf(est, 3)
    P = np.linalg.cholesky(SIGMA)
    assert_allclose(res.values[0], P.T, atol=1e-14)
    # first variable does not respond on impact to later shocks
    assert_allclose(res.values[0, 1:, 0], 0.0, atol=0)


def test_oirf_ordering_matches_permutation_oracle():
    est = var_estimate()
    order = ("c", "a", "b")
    res = oirf(est, 6, ordering=order)
    perm = [2, 0, 1]
    # oracle: relabel the system in the new order, compute natural-order OIRF, map back
    Pm = np.eye(3)[perm]
    Bp = np.stack([Pm @ b @ Pm.T for b in B2])
    est_p = VarEstimate.from_matrices(Bp, Pm @ SIGMA @ Pm.T, endog_names=order)
    oracle = oirf(est_p, 6).values
    for jn in range(3):
        for in_ in range(3):
            j, i = perm[jn], perm[in_]
            assert_allclose(res.values[:, j, i], oracle[:, jn, in_], atol=1e-12)
    assert not np.allclose(res.values[0], oirf(est, 6).values[0])


def test_oirf_bad_ordering():
    with pytest.raises(ValueError):
        oirf(var_estimate(), 3, ordering=("a", "b", "zz"))


def test_singular_covariance():
    est = var_estimate(sigma=np.ones((3, 3)))
    with pytest.raises(SingularCovariance):
        girf(est, 3)
    with pytest.raises(SingularCovariance):
        oirf(est, 3)


def test_girf_own_impact_is_sd():
    res = girf(var_estimate(), 4)
    assert_allclose(np.diag(res.values[0]), np.sqrt(np.diag(SIGMA)), rtol=0, atol=0)


def test_girf_permutation_relabels():
    est = var_estimate()
    perm = [1, 2, 0]
    Pm = np.eye(3)[perm]
    est_p = VarEstimate.from_matrices(np.stack([Pm @ b @ Pm.T for b in B2]), Pm @ SIGMA @ Pm.T,
                                      endog_names=tuple(np.array(["a", "b", "c"])[perm]))
    a, b = girf(est, 8).values, girf(est_p, 8).values
    assert_allclose(b, a[:, perm][:, :, perm], atol=1e-13)


@pytest.mark.parametrize("kind", ["generalized", "orthogonalized"])
def test_scaling_residuals_scales_irf(kind):
    c = 3.7
    a = compute_irf(var_estimate(), 6, kind).values
    b = compute_irf(var_estimate(sigma=SIGMA * c ** 2), 6, kind).values
    assert_allclose(b, c * a, rtol=1e-12, atol=1e-15)


def test_girf_decays():
    est = var_estimate()
    rho = stability_check(est).spectral_radius
    H = int(np.ceil(np.log(1e-9) / np.log(rho))) + 10
    v = np.abs(girf(est, H).values)
    assert v[-1].max() < 1e-6 * v.max()


def test_accumulate_zero_and_geometric():
    z = IrfResult(np.zeros((5, 2, 2)), "generalized", ("a", "b"))
    assert_array_equal(accumulate_irf(z).values, 0.0)
    res = accumulate_irf(girf(VarEstimate.from_matrices([[[0.5]]], [[1.0]]), 60))
    assert_allclose(res.values[-1, 0, 0], 2.0, rtol=1e-12)
    assert res.accumulated and res.kind == "generalized"


def test_accumulate_is_exact_cumsum():
    base = girf(var_estimate(), 10)
    acc = accumulate_irf(base)
    assert_array_equal(acc.values, np.cumsum(base.values, axis=0))
    with pytest.raises(AlreadyAccumulated):
        accumulate_irf(acc)


@pytest.mark.parametrize("kind", ["generalized", "orthogonalized"])
def test_accumulated_limit_is_long_run_multiplier(kind):
    est = var_estimate()
    res = accumulate_irf(compute_irf(est, 200, kind))
    impact = res.values[0].T  # columns = impulses
    assert_allclose(res.values[-1].T, long_run_multiplier(est) @ impact, atol=1e-6)


def test_csv_long_format():
    text = girf(var_estimate(), 2).to_csv().splitlines()
    assert text[0] == "horizon,impulse,response,value,lower,upper"
    assert len(text) == 1 + 3 * 3 * 3


# -- bands ------------------------------------------------------------------


class _Draws:
    def __init__(self, template, coef, sigma):
        self.template, self.coef, self.sigma = template, coef, sigma


def test_single_draw_band_collapses():
    est = var_estimate()
    d = _Draws(est, est.coef[None], est.sigma[None])
    res = irf_bands(d, 8)
    assert_allclose(res.lower, res.values)
    assert_allclose(res.upper, res.values)
    assert_allclose(res.values, girf(est, 8).values, atol=1e-13)


@pytest.fixture(scope="module")
def posterior():
    _, _, model, design = simulate_varx(n_firms=150, seed=4)
    return sample_posterior(design, build_niw_prior(model, design, 100.0), draws=400, seed=1)


def test_nested_bands(posterior):
    wide = irf_bands(posterior, 10, quantiles=(0.025, 0.5, 0.975))
    narrow = irf_bands(posterior, 10, quantiles=(0.16, 0.5, 0.84))
    assert np.all(wide.lower <= narrow.lower + 1e-15)
    assert np.all(narrow.upper <= wide.upper + 1e-15)
    assert np.all(narrow.lower <= narrow.values) and np.all(narrow.values <= narrow.upper)
    assert_allclose(narrow.values, wide.values)


def test_accumulated_bands_ordered(posterior):
    res = irf_bands(posterior, 10, kind="oirf", accumulate=True)
    assert res.accumulated and res.kind == "orthogonalized"
    assert np.all(res.lower <= res.values) and np.all(res.values <= res.upper)


def test_explosive_draws_excluded(posterior):
    est = posterior.template
    bad = est.coef.copy()
    bad[0, 0] = 1.5  # own first lag of y1
    coef = np.concatenate([posterior.coef[:10], bad[None]])
    sig = np.concatenate([posterior.sigma[:10], est.sigma[None]])
    res = irf_bands(_Draws(est, coef, sig), 5)
    assert_allclose(res.excluded_fraction, 1 / 11)
    with pytest.raises(NoStableDraws):
        irf_bands(_Draws(est, bad[None], est.sigma[None]), 5)


@pytest.mark.slow
def test_band_coverage_of_true_irf():
    B = np.array([[0.5, 0.1], [0.2, 0.3]])
    cover = []
    for rep in range(200):
        _, truth, model, design = simulate_varx(B, n_exog=0, n_firms=60, n_years=8, seed=rep)
        draws = sample_posterior(design, build_niw_prior(model, design, 1e4), draws=400,
                                 seed=rep)
        band = irf_bands(draws, 6, quantiles=(0.05, 0.5, 0.95))
        true = girf(truth.estimate(), 6).values
        cover.append(np.mean((band.lower <= true) & (true <= band.upper)))
    assert 0.85 <= np.mean(cover) <= 0.95
