import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bpvarx.estimation import VarEstimate, fit_varx_ols
from bpvarx.irf import accumulate_irf, girf, long_run_multiplier
from bpvarx.model import ModelSpec
from bpvarx.panel import build_design
from bpvarx.simgen import DgpSpec, RegimeSpec, simulate_panel
from bpvarx.switching import RegimeModel, fit_ms_varx, regime_irf

B0 = np.array([[0.5, 0.1], [0.0, 0.4]])
B1 = np.array([[-0.3, 0.0], [0.2, -0.2]])
P95 = np.array([[0.95, 0.05], [0.05, 0.95]])
MODEL = ModelSpec(("y1", "y2"), lags=1)


def two_regime(seed=3, n_firms=100, n_years=20, B1=B1, c1=(1.5, 1.0)):
    spec = DgpSpec(B0, 0.5 * np.eye(2), np.array([-1.0, 0.0]),
                   regimes=RegimeSpec(B1, np.array(c1), 0.5 * np.eye(2), P95),
                   n_firms=n_firms, n_years=n_years, seed=seed)
    ds, truth = simulate_panel(spec)
    design = build_design(ds, MODEL)
    years = design.year - spec.start_year
    states = np.array([truth.regime_path[f][y] for f, y in zip(design.firm, years)])
    return design, states, truth


@pytest.fixture(scope="module")
def fitted():
    design, states, truth = two_regime()
    return design, states, truth, fit_ms_varx(design, MODEL, restarts=5, seed=1)


def test_two_regime_classification(fitted):
    design, states, _, res = fitted
    acc = np.mean(res.classify() == states)
    assert max(acc, 1 - acc) >= 0.9


def test_invariants(fitted):
    _, _, _, res = fitted
    assert_allclose(res.transition.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((res.smoothed >= 0) & (res.smoothed <= 1))
    assert_allclose(res.smoothed.sum(axis=1), 1.0, atol=1e-12)
    path = np.array(res.loglik_path)
    assert np.all(np.diff(path) >= -1e-10 * np.maximum(1, np.abs(path[1:])))
    assert res.converged
    assert len(res.restart_logliks) == 5
    assert res.loglik == max(res.restart_logliks)


def test_canonical_order_by_first_intercept(fitted):
    _, _, _, res = fitted
    c = [e.intercept[0] for e in res.estimates]
    assert c[0] < c[1]
    assert_allclose(res.estimates[0].lag_matrices[0], B0, atol=0.1)
    assert_allclose(res.estimates[1].lag_matrices[0], B1, atol=0.1)


def test_deterministic_given_seed(fitted):
    design, _, _, res = fitted
    again = fit_ms_varx(design, MODEL, restarts=5, seed=1)
    assert_array_equal(again.smoothed, res.smoothed)
    assert again.to_csv() == res.to_csv()


def test_single_regime_reduces_to_ols():
    design, _, _ = two_regime(n_firms=40)
    one = fit_ms_varx(design, MODEL, regimes=1)
    ols = fit_varx_ols(design, MODEL)
    assert_allclose(one.estimates[0].coef, ols.coef, atol=1e-6)
    assert one.n_regimes == 1


@pytest.mark.filterwarnings("ignore:.*restarts did not converge")
def test_single_regime_data_nested_check():
    from bpvarx.simgen import DgpSpec
    spec = DgpSpec(B0, 0.5 * np.eye(2), np.array([-1.0, 0.0]), n_firms=100, n_years=20, seed=8)
    ds, _ = simulate_panel(spec)
    design = build_design(ds, MODEL)
    one = fit_ms_varx(design, MODEL, regimes=1)
    two = fit_ms_varx(design, MODEL, restarts=5, seed=2)
    # 2 * (6 coefficients * 2 equations + 3 covariance terms) + 2 transition parameters
    extra = 2 * 9 + 2
    assert two.loglik >= one.loglik - 1e-6
    assert two.loglik - one.loglik <= extra
    dominant = int(np.argmax(two.smoothed.mean(axis=0)))
    ols = fit_varx_ols(design, MODEL)
    dist = np.abs(two.estimates[dominant].coef - ols.coef) / ols.se
    assert dist.max() < 3.0


def test_csv_export(fitted):
    design, _, _, res = fitted
    lines = res.to_csv().splitlines()
    assert lines[0] == "firm_id,year,p_regime0,p_regime1"
    assert len(lines) == design.nobs + 1


def test_regime_irf_delegates():
    est = VarEstimate.from_matrices(B0, 0.5 * np.eye(2), intercept=np.zeros(2),
                                    endog_names=("y1", "y2"))
    rm = RegimeModel((est, est), P95, np.full((1, 2), 0.5), np.full((1, 2), 0.5), 0.0, (0.0,),
                     1, True, 1e-8, (0.0,), np.array(["a"]), np.array([2001]))
    assert_array_equal(regime_irf(rm, 0, 8).values, girf(est, 8).values)
    assert_array_equal(regime_irf(rm, 0, 8).values, regime_irf(rm, 1, 8).values)
    with pytest.raises(ValueError):
        regime_irf(rm, 2)


def test_unstable_regime_flagged():
    est = VarEstimate.from_matrices(np.diag([1.2, 0.1]), np.eye(2))
    rm = RegimeModel((est,), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)), 0.0, (0.0,), 1,
                     True, 1e-8, (0.0,), np.array(["a"]), np.array([2001]))
    assert regime_irf(rm, 0, 5).stable is False


def test_persistence_ordering_of_accumulated_irf():
    low = np.array([[0.1, 0.0], [0.0, 0.1]])
    high = np.array([[0.7, 0.0], [0.0, 0.6]])
    spec = DgpSpec(low, 0.3 * np.eye(2), np.array([-2.0, 0.0]),
                   regimes=RegimeSpec(high, np.array([2.0, 0.5]), 0.3 * np.eye(2), P95),
                   n_firms=100, n_years=20, seed=5)
    ds, _ = simulate_panel(spec)
    design = build_design(ds, MODEL)
    res = fit_ms_varx(design, MODEL, restarts=5, seed=0)
    acc = [accumulate_irf(regime_irf(res, s, 100)) for s in range(2)]
    lim = [a.values[-1, 0, 0] for a in acc]
    assert lim[1] > lim[0]
    for s in range(2):
        est = res.estimates[s]
        impact = acc[s].values[0].T
        assert_allclose(acc[s].values[-1].T, long_run_multiplier(est) @ impact, atol=1e-6)
