import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bpvarx.errors import RejectedSpec
from bpvarx.panel import VariableSpec, derive_variables
from bpvarx.simgen import (DgpSpec, ExogGenerator, RegimeSpec, make_replication_dataset,
                           replication_category_map, simulate_panel, stationary_distribution)


def test_zero_dgp_gives_zero_panel():
    spec = DgpSpec(np.zeros((1, 2, 2)), np.zeros((2, 2)), n_firms=5, n_years=4)
    ds, _ = simulate_panel(spec)
    assert_array_equal(ds.frame[["y1", "y2"]].to_numpy(), 0.0)
    assert ds.n_obs == 20


def test_same_seed_identical():
    spec = DgpSpec(np.array([[0.5]]), np.eye(1), exog=(ExogGenerator("x", "firm-bernoulli",
                                                                     (0.3,)),),
                   exog_coef=np.array([[1.0]]), n_firms=20, missingness="random-gap", seed=4)
    a, ta = simulate_panel(spec)
    b, tb = simulate_panel(spec)
    assert a == b
    assert ta.to_json() == tb.to_json()
    c, _ = simulate_panel(DgpSpec(np.array([[0.5]]), np.eye(1), n_firms=20, seed=5))
    assert not a == c


def test_lag_one_autocorrelation():
    spec = DgpSpec(0.5 * np.eye(2), np.eye(2), n_firms=300, n_years=10, seed=1)
    ds, _ = simulate_panel(spec)
    for name in ("y1", "y2"):
        y = ds.frame[name].to_numpy().reshape(300, 10)
        r = np.corrcoef(y[:, 1:].ravel(), y[:, :-1].ravel())[0, 1]
        assert abs(r - 0.5) < 0.05


def test_truth_record_reproduces_planted_irf():
    from bpvarx.irf import girf
    B = np.array([[[0.4, 0.1], [0.0, 0.3]], [[0.1, 0.0], [0.05, 0.1]]])
    S = np.array([[1.0, 0.3], [0.3, 0.5]])
    _, truth = simulate_panel(DgpSpec(B, S, n_firms=3, seed=1))
    record = json.loads(truth.to_json())
    rebuilt = np.array(record["lag_matrices"])
    assert_array_equal(rebuilt, B)
    assert_array_equal(np.array(record["sigma"]), S)
    # independent recursion from the exported matrices
    phi = [np.eye(2)]
    for h in range(1, 11):
        phi.append(sum(rebuilt[l - 1] @ phi[h - l] for l in range(1, min(h, 2) + 1)))
    expect = np.stack([p @ S / np.sqrt(np.diag(S)) for p in phi])
    assert_allclose(girf(truth.estimate(), 10).values, expect.transpose(0, 2, 1), atol=1e-14)


def test_unstable_rejected():
    with pytest.raises(RejectedSpec):
        simulate_panel(DgpSpec(np.array([[1.1]]), np.eye(1)))
    ds, _ = simulate_panel(DgpSpec(np.array([[1.0]]), np.eye(1), unit_root=True, n_firms=3))
    assert ds.n_obs == 30


def test_missingness_patterns():
    base = dict(lag_matrices=np.array([[0.3]]), sigma=np.eye(1), n_firms=200, n_years=10)
    gap, _ = simulate_panel(DgpSpec(missingness="random-gap", gap_rate=0.2, **base))
    stag, _ = simulate_panel(DgpSpec(missingness="staggered-entry", **base))
    assert 0.7 < gap.n_obs / 2000 < 0.9
    assert gap.gapped_firms()
    assert stag.n_obs < 2000 and not stag.gapped_firms()


def test_exog_families():
    gens = (ExogGenerator("u", "uniform", (2.0, 3.0)), ExogGenerator("b", "bernoulli", (0.5,)),
            ExogGenerator("fn", "firm-normal", (0.0, 1.0)),
            ExogGenerator("fc", "firm-category", (4,)), ExogGenerator("age", "age", (1, 10)))
    spec = DgpSpec(np.array([[0.2]]), np.eye(1), exog=gens, n_firms=50, n_years=6, seed=2)
    ds, _ = simulate_panel(spec)
    f = ds.frame
    assert f["u"].between(2, 3).all()
    assert set(f["b"].unique()) <= {0.0, 1.0}
    assert (f.groupby("firm_id")["fn"].nunique() == 1).all()
    assert set(f["fc"].unique()) <= {1.0, 2.0, 3.0, 4.0}
    assert (f.groupby("firm_id")["age"].diff().dropna() == 1).all()
    with pytest.raises(ValueError):
        ExogGenerator("x", "poisson")


def test_regime_path_and_truth():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    spec = DgpSpec(np.array([[0.2]]), np.eye(1), np.zeros(1),
                   regimes=RegimeSpec(np.array([[0.6]]), np.ones(1), np.eye(1), P),
                   n_firms=300, n_years=10, seed=3)
    ds, truth = simulate_panel(spec)
    states = np.concatenate(list(truth.regime_path.values()))
    assert abs(states.mean() - stationary_distribution(P)[1]) < 0.05
    assert_allclose(truth.estimate(1).lag_matrices[0], [[0.6]])
    record = json.loads(truth.to_json())
    assert record["regime_1"]["transition"] == P.tolist()


@pytest.fixture(scope="module")
def replication():
    return make_replication_dataset()


def test_replication_dataset_shape(replication):
    ds = replication
    assert ds.n_firms == 1200
    assert 8500 <= ds.n_obs <= 9500
    assert ds.years[0] == 2001 and ds.years[-1] == 2009
    f = ds.frame
    assert 0.55 < f["Rank"].notna().mean() < 0.75
    assert f["Rank"].dropna().between(1, 500).all()
    assert ((f["VI"] == 0).sum() > 0) and ((f["VI"] == 100).sum() > 0)
    assert f["VI"].between(0, 100).all()
    for col in ("BDT", "Age", "International", "Financing", "Industry", "Incentives",
                "Royalty", "Selection", "Socialization", "Ad", "FranchiseFee"):
        assert f[col].notna().all()
    assert len(ds.gapped_firms()) > 0


def test_replication_dataset_deterministic(replication):
    assert make_replication_dataset() == replication
    assert not make_replication_dataset(seed=7, n_firms=50) == make_replication_dataset(
        seed=8, n_firms=50)


def test_replication_vi_derivation(replication):
    out = derive_variables(replication, [VariableSpec("VI2", "endogenous", "percent-ratio",
                                                      ("company_owned", "total_outlets"))])
    assert_allclose(out.column("VI2"), replication.column("VI"))


def test_category_map():
    cmap = replication_category_map()
    assert len(cmap) == 44
    assert set(cmap.values()) == {"retail", "service"}
