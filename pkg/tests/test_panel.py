import io
import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from bpvarx.errors import (DataWarning, DuplicateObservation, EmptyDesign, EmptySubsample,
                           InvalidRule, SchemaMismatch, UndefinedRatio)
from bpvarx.model import ModelSpec
from bpvarx.panel import (Balanced, ExcludeValues, PanelDataset, SplitCategory, SplitMedian,
                          TrimPercentile, VariableSpec, build_design, derive_variables,
                          load_panel, subsample)


def make_panel(rows, columns=("y",)):
    frame = pd.DataFrame(rows, columns=["firm_id", "year", *columns])
    return PanelDataset(frame)


def test_load_three_rows_one_firm():
    src = b"firm_id,year,y\nA,2001,1\nA,2002,2\nA,2003,3\n"
    ds = load_panel(src, [VariableSpec("y", "endogenous")])
    assert ds.n_firms == 1
    assert ds.n_obs == 3
    assert ds.roles == {"y": "endogenous"}


def test_load_duplicate_raises():
    src = b"firm_id,year,y\nA,2005,1\nA,2005,2\n"
    with pytest.raises(DuplicateObservation):
        load_panel(src)


def test_load_missing_column_raises():
    with pytest.raises(SchemaMismatch):
        load_panel(b"firm_id,y\nA,1\n")
    with pytest.raises(SchemaMismatch):
        load_panel(b"firm_id,year,y\nA,2001,1\n", [VariableSpec("z")])


def test_load_gapped_firm_is_accepted_and_flagged():
    src = b"firm_id,year,y\nA,2001,1\nA,2004,2\nB,2001,1\nB,2002,1\n"
    ds = load_panel(src)
    assert ds.n_obs == 4
    assert ds.gapped_firms() == ("A",)


def test_unparseable_cells_become_missing_with_count():
    src = "firm_id,year,y,z\nA,2001,abc,NA\nA,2002,,2\n"
    with pytest.warns(DataWarning):
        ds = load_panel(io.StringIO(src))
    assert np.isnan(ds.column("y")).all()
    assert ds.warnings == {"y": 1}
    assert np.isnan(ds.column("z")[0])


def test_csv_round_trip():
    ds = make_panel([["A", 2001, 0.1], ["A", 2002, np.nan], ["B", 2001, 1e-17]])
    text = ds.to_csv()
    assert "NA" in text
    assert load_panel(text.encode()) == ds


def test_reverse_rank_and_ratio_examples():
    ds = make_panel([["A", 2001, 1, 25, 100], ["A", 2002, 500, 0, 0]], ("rank", "own", "tot"))
    with pytest.warns(UndefinedRatio):
        out = derive_variables(ds, [
            VariableSpec("Media", transform="reverse-rank-501", source=("rank",)),
            VariableSpec("VI", transform="percent-ratio", source=("own", "tot")),
        ])
    assert out.column("Media").tolist() == [500.0, 1.0]
    assert out.column("VI")[0] == 25.0
    assert np.isnan(out.column("VI")[1])


def test_rank_out_of_range_is_missing():
    ds = make_panel([["A", 2001, 0], ["A", 2002, 501], ["A", 2003, 2.5]], ("rank",))
    with pytest.warns(DataWarning):
        out = derive_variables(ds, [VariableSpec("Media", transform="reverse-rank-501",
                                                 source=("rank",))])
    assert np.isnan(out.column("Media")).all()


def test_constant_series_differences():
    ds = make_panel([["A", 2001, 3], ["A", 2002, 3], ["A", 2003, 3]], ("Ad",))
    out = derive_variables(ds, [VariableSpec("dAd", transform="first-difference", source=("Ad",))])
    d = out.column("dAd")
    assert np.isnan(d[0]) and d[1:].tolist() == [0.0, 0.0]


def test_difference_is_missing_across_gap_and_firm_boundary():
    ds = make_panel([["A", 2001, 1], ["A", 2003, 4], ["B", 2004, 10], ["B", 2005, 12]])
    out = derive_variables(ds, [VariableSpec("d", transform="first-difference", source=("y",))])
    d = out.column("d")
    assert np.isnan(d[:3]).all()
    assert d[3] == 2.0


def test_log_nonpositive_is_missing():
    ds = make_panel([["A", 2001, 0.0], ["A", 2002, np.e]])
    with pytest.warns(DataWarning):
        out = derive_variables(ds, [VariableSpec("l", transform="natural-log", source=("y",))])
    assert np.isnan(out.column("l")[0]) and out.column("l")[1] == pytest.approx(1.0)


@given(st.integers(1, 500))
def test_reverse_rank_involution(r):
    ds = make_panel([["A", 2001, r]], ("rank",))
    once = derive_variables(ds, [VariableSpec("m", transform="reverse-rank-501", source=("rank",))])
    twice = derive_variables(once, [VariableSpec("r2", transform="reverse-rank-501", source=("m",))])
    assert twice.column("r2")[0] == r


def test_derive_independent_of_firm_order():
    rng = np.random.default_rng(0)
    rows = [[f, y, rng.normal()] for f in "ABCD" for y in range(2001, 2006)]
    a = make_panel(rows)
    b = make_panel(rows[::-1])
    spec = [VariableSpec("d", transform="first-difference", source=("y",))]
    assert derive_variables(a, spec) == derive_variables(b, spec)


# -- design ----------------------------------------------------------------

def test_design_six_years_lag_five_one_row():
    ds = make_panel([["A", 2000 + t, float(t)] for t in range(6)])
    d = build_design(ds, ModelSpec(("y",), lags=5))
    assert d.nobs == 1
    assert d.lagged.tolist() == [[4.0, 3.0, 2.0, 1.0, 0.0]]


def test_design_five_years_lag_five_empty():
    ds = make_panel([["A", 2000 + t, float(t)] for t in range(5)])
    with pytest.raises(EmptyDesign):
        build_design(ds, ModelSpec(("y",), lags=5))


def test_design_gap_rows():
    years = [2001, 2002, 2003, 2005, 2006, 2007, 2008, 2009]
    ds = make_panel([["A", y, float(y)] for y in years])
    d = build_design(ds, ModelSpec(("y",), lags=3))
    assert d.year.tolist() == [2008, 2009]


def test_design_lag_order_variable_major():
    rows = [["A", 2000 + t, 10.0 * t, 100.0 * t] for t in range(4)]
    ds = make_panel(rows, ("a", "b"))
    d = build_design(ds, ModelSpec(("a", "b"), lags=2))
    assert d.lag_names == ("a.L1", "a.L2", "b.L1", "b.L2")
    assert d.lagged[0].tolist() == [10.0, 0.0, 100.0, 0.0]
    assert d.exog_names == ("const",)


def _random_panel(rng, n_firms=6, years=range(2001, 2011), p_missing=0.1, p_drop=0.15):
    rows = []
    for f in range(n_firms):
        for y in years:
            if rng.random() < p_drop:
                continue
            vals = rng.normal(size=3)
            vals[rng.random(3) < p_missing] = np.nan
            rows.append([f"F{f}", y, *vals])
    return make_panel(rows, ("a", "b", "x"))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("L", [1, 2, 3])
def test_design_lags_match_brute_force(seed, L):
    rng = np.random.default_rng(seed)
    ds = _random_panel(rng)
    model = ModelSpec(("a", "b"), ("x",), lags=L)
    d = build_design(ds, model)
    lookup = {(f, int(y)): (a, b, x) for f, y, a, b, x in ds.frame.itertuples(index=False)}
    expected_rows = []
    for (f, y), (a, b, x) in sorted(lookup.items()):
        vals = [lookup.get((f, y - l)) for l in range(1, L + 1)]
        if any(v is None or not np.isfinite(v[:2]).all() for v in vals):
            continue
        if not np.isfinite([a, b, x]).all():
            continue
        expected_rows.append((f, y, [v[0] for v in vals] + [v[1] for v in vals]))
    assert d.index == [(f, y) for f, y, _ in expected_rows]
    assert np.array_equal(d.lagged, np.array([r for *_, r in expected_rows]))


def test_design_dummies_and_year_effects():
    rows = [[f, 2000 + t, float(t + i), float(i % 3)] for i, f in enumerate("ABCDEF")
            for t in range(4)]
    ds = make_panel(rows, ("y", "ind"))
    d = build_design(ds, ModelSpec(("y",), ("ind",), lags=1, categorical=("ind",),
                                   year_effects="dummies"))
    assert d.exog_names == ("ind[1]", "ind[2]", "year[2002]", "year[2003]", "const")
    d2 = build_design(ds, ModelSpec(("y",), ("ind",), lags=1))
    assert d2.exog_names == ("ind", "const")


def test_design_firm_effects_demeans_and_drops_constants():
    rows = [[f, 2000 + t, float(t * (i + 1)), float(i)] for i, f in enumerate("ABC")
            for t in range(5)]
    ds = make_panel(rows, ("y", "z"))
    d = build_design(ds, ModelSpec(("y",), ("z",), lags=1, firm_effects=True))
    assert d.exog_names == ()
    assert d.dropped_columns == ("z",)
    for f in "ABC":
        assert abs(d.response[d.firm == f].mean()) < 1e-12


# -- subsampling -----------------------------------------------------------

def test_balanced_rule():
    rows = [["A", y, 1.0] for y in (2001, 2002, 2003)] + \
           [["B", y, 1.0] for y in (2001, 2002, 2003)] + [["C", 2002, 1.0]]
    out = subsample(make_panel(rows), Balanced())
    assert out.firms == ("A", "B")
    assert subsample(out, Balanced()) == out


def test_exclude_values_rule():
    rows = [["A", 2001, 0.0], ["A", 2002, 12.0], ["A", 2003, 100.0]]
    out = subsample(make_panel(rows, ("VI",)), ExcludeValues("VI", (0.0, 100.0)))
    assert out.column("VI").tolist() == [12.0]
    with pytest.raises(EmptySubsample):
        subsample(make_panel(rows[:1], ("VI",)), ExcludeValues("VI", (0.0,)))


def _trim_oracle(values, p):
    s = sorted(values)
    k = int(len(s) * p // 100)
    return s[k:len(s) - k]


@pytest.mark.parametrize("p", [5, 10])
def test_trim_percentile_matches_sort_and_slice(p):
    rng = np.random.default_rng(1)
    vals = rng.permutation(np.linspace(0, 100, 100))
    rows = [[f"F{i}", 2001, v] for i, v in enumerate(vals)]
    out = subsample(make_panel(rows, ("VI",)), TrimPercentile("VI", p))
    assert sorted(out.column("VI").tolist()) == _trim_oracle(vals.tolist(), p)
    if p == 5:
        assert out.n_obs == 90


def test_trim_keeps_ties_on_interior_side():
    vals = [1.0] * 10 + list(range(2, 92))
    rows = [[f"F{i}", 2001, v] for i, v in enumerate(vals)]
    out = subsample(make_panel(rows, ("VI",)), TrimPercentile("VI", 5))
    # the 5 smallest are all ties with the boundary value 1.0 and stay in
    assert (out.column("VI") == 1.0).sum() == 10
    assert out.column("VI").max() == 86.0


@pytest.mark.parametrize("p", [0, 50, 60])
def test_trim_invalid_percentage(p):
    with pytest.raises(InvalidRule):
        subsample(make_panel([["A", 2001, 1.0]]), TrimPercentile("y", p))


def test_split_median_is_firm_level():
    rows = [[f, 2001 + t, float(i + t)] for i, f in enumerate("ABCD") for t in range(3)]
    groups = subsample(make_panel(rows, ("Age",)), SplitMedian("Age"))
    assert list(groups) == ["high", "low"]
    assert groups["low"].firms == ("A", "B")
    assert groups["high"].firms == ("C", "D")


def test_split_category_with_map_and_single_category():
    rows = [["A", 2001, 1.0], ["B", 2001, 2.0], ["C", 2001, 3.0]]
    ds = make_panel(rows, ("Industry",))
    groups = subsample(ds, SplitCategory("Industry", {1.0: "retail", 2.0: "retail",
                                                      3.0: "service"}))
    assert groups["retail"].firms == ("A", "B")
    assert groups["service"].firms == ("C",)
    single = subsample(ds, SplitCategory("Industry", {1.0: "x", 2.0: "x", 3.0: "x"}))
    assert list(single) == ["x"]
