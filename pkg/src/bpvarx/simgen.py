"""Synthetic panels with known ground truth.

:func:`simulate_panel` draws a pooled (optionally regime-switching) VARX
panel from a :class:`DgpSpec`. :func:`make_replication_dataset` builds a
franchise-style panel with every raw column the replication configuration
needs and planted effect shapes (sign, lag profile, asymmetry, moderation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import RejectedSpec
from .estimation import VarEstimate, stability_check
from .panel import PanelDataset

FAMILIES = ("normal", "uniform", "bernoulli", "firm-normal", "firm-uniform", "firm-bernoulli",
            "firm-category", "age")
MISSINGNESS = ("balanced", "random-gap", "staggered-entry")


@dataclass(frozen=True)
class ExogGenerator:
    """Distribution of one control.

    ``firm-*`` families are constant within a firm; ``age`` starts at a
    firm-level integer drawn uniformly from ``params`` and grows by one per
    year; ``firm-category`` draws an integer code in ``1..params[0]``.
    """

    name: str
    family: str = "normal"
    params: tuple[float, ...] = (0.0, 1.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")

    def draw(self, rng: np.random.Generator, n_periods: int) -> np.ndarray:
        f, p = self.family, self.params
        if f == "normal":
            return rng.normal(p[0], p[1], n_periods)
        if f == "uniform":
            return rng.uniform(p[0], p[1], n_periods)
        if f == "bernoulli":
            return (rng.random(n_periods) < p[0]).astype(float)
        if f == "firm-normal":
            return np.full(n_periods, rng.normal(p[0], p[1]))
        if f == "firm-uniform":
            return np.full(n_periods, rng.uniform(p[0], p[1]))
        if f == "firm-bernoulli":
            return np.full(n_periods, float(rng.random() < p[0]))
        if f == "firm-category":
            return np.full(n_periods, float(rng.integers(1, int(p[0]) + 1)))
        start = rng.integers(int(p[0]), int(p[1]) + 1)
        return start + np.arange(n_periods, dtype=float)


@dataclass(frozen=True)
class RegimeSpec:
    """Second-regime parameters and the 2x2 transition matrix.

    Regime 0 uses the parameters of the enclosing :class:`DgpSpec`.
    """

    lag_matrices: np.ndarray
    intercept: np.ndarray
    sigma: np.ndarray
    transition: np.ndarray
    exog_coef: np.ndarray | None = None


@dataclass(frozen=True)
class DgpSpec:
    lag_matrices: np.ndarray
    sigma: np.ndarray
    intercept: np.ndarray | None = None
    exog_coef: np.ndarray | None = None
    exog: tuple[ExogGenerator, ...] = ()
    n_firms: int = 100
    n_years: int = 10
    start_year: int = 2001
    missingness: str = "balanced"
    gap_rate: float = 0.1
    regimes: RegimeSpec | None = None
    unit_root: bool = False
    seed: int = 0
    burn_in: int = 50
    endog_names: tuple[str, ...] | None = None

    def __post_init__(self):
        B = np.asarray(self.lag_matrices, dtype=float)
        if B.ndim == 2:
            B = B[None]
        object.__setattr__(self, "lag_matrices", B)
        m = B.shape[1]
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float).reshape(m, m))
        c = np.zeros(m) if self.intercept is None else np.asarray(self.intercept, float)
        object.__setattr__(self, "intercept", c.reshape(m))
        k = len(self.exog)
        G = (np.zeros((m, k)) if self.exog_coef is None
             else np.asarray(self.exog_coef, float).reshape(m, k))
        object.__setattr__(self, "exog_coef", G)
        object.__setattr__(self, "exog", tuple(self.exog))
        names = tuple(self.endog_names or (f"y{i + 1}" for i in range(m)))
        object.__setattr__(self, "endog_names", names)
        if self.missingness not in MISSINGNESS:
            raise ValueError(f"missingness must be one of {MISSINGNESS}")

    @property
    def n_endog(self) -> int:
        return self.lag_matrices.shape[1]

    @property
    def exog_names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.exog)

    def regime_params(self, regime: int = 0):
        if regime == 0:
            return self.lag_matrices, self.intercept, self.sigma, self.exog_coef
        r = self.regimes
        B = np.asarray(r.lag_matrices, float)
        B = B[None] if B.ndim == 2 else B
        G = self.exog_coef if r.exog_coef is None else np.asarray(r.exog_coef, float)
        return B, np.asarray(r.intercept, float), np.asarray(r.sigma, float), G


@dataclass(frozen=True)
class GroundTruth:
    """Everything needed to recompute planted quantities."""

    spec: DgpSpec
    regime_path: dict[str, np.ndarray] = field(default_factory=dict)

    def estimate(self, regime: int = 0) -> VarEstimate:
        B, c, S, G = self.spec.regime_params(regime)
        return VarEstimate.from_matrices(B, S, intercept=c, exog_coef=G if G.size else None,
                                         endog_names=self.spec.endog_names,
                                         exog_names=self.spec.exog_names or None)

    def to_json(self) -> str:
        s = self.spec
        record = {
            "endog_names": list(s.endog_names),
            "exog_names": list(s.exog_names),
            "lag_matrices": s.lag_matrices.tolist(),
            "intercept": s.intercept.tolist(),
            "exog_coef": s.exog_coef.tolist(),
            "sigma": s.sigma.tolist(),
            "exog_generators": [{"name": g.name, "family": g.family, "params": list(g.params)}
                                for g in s.exog],
            "n_firms": s.n_firms, "n_years": s.n_years, "start_year": s.start_year,
            "missingness": s.missingness, "gap_rate": s.gap_rate, "seed": s.seed,
            "burn_in": s.burn_in, "unit_root": s.unit_root,
        }
        if s.regimes is not None:
            B, c, S, G = s.regime_params(1)
            record["regime_1"] = {"lag_matrices": B.tolist(), "intercept": c.tolist(),
                                  "sigma": S.tolist(), "exog_coef": G.tolist(),
                                  "transition": np.asarray(s.regimes.transition).tolist()}
            record["regime_path"] = {k: v.tolist() for k, v in self.regime_path.items()}
        return json.dumps(record, indent=2, sort_keys=True)


def _psd_factor(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(S)
        return V * np.sqrt(np.clip(w, 0, None))


def _check_stable(spec: DgpSpec) -> None:
    if spec.unit_root:
        return
    for r in range(1 if spec.regimes is None else 2):
        B, c, S, _ = spec.regime_params(r)
        if not stability_check(VarEstimate.from_matrices(B, S)).stable:
            raise RejectedSpec(f"regime {r} of the spec is not stable and unit_root is not set")


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, float)
    p01, p10 = P[0, 1], P[1, 0]
    if p01 + p10 == 0:
        return np.array([0.5, 0.5])
    return np.array([p10, p01]) / (p01 + p10)


def simulate_panel(spec: DgpSpec) -> tuple[PanelDataset, GroundTruth]:
    """Simulate a panel; deterministic given ``spec.seed``.

    Each firm gets its own random stream spawned from ``spec.seed``. The
    first ``burn_in`` periods are discarded.

    Raises
    ------
    RejectedSpec
        The lag polynomial is not stable and ``unit_root`` is false.
    """
    _check_stable(spec)
    N, T, m = spec.n_firms, spec.n_years, spec.n_endog
    burn = spec.burn_in
    n_per = burn + T
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(N)]
    k = len(spec.exog)
    X = np.zeros((N, n_per, k))
    E = [np.zeros((N, n_per, m)) for _ in range(1 if spec.regimes is None else 2)]
    states = np.zeros((N, n_per), dtype=int)
    factors = [_psd_factor(spec.regime_params(r)[2]) for r in range(len(E))]
    observed = np.ones((N, T), dtype=bool)
    for i, rng in enumerate(streams):
        for j, g in enumerate(spec.exog):
            X[i, :, j] = g.draw(rng, n_per)
        for r, F in enumerate(factors):
            E[r][i] = rng.standard_normal((n_per, m)) @ F.T
        if spec.regimes is not None:
            P = np.asarray(spec.regimes.transition, float)
            s = int(rng.random() < stationary_distribution(P)[1])
            u = rng.random(n_per)
            for t in range(n_per):
                if t:
                    s = int(u[t] < P[s, 1])
                states[i, t] = s
        if spec.missingness == "random-gap":
            observed[i, 1:] = rng.random(T - 1) >= spec.gap_rate
        elif spec.missingness == "staggered-entry":
            entry = rng.integers(0, max(T // 2, 1) + 1)
            observed[i, :entry] = False
    params = [spec.regime_params(r) for r in range(len(E))]
    L = spec.lag_matrices.shape[0]
    Y = np.zeros((N, n_per, m))
    for t in range(n_per):
        preds = []
        for r, (B, c, _, G) in enumerate(params):
            y = c + X[:, t] @ G.T + E[r][:, t]
            for lag in range(1, min(L, B.shape[0]) + 1):
                if t - lag >= 0:
                    y = y + Y[:, t - lag] @ B[lag - 1].T
            preds.append(y)
        Y[:, t] = preds[0] if len(preds) == 1 else np.where(states[:, t, None] == 1, *preds[::-1])
    Y, X, states = Y[:, burn:], X[:, burn:], states[:, burn:]
    firm_ids = [f"F{i:04d}" for i in range(N)]
    fi, ti = np.nonzero(observed)
    cols = {"firm_id": np.asarray(firm_ids)[fi], "year": spec.start_year + ti}
    for j, name in enumerate(spec.endog_names):
        cols[name] = Y[fi, ti, j]
    for j, name in enumerate(spec.exog_names):
        cols[name] = X[fi, ti, j]
    roles = {n: "endogenous" for n in spec.endog_names}
    roles.update({n: "exogenous" for n in spec.exog_names})
    dataset = PanelDataset(pd.DataFrame(cols), roles)
    path = {}
    if spec.regimes is not None:
        path = {firm_ids[i]: states[i, observed[i]] for i in range(N)}
    return dataset, GroundTruth(spec, path)


# ---------------------------------------------------------------------------
# replication dataset
# ---------------------------------------------------------------------------

REPLICATION_YEARS = (2001, 2009)
N_INDUSTRIES = 44
RETAIL_INDUSTRIES = tuple(range(1, 19))

# VI response (per unit of the differenced proxy) at lags 1..4; the effect is
# small at lag 1 and peaks at lag 3, so shocks take a year or two to bite.
VI_FROM_AD = (-0.5, -3.0, -4.0, -3.0)
VI_FROM_MEDIA = (0.0, -0.03, -0.05, -0.04)
VI_FROM_FEE = (0.0, -5.0, -8.0, -6.0)
AD_FROM_VI = (0.004, -0.004)


def replication_category_map() -> dict[float, str]:
    """Industry code to retail/service group used by the bundled config."""
    return {float(c): ("retail" if c in RETAIL_INDUSTRIES else "service")
            for c in range(1, N_INDUSTRIES + 1)}


def make_replication_dataset(seed: int = 2001, n_firms: int = 1200) -> PanelDataset:
    """Franchise-style unbalanced panel for 2001-2009.

    Raw columns: ``company_owned``, ``total_outlets`` (VI and lnSize derive
    from them), ``Ad`` (percent of sales), ``Rank`` (1-500 for ranked
    firm-years, missing otherwise), ``FranchiseFee`` (USD), and the controls
    ``BDT``, ``Age``, ``International``, ``Financing``, ``Industry``,
    ``Incentives``, ``Royalty``, ``Selection``, ``Socialization``. A ``VI``
    column is included as well.

    The planted system has VI falling two to four years after a rise in
    advertising fee, media recognition or franchise fee, a much weaker
    reverse effect of VI on the advertising fee, and a brand effect that is
    stronger for older and financing firms and weaker for international and
    retail firms.
    """
    rng_master = np.random.SeedSequence(seed)
    streams = [np.random.default_rng(s) for s in rng_master.spawn(n_firms)]
    y0, y1 = REPLICATION_YEARS
    T = y1 - y0 + 1
    burn = 50
    n_per = burn + T
    rows = []
    for i, rng in enumerate(streams):
        rows.extend(_replication_firm(i, rng, T, burn, n_per))
    frame = pd.DataFrame(rows)
    roles = {c: "exogenous" for c in frame.columns if c not in ("firm_id", "year")}
    for c in ("VI", "Ad", "Rank", "FranchiseFee"):
        roles[c] = "endogenous"
    return PanelDataset(frame, roles)


def _replication_firm(i, rng, T, burn, n_per):
    y0 = REPLICATION_YEARS[0]
    # firm characteristics
    industry = int(rng.integers(1, N_INDUSTRIES + 1))
    age0 = int(rng.integers(1, 41))
    bdt = float(rng.integers(0, 11))
    international = float(rng.random() < 0.3)
    financing = float(rng.random() < 0.4)
    incentives = float(rng.random() < 0.5)
    royalty_base = rng.uniform(2.0, 10.0)
    selection = float(rng.integers(0, 5))
    socialization = float(rng.integers(2, 11))
    ln_size0 = rng.normal(4.5, 1.0)
    ranked = rng.random() < 0.65
    pure = rng.random()
    industry_effect = 0.6 * np.sin(1.7 * industry)

    # moderation: firm age (at mid-sample) above 20 -> older half
    mult = (1.5 if age0 + T // 2 > 20 else 0.6)
    mult *= 0.6 if international else 1.0
    mult *= 0.7 if industry in RETAIL_INDUSTRIES else 1.0
    mult *= 1.3 if financing else 1.0

    shocks = rng.standard_normal((n_per, 4))
    sd = np.array([2.5, 0.25, 15.0, 0.1])
    corr = np.array([[1, 0, 0, 0], [0, 1, 0.1, 0.05], [0, 0.1, 1, 0.05], [0, 0.05, 0.05, 1]])
    eps = shocks @ np.linalg.cholesky(corr).T * sd

    ln_size = ln_size0 + 0.04 * (np.arange(n_per) - burn) + 0.03 * rng.standard_normal(n_per)
    age = age0 + np.arange(n_per, dtype=float) - burn
    royalty = np.clip(royalty_base + 0.2 * rng.standard_normal(n_per), 0, 15)
    controls = (0.05 * bdt - 0.01 * np.clip(age, 0, None) + 0.4 * international
                - 0.3 * financing - 0.5 * ln_size + 0.2 * incentives + 0.05 * royalty
                + 0.1 * selection + 0.05 * socialization + industry_effect)
    c_vi = 6.75
    vi = np.zeros(n_per)
    dad = np.zeros(n_per)
    dmed = np.zeros(n_per)
    dfee = np.zeros(n_per)
    vi[:4] = 30.0
    for t in range(4, n_per):
        vi[t] = (c_vi + controls[t] + 0.80 * vi[t - 1] + 0.05 * vi[t - 2] + eps[t, 0]
                 + mult * sum(VI_FROM_AD[l] * dad[t - 1 - l] for l in range(4))
                 + mult * sum(VI_FROM_MEDIA[l] * dmed[t - 1 - l] for l in range(4))
                 + mult * sum(VI_FROM_FEE[l] * dfee[t - 1 - l] for l in range(4)))
        dad[t] = (0.1 * dad[t - 1] + AD_FROM_VI[0] * vi[t - 1] + AD_FROM_VI[1] * vi[t - 2]
                  + eps[t, 1])
        dmed[t] = 0.1 * dmed[t - 1] + eps[t, 2]
        dfee[t] = 0.1 * dfee[t - 1] + eps[t, 3]

    obs = slice(burn, n_per)
    vi_obs = np.clip(vi[obs], 0, 100)
    if pure < 0.03:
        vi_obs[:] = 0.0
    elif pure < 0.04:
        vi_obs[:] = 100.0
    total = np.maximum(np.round(np.exp(ln_size[obs])), 8.0)
    owned = np.round(vi_obs / 100.0 * total)
    ad = np.clip(rng.uniform(1.0, 4.0) + np.cumsum(dad[obs]), 0.0, None)
    media = rng.uniform(80.0, 420.0) + np.cumsum(dmed[obs])
    rank = 501.0 - np.round(media)
    rank = np.where((rank >= 1) & (rank <= 500) & ranked, rank, np.nan)
    fee = np.round(np.exp(rng.normal(10.2, 0.4) + np.cumsum(dfee[obs])), -2)

    # presence: 60% of firms balanced, the rest enter late and/or exit early
    present = np.ones(T, dtype=bool)
    if rng.random() >= 0.6:
        entry = int(rng.integers(0, 5))
        exit_ = int(rng.integers(min(entry + 2, T - 1), T))
        present[:entry] = False
        present[exit_ + 1:] = False
    gaps = rng.random(T) < 0.01
    gaps[0] = False
    present &= ~gaps
    out = []
    for t in np.flatnonzero(present):
        out.append({
            "firm_id": f"FR{i:04d}", "year": y0 + int(t),
            "company_owned": owned[t], "total_outlets": total[t],
            "VI": 100.0 * owned[t] / total[t],
            "Ad": round(float(ad[t]), 3), "Rank": rank[t], "FranchiseFee": fee[t],
            "BDT": bdt, "Age": age[burn + t], "International": international,
            "Financing": financing, "Industry": float(industry), "Incentives": incentives,
            "Royalty": round(float(royalty[burn + t]), 2), "Selection": selection,
            "Socialization": socialization,
        })
    return out
