"""Panel unit-root tests: Levin-Lin-Chu and the Choi inverse-normal ADF combination."""

from __future__ import annotations

import warnings
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from ..errors import DataWarning, InsufficientSeries
from ..panel import PanelDataset
from .report import TestReport

DETERMINISTIC = ("none", "constant", "trend")
MIN_USABLE = 8

# Mean and standard deviation adjustments for the pooled t-statistic,
# indexed by the average effective sample length.
_LLC_T = np.array([25, 30, 35, 40, 45, 50, 60, 70, 80, 90, 100, 250, 500], dtype=float)
_LLC_ADJ = {
    "none": (np.array([0.004, 0.003, 0.002, 0.002, 0.001, 0.001, 0.001, 0, 0, 0, 0, 0, 0]),
             np.array([1.049, 1.035, 1.027, 1.021, 1.017, 1.014, 1.011, 1.008, 1.007, 1.006,
                       1.005, 1.001, 1.000])),
    "constant": (np.array([-0.554, -0.546, -0.541, -0.537, -0.533, -0.531, -0.527, -0.524,
                           -0.521, -0.520, -0.518, -0.509, -0.500]),
                 np.array([0.919, 0.889, 0.867, 0.850, 0.837, 0.826, 0.810, 0.798, 0.789,
                           0.782, 0.776, 0.742, 0.707])),
    "trend": (np.array([-0.703, -0.674, -0.653, -0.637, -0.624, -0.614, -0.598, -0.587,
                        -0.578, -0.571, -0.566, -0.533, -0.500]),
              np.array([1.003, 0.949, 0.906, 0.871, 0.842, 0.818, 0.780, 0.751, 0.728, 0.710,
                        0.695, 0.603, 0.500])),
}


def _check_det(deterministic: str) -> None:
    if deterministic not in DETERMINISTIC:
        raise ValueError(f"deterministic must be one of {DETERMINISTIC}")


def contiguous_series(dataset: PanelDataset, variable) -> dict[str, np.ndarray]:
    """Longest run of consecutive years with observed ``variable`` per firm.

    ``variable`` may be a sequence of names, in which case a year counts as
    observed only when every variable is, and each value is ``(T_i, k)``.
    """
    names = [variable] if isinstance(variable, str) else list(variable)
    frame = dataset.frame[["firm_id", "year", *names]]
    out = {}
    for firm, g in frame.groupby("firm_id", sort=True):
        y = g[names].to_numpy(float)
        yr = g["year"].to_numpy()
        ok = np.isfinite(y).all(axis=1)
        # a run breaks at a missing value or a skipped year
        brk = np.ones(len(y), dtype=bool)
        brk[1:] = ~ok[1:] | ~ok[:-1] | (np.diff(yr) != 1)
        starts = np.flatnonzero(brk)
        ends = np.append(starts[1:], len(y))
        best = max(((s0, e0) for s0, e0 in zip(starts, ends) if ok[s0]),
                   key=lambda r: r[1] - r[0], default=(0, 0))
        run = y[best[0]:best[1]]
        out[str(firm)] = run[:, 0] if isinstance(variable, str) else run
    return out


def _as_series(panel) -> dict[str, np.ndarray]:
    if isinstance(panel, Mapping):
        items = panel.items()
    else:
        items = ((f"{i}", s) for i, s in enumerate(panel))
    out = {}
    for k, s in items:
        s = np.asarray(s, dtype=float)
        out[str(k)] = s[np.isfinite(s)] if np.isnan(s).any() else s
    return out


def _det_columns(n: int, deterministic: str) -> np.ndarray:
    if deterministic == "none":
        return np.empty((n, 0))
    if deterministic == "constant":
        return np.ones((n, 1))
    return np.column_stack([np.ones(n), np.arange(1, n + 1, dtype=float)])


def _adf_arrays(y: np.ndarray, p: int, start: int, deterministic: str):
    """Response and regressors of the ADF regression with ``p`` lagged differences.

    ``start`` is the first usable index into ``dy``; rows run to the end.
    """
    dy = np.diff(y)
    idx = np.arange(start, len(dy))
    lagged = [dy[idx - l] for l in range(1, p + 1)]
    level = y[idx]  # y_{t-1} aligned with dy[idx] = y[idx+1] - y[idx]
    X = np.column_stack([level, *lagged, _det_columns(len(idx), deterministic)])
    return dy[idx], X


def _ols_t(resp, X):
    XtX = X.T @ X
    b = np.linalg.solve(XtX, X.T @ resp)
    u = resp - X @ b
    df = len(resp) - X.shape[1]
    s2 = u @ u / df
    se = np.sqrt(s2 * np.linalg.inv(XtX)[0, 0])
    return b, u, b[0] / se, s2


def _max_lag(T: int) -> int:
    return int(np.floor(T ** (1.0 / 3.0)))


def _select_adf_lag(y: np.ndarray, deterministic: str, max_lag: int | None, criterion="sic"):
    pmax = _max_feasible_lag(len(y), deterministic, max_lag)
    best, best_val = 0, np.inf
    for p in range(pmax + 1):
        resp, X = _adf_arrays(y, p, pmax, deterministic)
        n = len(resp)
        u = resp - X @ np.linalg.lstsq(X, resp, rcond=None)[0]
        pen = np.log(n) if criterion == "sic" else 2.0
        val = np.log(u @ u / n) + pen * X.shape[1] / n
        if val < best_val - 1e-12:
            best, best_val = p, val
    return best


def adf_statistic(y: np.ndarray, deterministic: str = "constant", lags: int | None = None,
                  max_lag: int | None = None) -> tuple[float, int, int]:
    """ADF t-statistic for one series, returning ``(t, lags, nobs)``.

    With ``lags=None`` the augmentation is chosen by SIC over
    ``0..floor(T**(1/3))`` on a common sample and the chosen model is refit on
    its full sample.
    """
    _check_det(deterministic)
    y = np.asarray(y, dtype=float)
    p = _select_adf_lag(y, deterministic, max_lag) if lags is None else lags
    resp, X = _adf_arrays(y, p, p, deterministic)
    _, _, t, _ = _ols_t(resp, X)
    return float(t), p, len(resp)


def _batch_design(y, p, start, deterministic):
    """Stacked ADF regressions for many series of equal length ``(R, T)``."""
    dy = np.diff(y, axis=1)
    idx = np.arange(start, dy.shape[1])
    n = len(idx)
    cols = [y[:, idx]] + [dy[:, idx - l] for l in range(1, p + 1)]
    det = _det_columns(n, deterministic)
    cols += [np.broadcast_to(det[:, j], (y.shape[0], n)) for j in range(det.shape[1])]
    return dy[:, idx], np.stack(cols, axis=2)


def _batch_fit(resp, X):
    XtX = np.einsum("rnk,rnl->rkl", X, X)
    Xty = np.einsum("rnk,rn->rk", X, resp)
    b = np.linalg.solve(XtX, Xty[..., None])[..., 0]
    u = resp - np.einsum("rnk,rk->rn", X, b)
    return b, (u ** 2).sum(axis=1), np.linalg.inv(XtX)[:, 0, 0]


def _max_feasible_lag(T: int, deterministic: str, max_lag: int | None) -> int:
    pmax = _max_lag(T) if max_lag is None else max_lag
    n_det = _det_columns(1, deterministic).shape[1]
    while pmax > 0 and (T - 1 - pmax) - (1 + pmax + n_det) < 4:
        pmax -= 1
    return pmax


@lru_cache(maxsize=256)
def _adf_null(T: int, lags: int | None, deterministic: str, max_lag: int | None = None,
              reps: int = 20000) -> np.ndarray:
    """Sorted finite-sample null draws of the ADF t-statistic for a random walk.

    With ``lags=None`` each draw repeats the SIC selection used on the data,
    so the resulting p-values account for the pretest.
    """
    key = [20011, T, 0 if lags is None else 1 + lags, DETERMINISTIC.index(deterministic),
           0 if max_lag is None else 1 + max_lag]
    rng = np.random.default_rng(np.random.SeedSequence(key))
    y = np.cumsum(rng.standard_normal((reps, T)), axis=1)
    if lags is not None:
        resp, X = _batch_design(y, lags, lags, deterministic)
        b, ssr, inv00 = _batch_fit(resp, X)
        n, k = X.shape[1:]
        return np.sort(b[:, 0] / np.sqrt(ssr / (n - k) * inv00))
    pmax = _max_feasible_lag(T, deterministic, max_lag)
    crit, tstat = [], []
    for p in range(pmax + 1):
        resp, X = _batch_design(y, p, pmax, deterministic)
        _, ssr, _ = _batch_fit(resp, X)
        n, k = X.shape[1:]
        crit.append(np.log(ssr / n) + np.log(n) * k / n)
        resp, X = _batch_design(y, p, p, deterministic)
        b, ssr, inv00 = _batch_fit(resp, X)
        n, k = X.shape[1:]
        tstat.append(b[:, 0] / np.sqrt(ssr / (n - k) * inv00))
    crit = np.stack(crit, axis=1)
    # first minimum, matching the tie rule of the single-series selection
    chosen = np.argmin(crit + 1e-12 * np.arange(pmax + 1), axis=1)
    return np.sort(np.stack(tstat, axis=1)[np.arange(reps), chosen])


def adf_pvalue(t: float, T: int, lags: int | None, deterministic: str,
               method: str = "simulated", max_lag: int | None = None) -> float:
    """Left-tail p-value of an ADF statistic from a series of length ``T``.

    ``"simulated"`` uses a cached Monte Carlo null for the exact sample
    length; ``lags=None`` means the augmentation was chosen by SIC and the
    null repeats that choice. ``"asymptotic"`` uses MacKinnon's response
    surfaces.
    """
    if method == "asymptotic":
        from statsmodels.tsa.adfvalues import mackinnonp
        reg = {"none": "n", "constant": "c", "trend": "ct"}[deterministic]
        return float(mackinnonp(t, regression=reg, N=1))
    if method != "simulated":
        raise ValueError("method must be 'simulated' or 'asymptotic'")
    null = _adf_null(int(T), None if lags is None else int(lags), deterministic, max_lag)
    k = np.searchsorted(null, t, side="right")
    return float((k + 1) / (len(null) + 1))


def _usable(y: np.ndarray, deterministic: str) -> int:
    return len(y) - 1 - _max_lag(len(y)) if len(y) > 1 else 0


def adf_fisher_test(panel, deterministic: str = "constant", pvalues: str = "simulated",
                    lags: int | None = None, max_lag: int | None = None) -> TestReport:
    """Choi inverse-normal combination of per-firm ADF p-values.

    ``Z = sum_i Phi^{-1}(p_i) / sqrt(N)`` is standard normal when every
    series has a unit root; small ``Z`` rejects. Firms too short for their
    own regression are dropped with a :class:`DataWarning`.

    Raises
    ------
    InsufficientSeries
        No firm is long enough.
    """
    _check_det(deterministic)
    series = _as_series(panel)
    short = [f for f, y in series.items() if _usable(y, deterministic) < MIN_USABLE]
    if short:
        warnings.warn(f"{len(short)} firm(s) too short for an ADF regression were dropped",
                      DataWarning, stacklevel=2)
    keep = {f: y for f, y in series.items() if f not in short}
    if not keep:
        raise InsufficientSeries("no firm has enough observations for an ADF regression", short)
    ps, used = [], []
    for y in keep.values():
        t, p, _ = adf_statistic(y, deterministic, lags=lags, max_lag=max_lag)
        ps.append(adf_pvalue(t, len(y), lags, deterministic, pvalues, max_lag) if pvalues ==
                  "simulated" else adf_pvalue(t, len(y), p, deterministic, pvalues))
        used.append(p)
    ps = np.clip(np.asarray(ps), 1e-12, 1 - 1e-12)
    z = float(stats.norm.ppf(ps).sum() / np.sqrt(len(ps)))
    return TestReport("adf-fisher", z, float(stats.norm.cdf(z)),
                      "all series contain a unit root",
                      {"deterministic": deterministic, "n_firms": len(ps),
                       "dropped_firms": sorted(short), "mean_lags": float(np.mean(used)),
                       "pvalues": pvalues, "combination": "inverse-normal"})


def _bandwidth(T: int, rule: str) -> int:
    if rule == "llc":
        return int(np.floor(3.21 * T ** (1.0 / 3.0)))
    if rule == "newey-west":
        return int(np.floor(4 * (T / 100.0) ** (2.0 / 9.0)))
    raise ValueError("bandwidth must be 'newey-west' or 'llc'")


def _long_run_variance(dy: np.ndarray, K: int) -> float:
    T = len(dy)
    v = dy @ dy / T
    for L in range(1, min(K, T - 1) + 1):
        w = 1.0 - L / (K + 1.0)
        v += 2.0 * w * (dy[L:] @ dy[:-L]) / T
    return v


def _llc_adjustment(T_tilde: float, deterministic: str) -> tuple[float, float]:
    mu, sd = _LLC_ADJ[deterministic]
    if T_tilde < _LLC_T[0]:
        warnings.warn(f"average sample length {T_tilde:.1f} is below the adjustment table; "
                      "using its first row", DataWarning, stacklevel=3)
    return float(np.interp(T_tilde, _LLC_T, mu)), float(np.interp(T_tilde, _LLC_T, sd))


def pooled_lag(series: Mapping[str, np.ndarray], deterministic: str) -> int:
    """Common ADF augmentation minimizing the panel-summed SIC.

    Every firm is evaluated on its own common sample (rows feasible at the
    largest candidate), and the candidate range is capped by the shortest
    firm.
    """
    pmax = min(_max_feasible_lag(len(y), deterministic, None) for y in series.values())
    best, best_val = 0, np.inf
    for p in range(pmax + 1):
        total = 0.0
        for y in series.values():
            resp, X = _adf_arrays(y, p, pmax, deterministic)
            n = len(resp)
            u = resp - X @ np.linalg.lstsq(X, resp, rcond=None)[0]
            total += n * np.log(u @ u / n) + X.shape[1] * np.log(n)
        if total < best_val - 1e-9:
            best, best_val = p, total
    return best


def _llc_statistic(keep: Mapping[str, np.ndarray], deterministic: str, lags: int | None,
                   bandwidth: str, lag_selection: str) -> tuple[float, dict]:
    """Bias-adjusted pooled t-statistic and its intermediate quantities."""
    common = lags
    if lags is None and lag_selection == "pooled":
        common = pooled_lag(keep, deterministic)
    e_all, v_all, ratios, p_used, Ts = [], [], [], [], []
    for y in keep.values():
        T = len(y)
        p = _select_adf_lag(y, deterministic, None) if common is None else common
        resp, X = _adf_arrays(y, p, p, deterministic)
        Z = X[:, 1:]
        if Z.shape[1]:
            proj = Z @ np.linalg.lstsq(Z, np.column_stack([resp, X[:, 0]]), rcond=None)[0]
            e, v = resp - proj[:, 0], X[:, 0] - proj[:, 1]
        else:
            e, v = resp, X[:, 0]
        d = (e @ v) / (v @ v)
        s_eps = np.sqrt(((e - d * v) ** 2).sum() / (len(e) - p - 1))
        e_all.append(e / s_eps)
        v_all.append(v / s_eps)
        dy = np.diff(y)
        if deterministic != "none":
            dy = dy - dy.mean()
        K = _bandwidth(T, bandwidth)
        ratios.append(np.sqrt(_long_run_variance(dy, K)) / s_eps)
        p_used.append(p)
        Ts.append(T)
    e, v = np.concatenate(e_all), np.concatenate(v_all)
    N = len(keep)
    T_bar = float(np.mean(Ts))
    T_tilde = T_bar - float(np.mean(p_used)) - 1.0
    delta = (v @ e) / (v @ v)
    s2 = ((e - delta * v) ** 2).sum() / (N * T_tilde)
    std_delta = np.sqrt(s2 / (v @ v))
    t_delta = delta / std_delta
    S_N = float(np.mean(ratios))
    mu, sigma = _llc_adjustment(T_tilde, deterministic)
    t_star = (t_delta - N * T_tilde * S_N * std_delta * mu / s2) / sigma
    return float(t_star), {"t_delta": float(t_delta), "delta": float(delta), "S_N": S_N,
                           "T_tilde": T_tilde, "mean_lags": float(np.mean(p_used))}


@lru_cache(maxsize=64)
def _llc_null(lengths: tuple[int, ...], deterministic: str, lags: int | None, bandwidth: str,
              lag_selection: str, reps: int = 2000) -> np.ndarray:
    """Sorted null draws of the adjusted LLC statistic for Gaussian random walks
    with the given firm lengths, repeating the lag choice of the data."""
    key = [20021, DETERMINISTIC.index(deterministic), 0 if lags is None else 1 + lags,
           ("pooled", "firm").index(lag_selection), ("newey-west", "llc").index(bandwidth),
           *lengths]
    rng = np.random.default_rng(np.random.SeedSequence(key))
    out = np.empty(reps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DataWarning)
        for r in range(reps):
            panel = {str(i): np.cumsum(rng.standard_normal(T)) for i, T in enumerate(lengths)}
            out[r] = _llc_statistic(panel, deterministic, lags, bandwidth, lag_selection)[0]
    return np.sort(out)


def llc_test(panel, deterministic: str = "constant", lags: int | None = None,
             bandwidth: str = "newey-west", drop_short: bool = False,
             lag_selection: str = "pooled", pvalues: str = "simulated") -> TestReport:
    """Levin-Lin-Chu test of a common unit root against a common stationary root.

    Per-firm ADF regressions yield orthogonalized, normalized residuals; their
    pooled regression t-statistic is bias-adjusted with the tabulated mean and
    standard deviation factors. The long-run variance of the differenced
    series uses a Bartlett kernel.

    Unless ``lags`` is given, the augmentation is chosen by SIC: one common
    order for the panel (``lag_selection="pooled"``) or one per firm
    (``"firm"``). Per-firm pretesting over-rejects in short panels.

    ``pvalues="normal"`` refers the adjusted statistic to the standard normal
    (left tail). The default ``"simulated"`` uses a cached Monte Carlo null
    for Gaussian random walks with the same firm lengths and the same lag
    choice, since the tabulated factors leave the statistic off-centre when
    ``T`` is around 25 or shorter.

    Raises
    ------
    InsufficientSeries
        Fewer than two firms, or (unless ``drop_short``) a firm with fewer
        than eight usable observations.
    """
    _check_det(deterministic)
    if pvalues not in ("simulated", "normal"):
        raise ValueError("pvalues must be 'simulated' or 'normal'")
    series = _as_series(panel)
    short = [f for f, y in series.items() if _usable(y, deterministic) < MIN_USABLE]
    if short and not drop_short:
        raise InsufficientSeries(f"{len(short)} firm(s) have fewer than {MIN_USABLE} usable "
                                 "observations", short)
    keep = {f: y for f, y in series.items() if f not in short}
    if len(keep) < 2:
        raise InsufficientSeries("the test needs at least two firms with enough observations",
                                 short)
    if lag_selection not in ("pooled", "firm"):
        raise ValueError("lag_selection must be 'pooled' or 'firm'")
    if bandwidth not in ("newey-west", "llc"):
        raise ValueError("bandwidth must be 'newey-west' or 'llc'")
    t_star, info = _llc_statistic(keep, deterministic, lags, bandwidth, lag_selection)
    if pvalues == "normal":
        p_value = float(stats.norm.cdf(t_star))
    else:
        lengths = tuple(sorted(len(y) for y in keep.values()))
        null = _llc_null(lengths, deterministic, lags, bandwidth, lag_selection)
        p_value = float((np.searchsorted(null, t_star, side="right") + 1) / (len(null) + 1))
    return TestReport("llc", t_star, p_value, "common unit root in every series",
                      {"deterministic": deterministic, "n_firms": len(keep), **info,
                       "bandwidth": bandwidth, "pvalues": pvalues,
                       "lag_selection": "fixed" if lags is not None else lag_selection,
                       "dropped_firms": sorted(short)})
