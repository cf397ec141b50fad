"""Residual serial-correlation tests (multivariate portmanteau and per-equation Ljung-Box)."""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import InvalidOrder
from .report import TestReport, format_p


def _pairs(n: int, h: int, groups, times):
    """Row index pairs ``(t, t - h)`` within the same group and ``h`` periods apart."""
    t = np.arange(h, n)
    if groups is None:
        return t, t - h
    groups, times = np.asarray(groups), np.asarray(times)
    # rows are grouped and time-sorted; the partner may sit fewer than h rows back
    # when years are skipped, so match on (group, time - h)
    key = {(g, int(tt)): i for i, (g, tt) in enumerate(zip(groups.tolist(), times.tolist()))}
    cur, lag = [], []
    for i, (g, tt) in enumerate(zip(groups.tolist(), times.tolist())):
        j = key.get((g, int(tt) - h))
        if j is not None:
            cur.append(i)
            lag.append(j)
    return np.asarray(cur, dtype=int), np.asarray(lag, dtype=int)


def _check(n: int, h: int, fitted_lags: int) -> None:
    if h <= fitted_lags:
        raise InvalidOrder(f"order {h} must exceed the fitted lag count {fitted_lags}")
    if n <= h:
        raise InvalidOrder(f"{n} residual rows cannot support order {h}")


def ljung_box(residuals: np.ndarray, h: int = 10, fitted_lags: int = 0, groups=None,
              times=None) -> TestReport:
    """Multivariate portmanteau test of no residual autocorrelation up to order ``h``.

    ``Q = T**2 * sum_k tr(C_k' C_0^{-1} C_k C_0^{-1}) / n_k`` with ``C_k`` the
    lag-``k`` residual autocovariance and ``n_k`` the number of contributing
    pairs (``T - k`` for a single series). The reference is chi-square with
    ``m**2 * (h - fitted_lags)`` degrees of freedom. With ``groups`` and
    ``times``, only pairs within a firm exactly ``k`` periods apart count.
    """
    U = np.asarray(residuals, dtype=float)
    U = U[:, None] if U.ndim == 1 else U
    T, m = U.shape
    _check(T, h, fitted_lags)
    U = U - U.mean(axis=0)
    C0 = U.T @ U / T
    C0inv = np.linalg.inv(C0)
    q, n_pairs = 0.0, []
    for k in range(1, h + 1):
        cur, lag = _pairs(T, k, groups, times)
        n_pairs.append(len(cur))
        if len(cur) == 0:
            continue
        Ck = U[cur].T @ U[lag] / T
        q += T ** 2 * np.trace(Ck.T @ C0inv @ Ck @ C0inv) / len(cur)
    df = m * m * (h - fitted_lags)
    return TestReport("ljung-box", q, float(stats.chi2.sf(q, df)),
                      f"no residual serial correlation up to order {h}",
                      {"order": h, "fitted_lags": fitted_lags, "df": df, "nobs": T,
                       "n_variables": m, "within_groups": groups is not None,
                       "pairs": n_pairs})


def ljung_box_equations(residuals: np.ndarray, h: int = 10, fitted_lags: int = 0,
                        names=None) -> list[TestReport]:
    """Univariate Ljung-Box test for each residual column.

    ``Q = T (T + 2) sum_k r_k**2 / (T - k)``, chi-square with
    ``h - fitted_lags`` degrees of freedom.
    """
    U = np.asarray(residuals, dtype=float)
    U = U[:, None] if U.ndim == 1 else U
    T, m = U.shape
    _check(T, h, fitted_lags)
    names = names or [f"eq{i + 1}" for i in range(m)]
    out = []
    for i in range(m):
        u = U[:, i] - U[:, i].mean()
        c0 = u @ u
        r = np.array([u[k:] @ u[:-k] / c0 for k in range(1, h + 1)])
        q = T * (T + 2) * np.sum(r ** 2 / (T - np.arange(1, h + 1)))
        df = h - fitted_lags
        out.append(TestReport("ljung-box", q, float(stats.chi2.sf(q, df)),
                              f"no serial correlation in {names[i]} up to order {h}",
                              {"order": h, "fitted_lags": fitted_lags, "df": df, "nobs": T,
                               "equation": names[i]}))
    return out


def format_q(report: TestReport) -> str:
    """Compact text such as ``(Q = 11.62; p > 0.23)``."""
    return f"(Q = {report.statistic:.2f}; {format_p(report.p_value)})"
