"""Johansen reduced-rank cointegration test on a pooled, within-firm demeaned sample."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg as sla
from statsmodels.tsa.coint_tables import c_sja, c_sjt

from ..errors import DegenerateSystem, InsufficientSeries
from .report import TestReport

CASES = {"none": -1, "constant": 0, "trend": 1}
# representative p-value inside each critical-value bracket
_BRACKETS = ((0.01, (0.0, 0.01), 0.005), (0.05, (0.01, 0.05), 0.03),
             (0.10, (0.05, 0.10), 0.075))


@dataclass(frozen=True)
class JohansenResult:
    trace: tuple[TestReport, ...]
    max_eig: tuple[TestReport, ...]
    eigenvalues: np.ndarray
    selected_rank: int
    nobs: int

    @property
    def reports(self) -> list[TestReport]:
        return list(self.trace) + list(self.max_eig)


def _bracket(stat: float, cv: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Map a statistic to a p-value bracket using (90%, 95%, 99%) critical values."""
    c90, c95, c99 = cv
    if stat >= c99:
        level = 0
    elif stat >= c95:
        level = 1
    elif stat >= c90:
        level = 2
    else:
        return 0.55, (0.10, 1.0)
    _, bracket, rep = _BRACKETS[level]
    return rep, bracket


def _detrend(block: np.ndarray, order: int) -> np.ndarray:
    if order < 0:
        return block
    n = block.shape[0]
    D = np.vander(np.arange(n, dtype=float), order + 1, increasing=True)
    return block - D @ np.linalg.lstsq(D, block, rcond=None)[0]


def _firm_blocks(Y: np.ndarray, k_diff: int, order: int):
    if order > 0:
        Y = _detrend(Y, order)
    dy = np.diff(Y, axis=0)
    n = dy.shape[0] - k_diff
    if n <= 0:
        return None
    r0 = dy[k_diff:]
    r1 = Y[k_diff:-1]
    Z = np.column_stack([dy[k_diff - l:-l] for l in range(1, k_diff + 1)]) if k_diff else \
        np.empty((n, 0))
    f = 0 if order > -1 else order
    return _detrend(r0, f), _detrend(r1, f), _detrend(Z, f)


def johansen_test(data, lags: int = 2, deterministic: str = "constant") -> JohansenResult:
    """Trace and maximum-eigenvalue tests for cointegration rank.

    Parameters
    ----------
    data : array (T, m) or mapping of firm -> array (T_i, m)
        One multivariate series or a panel of them. Panel series are
        demeaned within firm and pooled into one set of moment matrices.
    lags : int
        Lag order of the levels VAR; the VECM has ``lags - 1`` lagged
        differences.
    deterministic : {"none", "constant", "trend"}
        ``"constant"`` is the unrestricted-constant case.

    Returns
    -------
    JohansenResult
        One report per hypothesized rank ``r = 0..m-1`` for each statistic.
        p-values are known only up to the critical-value brackets
        ``[0, .01)``, ``[.01, .05)``, ``[.05, .10)``, ``[.10, 1]``; the report
        carries the bracket and a representative point. The selected rank is
        the smallest ``r`` whose trace test does not reject at 5%.
    """
    if deterministic not in CASES:
        raise ValueError(f"deterministic must be one of {tuple(CASES)}")
    if lags < 1:
        raise ValueError("lags must be >= 1")
    order = CASES[deterministic]
    series = data.values() if isinstance(data, Mapping) else [data]
    series = [np.asarray(s, dtype=float) for s in series]
    m = series[0].shape[1] if series[0].ndim == 2 else 1
    if m < 2:
        raise ValueError("the test needs at least two variables")
    k_diff = lags - 1
    blocks = [b for b in (_firm_blocks(s, k_diff, order) for s in series if len(s) > lags + 1)
              if b is not None]
    if not blocks:
        raise InsufficientSeries("no series is long enough for the requested lag order")
    R0 = np.vstack([b[0] for b in blocks])
    R1 = np.vstack([b[1] for b in blocks])
    if k_diff:
        # common short-run dynamics across firms: partial out pooled lagged differences
        Zp = np.vstack([b[2] for b in blocks])
        coef0 = np.linalg.lstsq(Zp, R0, rcond=None)[0]
        coef1 = np.linalg.lstsq(Zp, R1, rcond=None)[0]
        R0, R1 = R0 - Zp @ coef0, R1 - Zp @ coef1
    T = R0.shape[0]
    n_det = len(blocks) * (order + 1 if order >= 0 else 0)
    if T <= m * lags + n_det / max(len(blocks), 1):
        raise InsufficientSeries("sample too short for the requested lag order")
    S00, S11, S01 = R0.T @ R0 / T, R1.T @ R1 / T, R0.T @ R1 / T
    try:
        A = S01.T @ np.linalg.solve(S00, S01)
        lam = sla.eigh(A, S11, eigvals_only=True)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        raise DegenerateSystem("moment matrices are singular") from None
    lam = np.clip(np.sort(lam)[::-1], 0.0, 1.0 - 1e-15)
    logs = np.log1p(-lam)
    case = order
    trace, maxeig = [], []
    for r in range(m):
        tr = float(-T * logs[r:].sum())
        me = float(-T * logs[r])
        cv_t, cv_m = np.asarray(c_sjt(m - r, case)), np.asarray(c_sja(m - r, case))
        settings = {"rank_null": r, "lags": lags, "deterministic": deterministic, "nobs": T,
                    "n_series": len(blocks)}
        p, br = _bracket(tr, cv_t)
        trace.append(TestReport("johansen-trace", tr, p, f"cointegration rank <= {r}",
                                {**settings, "critical_values": cv_t.tolist()}, br))
        p, br = _bracket(me, cv_m)
        maxeig.append(TestReport("johansen-max-eigenvalue", me, p,
                                 f"cointegration rank = {r} against {r + 1}",
                                 {**settings, "critical_values": cv_m.tolist()}, br))
    selected = next((r for r, rep in enumerate(trace) if not rep.decision_at(0.05)), m)
    return JohansenResult(tuple(trace), tuple(maxeig), lam, selected, T)
