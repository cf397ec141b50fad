"""Lag-length selection by five criteria on a common estimation sample."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..model import ModelSpec
from ..panel import DesignMatrices, PanelDataset, build_design

CRITERIA = ("AIC", "FPE", "SIC", "HQ", "LR")


@dataclass(frozen=True)
class LagSelectionReport:
    """Selected lag and per-candidate values for each criterion.

    ``values[name][L - 1]`` is the criterion at lag ``L``. For ``"LR"`` it is
    the sequential modified likelihood-ratio statistic of ``L`` against
    ``L - 1`` (undefined at ``L = 1``) and ``lr_pvalues`` holds its p-values.
    """

    selected: dict[str, int]
    values: dict[str, np.ndarray]
    lr_pvalues: np.ndarray
    max_lag: int
    nobs: int
    alpha: float = 0.05

    @property
    def candidates(self) -> tuple[int, ...]:
        return tuple(range(1, self.max_lag + 1))

    @property
    def boundary(self) -> tuple[str, ...]:
        """Criteria whose choice sits at the largest candidate."""
        return tuple(c for c in CRITERIA if self.selected[c] == self.max_lag)

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in a]
        return {"max_lag": self.max_lag, "nobs": self.nobs, "alpha": self.alpha,
                "selected": dict(self.selected),
                "values": {k: clean(v) for k, v in self.values.items()},
                "lr_pvalues": clean(self.lr_pvalues), "boundary": list(self.boundary)}

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _first_argmin(values: np.ndarray) -> int:
    return int(np.flatnonzero(values == values.min())[0]) + 1


def lag_criteria(design: DesignMatrices, alpha: float = 0.05) -> LagSelectionReport:
    """Evaluate every criterion for lags ``1..design.lags`` on the design's rows."""
    T, m = design.nobs, design.n_endog
    k = design.exog.shape[1]
    L_max = design.lags
    logdet = np.empty(L_max)
    n_par = np.empty(L_max)
    for L in range(1, L_max + 1):
        d = design.with_lags(L)
        X, Y = d.regressors, d.response
        U = Y - X @ np.linalg.lstsq(X, Y, rcond=None)[0]
        sign, ld = np.linalg.slogdet(U.T @ U / T)
        logdet[L - 1] = ld if sign > 0 else -np.inf
        n_par[L - 1] = m * L + k
    K = m * n_par
    values = {
        "AIC": logdet + 2.0 * K / T,
        "SIC": logdet + np.log(T) * K / T,
        "HQ": logdet + 2.0 * np.log(np.log(T)) * K / T,
        "FPE": ((T + n_par) / (T - n_par)) ** m * np.exp(logdet),
    }
    selected = {c: _first_argmin(v) for c, v in values.items()}
    lr = np.full(L_max, np.nan)
    pv = np.full(L_max, np.nan)
    for L in range(2, L_max + 1):
        lr[L - 1] = (T - n_par[L - 1]) * (logdet[L - 2] - logdet[L - 1])
        pv[L - 1] = stats.chi2.sf(lr[L - 1], m * m)
    chosen = 1
    for L in range(L_max, 1, -1):
        if pv[L - 1] < alpha:
            chosen = L
            break
    values["LR"] = lr
    selected["LR"] = chosen
    selected = {c: selected[c] for c in CRITERIA}
    return LagSelectionReport(selected, {c: values[c] for c in CRITERIA}, pv, L_max, T, alpha)


def select_lag_length(dataset: PanelDataset, model: ModelSpec, max_lag: int,
                      alpha: float = 0.05) -> LagSelectionReport:
    """Compare lags ``1..max_lag`` on the common sample feasible at ``max_lag``.

    Raises
    ------
    EmptyDesign
        No row supports ``max_lag`` lags.
    """
    return lag_criteria(build_design(dataset, model.replace(lags=max_lag)), alpha)
