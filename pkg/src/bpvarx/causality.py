"""Granger-causality Wald tests and two-way comparisons of dynamic effects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InconsistentInputs, InvalidPair, UnknownVariable
from .estimation import VarEstimate, robust_cov
from .irf import DEFAULT_HORIZON, accumulate_irf, girf
from .panel import DesignMatrices
from .prelim.report import LEVELS, format_p


@dataclass(frozen=True)
class CausalityReport:
    """Joint test that every lag of ``cause`` is absent from the ``effect`` equation."""

    cause: str
    effect: str
    statistic: float
    p_value: float
    lags: int
    nobs: int
    df_denom: int
    robust: bool = True

    def __post_init__(self):
        if not self.statistic >= 0 or not 0 <= self.p_value <= 1:
            raise ValueError("invalid test outcome")

    @property
    def direction(self) -> tuple[str, str]:
        return self.cause, self.effect

    def decision_at(self, alpha: float) -> bool:
        return self.p_value < alpha

    @property
    def verdict(self) -> dict[float, str]:
        return {a: ("reject" if self.decision_at(a) else "fail") for a in LEVELS}

    def to_text(self) -> str:
        """Compact text such as ``(F = 2.34; p < 0.1; n = 1822)``."""
        return f"(F = {self.statistic:.2f}; {format_p(self.p_value)}; n = {self.nobs})"

    def to_dict(self) -> dict:
        return {"cause": self.cause, "effect": self.effect, "F": self.statistic,
                "p_value": self.p_value, "lags": self.lags, "n": self.nobs,
                "df": [self.lags, self.df_denom], "robust": self.robust,
                "verdict": {str(k): v for k, v in self.verdict.items()},
                "text": self.to_text()}


def _index(estimate: VarEstimate, name: str) -> int:
    if name not in estimate.endog_names:
        raise UnknownVariable(f"{name!r} is not an endogenous variable "
                              f"(have {list(estimate.endog_names)})")
    return estimate.endog_names.index(name)


def granger_test(estimate: VarEstimate, design: DesignMatrices, cause: str, effect: str,
                 robust: bool = True) -> CausalityReport:
    """F-form Wald test that all ``L`` lags of ``cause`` have zero coefficients in
    the ``effect`` equation.

    ``F = b' (R V R')^{-1} b / L`` against ``F(L, n - P)``, where ``V`` is the
    HC1 sandwich covariance (``robust=True``) or ``s^2 (X'X)^{-1}``.

    Raises
    ------
    UnknownVariable
        ``cause`` or ``effect`` is not endogenous in the system.
    InvalidPair
        ``cause == effect``.
    """
    j, i = _index(estimate, cause), _index(estimate, effect)
    if j == i:
        raise InvalidPair(f"cause and effect are both {cause!r}")
    if estimate.residuals is None or estimate.df_resid is None:
        raise InconsistentInputs("Granger tests need a least-squares fit")
    L = estimate.lags
    rows = [j * L + l for l in range(L)]
    if robust:
        V = robust_cov(estimate, design, i)
    else:
        V = estimate.sigma[i, i] * estimate.xtx_inv
    b = estimate.coef[rows, i]
    Vr = V[np.ix_(rows, rows)]
    F = float(b @ np.linalg.solve(Vr, b) / L)
    F = max(F, 0.0)
    p = float(stats.f.sf(F, L, estimate.df_resid))
    return CausalityReport(cause, effect, F, p, L, estimate.nobs, int(estimate.df_resid), robust)


@dataclass(frozen=True)
class DirectionalComparison:
    """Both directions of one pair with the size of each direction's dynamic effect.

    Peaks are the largest absolute generalized response over horizons
    ``1..H`` (horizon 0 reflects only contemporaneous correlation);
    accumulated values are the cumulative responses at ``H``.
    """

    forward: CausalityReport
    reverse: CausalityReport
    forward_peak: float
    reverse_peak: float
    forward_accumulated: float
    reverse_accumulated: float
    horizon: int

    @property
    def peak_ratio(self) -> float:
        return self.forward_peak / self.reverse_peak if self.reverse_peak > 0 else np.inf

    @property
    def forward_dominates(self) -> bool:
        return (self.forward_peak > self.reverse_peak
                and abs(self.forward_accumulated) > abs(self.reverse_accumulated))

    def to_dict(self) -> dict:
        ratio = self.peak_ratio
        return {"forward": self.forward.to_dict(), "reverse": self.reverse.to_dict(),
                "forward_peak": self.forward_peak, "reverse_peak": self.reverse_peak,
                "forward_accumulated": self.forward_accumulated,
                "reverse_accumulated": self.reverse_accumulated,
                "peak_ratio": None if not np.isfinite(ratio) else ratio,
                "forward_dominates": self.forward_dominates, "horizon": self.horizon}


@dataclass(frozen=True)
class BidirectionalReport:
    comparisons: tuple[DirectionalComparison, ...] = field(default_factory=tuple)

    def to_text(self) -> str:
        return json.dumps([c.to_dict() for c in self.comparisons], indent=2, sort_keys=True)


def bidirectional_report(estimate: VarEstimate, design: DesignMatrices, pairs,
                         horizon: int = DEFAULT_HORIZON, robust: bool = True,
                         irf_estimate: VarEstimate | None = None) -> BidirectionalReport:
    """Granger tests in both directions for each ``(cause, effect)`` pair, with
    peak and accumulated GIRF magnitudes per direction.

    ``irf_estimate`` supplies the parameters for the responses (for example a
    posterior mean); the tests always use the least-squares ``estimate``.
    """
    src = irf_estimate if irf_estimate is not None else estimate
    g = girf(src, horizon)
    acc = accumulate_irf(g)
    out = []
    for cause, effect in pairs:
        fwd = granger_test(estimate, design, cause, effect, robust)
        rev = granger_test(estimate, design, effect, cause, robust)
        path_f = g.response(cause, effect)[1:]
        path_r = g.response(effect, cause)[1:]
        out.append(DirectionalComparison(
            fwd, rev, float(np.abs(path_f).max()), float(np.abs(path_r).max()),
            float(acc.response(cause, effect)[-1]), float(acc.response(effect, cause)[-1]),
            horizon))
    return BidirectionalReport(tuple(out))
