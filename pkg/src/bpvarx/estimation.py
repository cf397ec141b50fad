"""Equation-wise least squares for pooled VARX systems.

Every equation of the system shares the regressor matrix
``X = [lagged | exog]``, so the system estimate is a single multivariate
least-squares solve. Coefficients are stored as a ``(P, m)`` matrix whose
column ``i`` is the ARDL equation of endogenous variable ``i``.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import CollinearDesign, InconsistentInputs, Underdetermined, UnknownEquation
from .model import ModelSpec
from .panel import DesignMatrices

STAR_LEVELS = ((0.001, "†"), (0.01, "***"), (0.05, "**"), (0.1, "*"))


@dataclass(frozen=True, eq=False)
class VarEstimate:
    """Coefficients and residual covariance of a pooled VARX.

    Attributes
    ----------
    coef : ndarray, shape (P, m)
        Rows follow ``regressor_names``: the lag block (variable-major,
        lag-minor) followed by the exogenous block.
    sigma : ndarray, shape (m, m)
        Residual covariance, degrees-of-freedom corrected for OLS fits.
    se, se_robust : ndarray, shape (P, m) or None
        Classical and HC1 standard errors.
    """

    endog_names: tuple[str, ...]
    exog_names: tuple[str, ...]
    lags: int
    coef: np.ndarray
    sigma: np.ndarray
    nobs: int
    residuals: np.ndarray | None = None
    se: np.ndarray | None = None
    se_robust: np.ndarray | None = None
    xtx_inv: np.ndarray | None = None
    df_resid: int | None = None
    tss: np.ndarray | None = None
    method: str = "ols"
    extra: dict = field(default_factory=dict)

    @property
    def n_endog(self) -> int:
        return len(self.endog_names)

    @property
    def n_params(self) -> int:
        return self.coef.shape[0]

    @property
    def regressor_names(self) -> tuple[str, ...]:
        lag_names = tuple(f"{v}.L{l}" for v in self.endog_names for l in range(1, self.lags + 1))
        return lag_names + self.exog_names

    @property
    def lag_matrices(self) -> np.ndarray:
        """``B[l-1][i, j]``: effect of variable ``j`` at lag ``l`` on equation ``i``."""
        m, L = self.n_endog, self.lags
        block = self.coef[: m * L].reshape(m, L, m)  # (j, l, i)
        return np.transpose(block, (1, 2, 0)).copy()

    @property
    def exog_coef(self) -> np.ndarray:
        """``(m, k)`` coefficients on the controls, intercept excluded."""
        idx = [i for i, n in enumerate(self.exog_names) if n != "const"]
        start = self.n_endog * self.lags
        return self.coef[[start + i for i in idx]].T.copy()

    @property
    def intercept(self) -> np.ndarray:
        if "const" not in self.exog_names:
            return np.zeros(self.n_endog)
        row = self.n_endog * self.lags + self.exog_names.index("const")
        return self.coef[row].copy()

    def equation_index(self, name: str) -> int:
        try:
            return self.endog_names.index(name)
        except ValueError:
            raise UnknownEquation(f"{name!r} is not an endogenous variable "
                                  f"(have {list(self.endog_names)})") from None

    def with_params(self, coef: np.ndarray, sigma: np.ndarray, method: str) -> "VarEstimate":
        """Same layout, new coefficients; fit-specific fields dropped."""
        return VarEstimate(self.endog_names, self.exog_names, self.lags,
                           np.asarray(coef, dtype=float), np.asarray(sigma, dtype=float),
                           self.nobs, method=method)

    @classmethod
    def from_matrices(cls, lag_matrices, sigma, intercept=None, exog_coef=None,
                      endog_names=None, exog_names=None) -> "VarEstimate":
        """Assemble an estimate from known parameters (e.g. a simulation truth)."""
        B = np.asarray(lag_matrices, dtype=float)
        if B.ndim == 2:
            B = B[None]
        L, m, _ = B.shape
        endog_names = tuple(endog_names or (f"y{i + 1}" for i in range(m)))
        rows = [B[l][:, j] for j in range(m) for l in range(L)]
        exog_rows, names = [], []
        if exog_coef is not None:
            G = np.asarray(exog_coef, dtype=float).reshape(m, -1)
            exog_rows = [G[:, i] for i in range(G.shape[1])]
            names = list(exog_names or (f"x{i + 1}" for i in range(G.shape[1])))
        if intercept is not None:
            exog_rows.append(np.asarray(intercept, dtype=float).reshape(m))
            names.append("const")
        coef = np.vstack(rows + exog_rows)
        return cls(endog_names, tuple(names), L, coef, np.asarray(sigma, dtype=float), 0,
                   method="given")


def _check_rank(X: np.ndarray, names) -> None:
    n, p = X.shape
    if p == 0:
        return
    scale = np.sqrt((X ** 2).sum(axis=0))
    scale[scale == 0] = 1.0
    _, R, piv = sla.qr(X / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * diag[0] * 1e3 if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < p:
        bad = [names[i] for i in sorted(piv[rank:])]
        raise CollinearDesign(f"regressor matrix has rank {rank} < {p}; dependent columns: {bad}",
                              bad)


def fit_varx_ols(design: DesignMatrices, model: ModelSpec | None = None) -> VarEstimate:
    """Least-squares fit of every equation of the pooled VARX.

    Raises
    ------
    Underdetermined
        Fewer rows than parameters per equation (plus one).
    CollinearDesign
        The regressor matrix is rank deficient.
    """
    if model is not None and tuple(model.endogenous) != design.endog_names:
        raise InconsistentInputs("model and design disagree on the endogenous variables")
    X, Y = design.regressors, design.response
    n, p = X.shape
    if n <= p:
        raise Underdetermined(f"{n} rows for {p} parameters per equation")
    _check_rank(X, design.regressor_names)
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ coef
    df = n - p
    sigma = resid.T @ resid / df
    sigma = 0.5 * (sigma + sigma.T)
    xtx_inv = np.linalg.inv(X.T @ X)
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    se = np.sqrt(np.outer(np.diag(xtx_inv), np.diag(sigma)))
    centred = Y - Y.mean(axis=0) if design.has_intercept else Y
    est = VarEstimate(design.endog_names, design.exog_names, design.lags, coef, sigma, n,
                      residuals=resid, se=se, xtx_inv=xtx_inv, df_resid=df,
                      tss=(centred ** 2).sum(axis=0))
    object.__setattr__(est, "se_robust", robust_se(est, design))
    return est


def _check_pair(estimate: VarEstimate, design: DesignMatrices) -> None:
    if estimate.residuals is None:
        raise InconsistentInputs("estimate carries no residuals")
    if estimate.residuals.shape[0] != design.nobs or estimate.n_params != design.regressors.shape[1]:
        raise InconsistentInputs(
            f"estimate ({estimate.residuals.shape[0]} rows, {estimate.n_params} params) does not "
            f"match design ({design.nobs} rows, {design.regressors.shape[1]} params)")


def robust_cov(estimate: VarEstimate, design: DesignMatrices, equation: int) -> np.ndarray:
    """HC1 sandwich covariance of one equation's coefficients."""
    _check_pair(estimate, design)
    X = design.regressors
    n, p = X.shape
    u = estimate.residuals[:, equation]
    bread = estimate.xtx_inv if estimate.xtx_inv is not None else np.linalg.inv(X.T @ X)
    Xu = X * u[:, None]
    cov = bread @ (Xu.T @ Xu) @ bread * (n / (n - p))
    return 0.5 * (cov + cov.T)


def robust_se(estimate: VarEstimate, design: DesignMatrices) -> np.ndarray:
    """HC1 standard errors, shape ``(P, m)``."""
    _check_pair(estimate, design)
    X = design.regressors
    n, p = X.shape
    bread = estimate.xtx_inv if estimate.xtx_inv is not None else np.linalg.inv(X.T @ X)
    # diag(B X' diag(u^2) X B) for every equation at once
    XB = X @ bread
    var = (XB ** 2).T @ (estimate.residuals ** 2) * (n / (n - p))
    return np.sqrt(np.maximum(var, 0.0))


def companion(estimate: VarEstimate) -> np.ndarray:
    B = estimate.lag_matrices
    L, m, _ = B.shape
    C = np.zeros((m * L, m * L))
    C[:m] = np.hstack(list(B))
    if L > 1:
        C[m:, :-m] = np.eye(m * (L - 1))
    return C


@dataclass(frozen=True)
class Stability:
    moduli: np.ndarray
    stable: bool

    @property
    def spectral_radius(self) -> float:
        return float(self.moduli[0]) if self.moduli.size else 0.0


def stability_check(estimate: VarEstimate) -> Stability:
    """Companion-matrix eigenvalue moduli, sorted descending.

    Stable iff every modulus is below ``1 - 1e-8``.
    """
    mod = np.sort(np.abs(np.linalg.eigvals(companion(estimate))))[::-1]
    return Stability(mod, bool(mod.size == 0 or mod[0] < 1 - 1e-8))


def star_code(p: float) -> str:
    for level, code in STAR_LEVELS:
        if p < level:
            return code
    return ""


@dataclass(frozen=True)
class EquationSummary:
    """Coefficient table of one ARDL equation, laid out like a journal table."""

    equation: str
    terms: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    stars: tuple[str, ...]
    adj_r2: float
    aic: float
    sic: float
    nobs: int
    robust: bool = True

    def to_text(self) -> str:
        width = max(len(t) for t in self.terms) + 2
        lines = [f"Dependent variable: {self.equation}",
                 f"{'':<{width}}{'coef':>12}{'SE':>14}"]
        for t, b, s, st in zip(self.terms, self.coef, self.se, self.stars):
            lines.append(f"{t:<{width}}{b:>12.4f}{'(' + format(s, '.4f') + ')':>14}{st}")
        lines.append(f"{'Adjusted R-square':<{width}}{100 * self.adj_r2:>11.2f} %")
        lines.append(f"{'Included obs.':<{width}}{self.nobs:>12d}")
        lines.append(f"{'Akaike Criterion':<{width}}{self.aic:>12.1f}")
        lines.append(f"{'Schwarz Criterion':<{width}}{self.sic:>12.1f}")
        se_kind = "Robust" if self.robust else "Classical"
        lines.append(f"{se_kind} standard errors are in parentheses.")
        lines.append("* p < 0.1; ** p < 0.05; *** p < 0.01; † p < 0.001.")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["equation", "term", "coef", "se", "p_value", "stars"])
        for t, b, s, p, st in zip(self.terms, self.coef, self.se, self.p_values, self.stars):
            w.writerow([self.equation, t, repr(float(b)), repr(float(s)), repr(float(p)), st])
        for name, val in (("adj_r2", self.adj_r2), ("aic", self.aic), ("sic", self.sic),
                          ("nobs", self.nobs)):
            w.writerow([self.equation, name, repr(float(val)), "", "", ""])
        return buf.getvalue()


def equation_loglik(estimate: VarEstimate, equation: int) -> float:
    n = estimate.nobs
    rss = float((estimate.residuals[:, equation] ** 2).sum())
    return -0.5 * n * (np.log(2 * np.pi) + np.log(rss / n) + 1.0)


def equation_summary(estimate: VarEstimate, equation: str, robust: bool = True) -> EquationSummary:
    """Table-style summary of one equation with significance stars.

    p-values use the t distribution with the residual degrees of freedom.
    AIC and SIC are ``-2 lnL + 2P`` and ``-2 lnL + P ln n`` of the Gaussian
    single-equation likelihood.
    """
    i = estimate.equation_index(equation)
    if estimate.residuals is None:
        raise InconsistentInputs("equation summaries need a least-squares fit")
    se = (estimate.se_robust if robust else estimate.se)[:, i]
    b = estimate.coef[:, i]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, b / se, np.where(b == 0, 0.0, np.inf))
    p = 2 * stats.t.sf(np.abs(t), estimate.df_resid)
    n, P = estimate.nobs, estimate.n_params
    rss = float((estimate.residuals[:, i] ** 2).sum())
    tss = float(estimate.tss[i])
    r2 = 1 - rss / tss if tss > 0 else 0.0
    adj = 1 - (1 - r2) * (n - 1) / (n - P)
    ll = equation_loglik(estimate, i)
    return EquationSummary(equation, estimate.regressor_names, b.copy(), se.copy(), p,
                           tuple(star_code(x) for x in p), adj, -2 * ll + 2 * P,
                           -2 * ll + P * np.log(n), n, robust)
