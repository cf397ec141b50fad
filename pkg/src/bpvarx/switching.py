"""Two-regime Markov-switching pooled VARX fitted by EM.

Both the coefficients and the residual covariance switch. Each contiguous
firm block is an independent realization of the regime chain, started from
the chain's stationary distribution; nothing carries across firm boundaries.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.cluster.vq import kmeans2

from .errors import ConvergenceWarning, InconsistentInputs, NonConvergent, Underdetermined
from .estimation import VarEstimate, _check_rank
from .irf import DEFAULT_HORIZON, IrfResult, compute_irf
from .model import ModelSpec
from .panel import DesignMatrices

_P_CLIP = 1e-10
_LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class RegimeModel:
    """Fitted regime-switching system.

    ``smoothed[r, s]`` is the probability of regime ``s`` at design row ``r``
    given all data. Regimes are ordered by the intercept of the first
    equation (ascending).
    """

    estimates: tuple[VarEstimate, ...]
    transition: np.ndarray
    smoothed: np.ndarray
    filtered: np.ndarray
    loglik: float
    loglik_path: tuple[float, ...]
    iterations: int
    converged: bool
    tolerance: float
    restart_logliks: tuple[float, ...]
    firm: np.ndarray
    year: np.ndarray

    @property
    def n_regimes(self) -> int:
        return len(self.estimates)

    @property
    def stationary(self) -> np.ndarray:
        return _stationary(self.transition)

    def classify(self) -> np.ndarray:
        return np.argmax(self.smoothed, axis=1)

    def to_csv(self) -> str:
        """Per-observation smoothed probabilities."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["firm_id", "year"] + [f"p_regime{s}" for s in range(self.n_regimes)])
        for f, y, p in zip(self.firm.tolist(), self.year.tolist(), self.smoothed):
            w.writerow([f, y] + [repr(float(v)) for v in p])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"n_regimes": self.n_regimes, "loglik": self.loglik,
                "iterations": self.iterations, "converged": self.converged,
                "transition": self.transition.tolist(),
                "restart_logliks": [None if not np.isfinite(v) else v
                                    for v in self.restart_logliks],
                "regime_share": self.smoothed.mean(axis=0).tolist()}


def _stationary(P: np.ndarray) -> np.ndarray:
    if P.shape == (1, 1):
        return np.ones(1)
    p01, p10 = P[0, 1], P[1, 0]
    return np.array([p10, p01]) / (p01 + p10)


class _Blocks:
    """Row layout of contiguous firm blocks for vectorized recursions."""

    def __init__(self, design: DesignMatrices):
        b = np.asarray(design.blocks(), dtype=int).reshape(-1, 2)
        self.starts = b[:, 0]
        self.lengths = b[:, 1] - b[:, 0]
        self.n_steps = int(self.lengths.max()) if len(b) else 0
        self.rows = [self.starts[self.lengths > t] + t for t in range(self.n_steps)]


def _log_densities(X, Y, coefs, sigmas):
    n, m = Y.shape
    out = np.empty((n, len(coefs)))
    for s, (A, S) in enumerate(zip(coefs, sigmas)):
        L = np.linalg.cholesky(S)
        Z = np.linalg.solve(L, (Y - X @ A).T)
        out[:, s] = -0.5 * (m * _LOG2PI + 2.0 * np.log(np.diag(L)).sum() + (Z ** 2).sum(0))
    return out


def _filter_smooth(logf, P, blocks: _Blocks):
    n, S = logf.shape
    c = logf.max(axis=1)
    f = np.exp(logf - c[:, None])
    pi = _stationary(P)
    filt = np.empty((n, S))
    pred = np.empty((n, S))
    ll = 0.0
    for t, rows in enumerate(blocks.rows):
        pr = np.broadcast_to(pi, (len(rows), S)) if t == 0 else filt[rows - 1] @ P
        num = pr * f[rows]
        den = num.sum(axis=1)
        filt[rows] = num / den[:, None]
        pred[rows] = pr
        ll += float(np.log(den).sum() + c[rows].sum())
    smooth = filt.copy()
    trans = np.zeros((S, S))
    for t in range(blocks.n_steps - 2, -1, -1):
        rows = blocks.rows[t + 1] - 1
        ratio = smooth[rows + 1] / pred[rows + 1]
        smooth[rows] = filt[rows] * (ratio @ P.T)
        trans += np.einsum("ri,ij,rj->ij", filt[rows], P, ratio)
    smooth /= smooth.sum(axis=1, keepdims=True)
    init = smooth[blocks.starts].sum(axis=0)
    return ll, filt, smooth, trans, init


def _transition_q(P, trans, init):
    return float((init * np.log(_stationary(P))).sum() + (trans * np.log(P)).sum())


def _make_p(p00, p11):
    p00, p11 = (float(np.clip(v, _P_CLIP, 1 - _P_CLIP)) for v in (p00, p11))
    return np.array([[p00, 1 - p00], [1 - p11, p11]])


def _update_transition(P, trans, init):
    """Generalized M-step: never lowers the expected complete-data log-likelihood."""
    best, best_q = P, _transition_q(P, trans, init)
    rows = trans.sum(axis=1)
    cand = [_make_p(trans[0, 0] / rows[0] if rows[0] > 0 else P[0, 0],
                    trans[1, 1] / rows[1] if rows[1] > 0 else P[1, 1])]

    def negq(z):
        return -_transition_q(_make_p(*(1 / (1 + np.exp(-z)))), trans, init)

    z0 = np.log(np.array([cand[0][0, 0], cand[0][1, 1]]) /
                (1 - np.array([cand[0][0, 0], cand[0][1, 1]])))
    res = optimize.minimize(negq, z0, method="L-BFGS-B")
    cand.append(_make_p(*(1 / (1 + np.exp(-res.x)))))
    for C in cand:
        q = _transition_q(C, trans, init)
        if q > best_q:
            best, best_q = C, q
    return best


class _Degenerate(Exception):
    pass


def _weighted_fit(X, Y, w, floor):
    sw = w.sum()
    if sw < X.shape[1] + Y.shape[1]:
        raise _Degenerate
    Xw = X * w[:, None]
    try:
        A = np.linalg.solve(Xw.T @ X, Xw.T @ Y)
    except np.linalg.LinAlgError:
        raise _Degenerate from None
    U = Y - X @ A
    S = (U * w[:, None]).T @ U / sw
    S = 0.5 * (S + S.T)
    if np.linalg.eigvalsh(S).min() < floor:
        raise _Degenerate
    return A, S


def _run_em(X, Y, blocks, coefs, sigmas, P, tol, max_iter, floor):
    path = []
    ll_prev = -np.inf
    converged = False
    for it in range(1, max_iter + 1):
        logf = _log_densities(X, Y, coefs, sigmas)
        ll, filt, smooth, trans, init = _filter_smooth(logf, P, blocks)
        if ll < ll_prev - 1e-10 * max(1.0, abs(ll)):
            raise AssertionError(f"EM log-likelihood decreased: {ll_prev} -> {ll}")
        path.append(ll)
        if abs(ll - ll_prev) < tol * (1.0 + abs(ll)):
            converged = True
            break
        ll_prev = ll
        fits = [_weighted_fit(X, Y, smooth[:, s], floor) for s in range(len(coefs))]
        coefs, sigmas = [f[0] for f in fits], [f[1] for f in fits]
        P = _update_transition(P, trans, init)
    return dict(coefs=coefs, sigmas=sigmas, P=P, ll=path[-1], path=path, filt=filt,
                smooth=smooth, iterations=len(path), converged=converged)


def _start_values(X, Y, A0, S0, se, restart, rng, floor):
    n = X.shape[0]
    if restart == 0:
        # cluster standardized residuals into two groups
        U = (Y - X @ A0) / np.sqrt(np.diag(S0))
        _, labels = kmeans2(U, 2, seed=rng, minit="++")
        w = [(labels == s).astype(float) for s in range(2)]
        try:
            fits = [_weighted_fit(X, Y, wi, floor) for wi in w]
            return [f[0] for f in fits], [f[1] for f in fits], _make_p(0.9, 0.9)
        except _Degenerate:
            pass
    scale = rng.uniform(1.0, 3.0)
    coefs = [A0 + scale * se * rng.standard_normal(A0.shape) for _ in range(2)]
    sigmas = [S0 * rng.uniform(0.6, 1.4) for _ in range(2)]
    P = _make_p(rng.uniform(0.6, 0.97), rng.uniform(0.6, 0.97))
    return coefs, sigmas, P


def _canonical_order(coefs, design: DesignMatrices, X):
    if "const" in design.exog_names:
        row = design.n_endog * design.lags + design.exog_names.index("const")
        keys = [A[row, 0] for A in coefs]
    else:
        keys = [float((X @ A)[:, 0].mean()) for A in coefs]
    return list(np.argsort(keys, kind="stable"))


def fit_ms_varx(design: DesignMatrices, model: ModelSpec | None = None, regimes: int = 2,
                restarts: int = 20, seed: int = 0, tolerance: float = 1e-8,
                max_iter: int = 500) -> RegimeModel:
    """Maximum-likelihood Markov-switching VARX by EM.

    Each restart starts either from a clustering of pooled least-squares
    residuals (restart 0) or from a random perturbation of the pooled fit,
    and iterates Hamilton filtering, Kim smoothing and weighted least-squares
    updates. The best log-likelihood wins; ties go to the lower restart
    index. ``regimes=1`` returns the Gaussian maximum-likelihood
    single-regime fit.

    Raises
    ------
    NonConvergent
        No restart converged within ``max_iter`` iterations; the best partial
        result is attached as ``.best``.
    """
    if model is not None and tuple(model.endogenous) != design.endog_names:
        raise InconsistentInputs("model and design disagree on the endogenous variables")
    if regimes not in (1, 2):
        raise ValueError("regimes must be 1 or 2")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    X, Y = design.regressors, design.response
    n, P = X.shape
    m = Y.shape[1]
    if n <= P:
        raise Underdetermined(f"{n} rows for {P} parameters per equation")
    _check_rank(X, design.regressor_names)
    A0 = np.linalg.lstsq(X, Y, rcond=None)[0]
    U0 = Y - X @ A0
    S0 = U0.T @ U0 / n
    S0 = 0.5 * (S0 + S0.T)

    def template(A, S):
        return VarEstimate(design.endog_names, design.exog_names, design.lags, A, S, n,
                           method="ms-varx")

    blocks = _Blocks(design)
    if regimes == 1:
        ll = float(_log_densities(X, Y, [A0], [S0]).sum())
        ones = np.ones((n, 1))
        return RegimeModel((template(A0, S0),), np.ones((1, 1)), ones, ones, ll, (ll,), 1,
                           True, tolerance, (ll,), design.firm.copy(), design.year.copy())
    se = np.sqrt(np.outer(np.diag(np.linalg.inv(X.T @ X)), np.diag(S0)))
    floor = 1e-8 * float(np.trace(S0)) / m
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]
    runs = []
    for r, rng in enumerate(streams):
        try:
            coefs, sigmas, Pm = _start_values(X, Y, A0, S0, se, r, rng, floor)
            runs.append(_run_em(X, Y, blocks, coefs, sigmas, Pm, tolerance, max_iter, floor))
        except (_Degenerate, np.linalg.LinAlgError):
            runs.append(None)
    lls = tuple(run["ll"] if run is not None else -np.inf for run in runs)
    if all(run is None for run in runs):
        raise NonConvergent("every restart collapsed to a degenerate regime", None)
    best_idx = int(np.argmax(lls))  # first maximum: lowest restart index
    pool = [i for i, run in enumerate(runs) if run is not None and run["converged"]]
    if pool:
        best_idx = max(pool, key=lambda i: (lls[i], -i))
    best = runs[best_idx]
    order = _canonical_order(best["coefs"], design, X)
    Pm = best["P"][np.ix_(order, order)]
    result = RegimeModel(tuple(template(best["coefs"][s], best["sigmas"][s]) for s in order),
                         Pm, best["smooth"][:, order], best["filt"][:, order], best["ll"],
                         tuple(best["path"]), best["iterations"], best["converged"],
                         tolerance, lls, design.firm.copy(), design.year.copy())
    if not pool:
        raise NonConvergent(f"no restart converged within {max_iter} iterations", result)
    n_conv = len(pool)
    if n_conv < restarts:
        warnings.warn(f"{restarts - n_conv} of {restarts} restarts did not converge",
                      ConvergenceWarning, stacklevel=2)
    return result


def regime_irf(model: RegimeModel, regime: int, horizon: int = DEFAULT_HORIZON,
               kind: str = "generalized", ordering=None) -> IrfResult:
    """Impulse responses of one regime's parameter set; ``stable`` flags explosive regimes."""
    if not 0 <= regime < model.n_regimes:
        raise ValueError(f"regime must be in [0, {model.n_regimes - 1}]")
    return compute_irf(model.estimates[regime], horizon, kind, ordering)
