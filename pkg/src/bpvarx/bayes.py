"""Bayesian pooled VARX under normal-inverse-Wishart and Minnesota priors.

Notation: ``Y = X A + E`` with ``X`` the ``(n, P)`` regressor matrix of a
:class:`~bpvarx.panel.DesignMatrices`, ``A`` the ``(P, m)`` coefficient
matrix and rows of ``E`` distributed ``N(0, Sigma)``.

* Normal-inverse-Wishart (conjugate): ``A | Sigma ~ MN(A0, inv(V0inv), Sigma)``,
  ``Sigma ~ IW(S0, nu0)``. The posterior is sampled exactly.
* Minnesota: independent normal prior on every coefficient, with
  ``Sigma ~ IW(S0, nu0)``; sampled by Gibbs alternation between
  ``vec(A) | Sigma`` and ``Sigma | A``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import DegenerateScale, InconsistentInputs
from .estimation import VarEstimate, _check_rank
from .model import ModelSpec
from .panel import DesignMatrices

NIW = "normal-inverse-wishart"
MINNESOTA = "minnesota"
MINNESOTA_DEFAULTS = {"lambda1": 0.2, "lambda2": 0.5, "lambda3": 1.0, "lambda4": 100.0}


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Prior over ``(A, Sigma)``.

    ``coef_precision`` is the ``(P, P)`` row precision ``V0inv`` for the
    conjugate prior (so ``Cov(vec A | Sigma) = Sigma kron inv(V0inv)``) and
    a ``(P, m)`` array of elementwise precisions for the Minnesota prior.
    """

    kind: str
    coef_mean: np.ndarray
    coef_precision: np.ndarray
    scale: np.ndarray
    dof: float
    residual_scales: np.ndarray
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.scale.shape[0]
        if self.kind not in (NIW, MINNESOTA):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if not self.dof > m - 1:
            raise ValueError(f"degrees of freedom must exceed {m - 1}")
        if any(v <= 0 for v in self.hyper.values() if isinstance(v, (int, float))):
            raise ValueError("prior hyperparameters must be positive")
        if self.kind == NIW:
            if np.linalg.eigvalsh(self.coef_precision).min() < -1e-12:
                raise ValueError("coefficient precision must be positive semidefinite")
        elif (self.coef_precision < 0).any():
            raise ValueError("coefficient precisions must be non-negative")

    @property
    def covariance_mean(self) -> np.ndarray:
        """Prior mean of ``Sigma``: ``S0 / (nu0 - m - 1)``."""
        m = self.scale.shape[0]
        return self.scale / (self.dof - m - 1)

    @property
    def coef_prior_sd(self) -> np.ndarray:
        if self.kind == MINNESOTA:
            with np.errstate(divide="ignore"):
                return 1.0 / np.sqrt(self.coef_precision)
        return np.sqrt(np.outer(np.diag(np.linalg.inv(self.coef_precision)),
                                np.diag(self.covariance_mean)))


def residual_scales(design: DesignMatrices) -> np.ndarray:
    """Residual standard deviation of a univariate AR(L) plus constant per variable.

    Raises
    ------
    DegenerateScale
        A variable is (numerically) constant, so its scale is zero.
    """
    n, m, L = design.nobs, design.n_endog, design.lags
    out = np.empty(m)
    for j in range(m):
        y = design.response[:, j]
        X = np.column_stack([design.lagged[:, j * L:(j + 1) * L], np.ones(n)])
        b, *_ = np.linalg.lstsq(X, y, rcond=None)
        u = y - X @ b
        s2 = float(u @ u) / max(n - X.shape[1], 1)
        ref = max(1.0, float(np.abs(y).max()))
        if not np.sqrt(s2) > 1e-10 * ref:
            raise DegenerateScale(f"{design.endog_names[j]} has zero residual scale")
        out[j] = np.sqrt(s2)
    return out


def build_minnesota_prior(model: ModelSpec | None, design: DesignMatrices,
                          lambda1: float = 0.2, lambda2: float = 0.5, lambda3: float = 1.0,
                          lambda4: float = 100.0) -> PriorSpec:
    """Minnesota prior with zero prior mean on every coefficient.

    The prior standard deviation of the lag-``l`` coefficient of variable
    ``j`` in equation ``i`` is ``lambda1 * (lambda2 if i != j else 1) *
    (s_i / s_j) / l**lambda3``; exogenous coefficients get
    ``lambda1 * lambda4 * s_i``. ``s`` are univariate AR residual scales.
    """
    if model is not None and tuple(model.endogenous) != design.endog_names:
        raise InconsistentInputs("model and design disagree on the endogenous variables")
    if min(lambda1, lambda2, lambda3, lambda4) <= 0:
        raise ValueError("Minnesota hyperparameters must be positive")
    s = residual_scales(design)
    m, L = design.n_endog, design.lags
    P = design.regressors.shape[1]
    sd = np.empty((P, m))
    for i in range(m):
        for j in range(m):
            for lag in range(1, L + 1):
                tight = 1.0 if i == j else lambda2
                sd[j * L + lag - 1, i] = lambda1 * tight * (s[i] / s[j]) / lag ** lambda3
        sd[m * L:, i] = lambda1 * lambda4 * s[i]
    hyper = {"lambda1": lambda1, "lambda2": lambda2, "lambda3": lambda3, "lambda4": lambda4}
    return PriorSpec(MINNESOTA, np.zeros((P, m)), 1.0 / sd ** 2, np.diag(s ** 2), m + 2.0, s,
                     hyper)


def build_niw_prior(model: ModelSpec | None, design: DesignMatrices,
                    looseness: float = 10.0) -> PriorSpec:
    """Conjugate prior: mean 0, row precision ``I / looseness``,
    scale ``diag(s**2)``, ``m + 2`` degrees of freedom (prior mean of
    ``Sigma`` equals the scale)."""
    if model is not None and tuple(model.endogenous) != design.endog_names:
        raise InconsistentInputs("model and design disagree on the endogenous variables")
    if not looseness > 0:
        raise ValueError("looseness must be positive")
    s = residual_scales(design)
    m = design.n_endog
    P = design.regressors.shape[1]
    return PriorSpec(NIW, np.zeros((P, m)), np.eye(P) / looseness, np.diag(s ** 2), m + 2.0, s,
                     {"looseness": looseness})


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Retained posterior draws.

    ``coef`` is ``(D, P, m)`` and ``sigma`` is ``(D, m, m)``. ``template``
    is the posterior-mean estimate and carries the variable layout.
    """

    coef: np.ndarray
    sigma: np.ndarray
    template: VarEstimate
    seed: int
    n_draws: int
    burn_in: int
    kind: str
    chains: int = 1
    rhat: np.ndarray | None = None
    rhat_sigma: np.ndarray | None = None

    @property
    def converged(self) -> bool:
        vals = [a for a in (self.rhat, self.rhat_sigma) if a is not None]
        return all(np.nanmax(a) <= 1.1 for a in vals if a.size)

    def mean(self) -> np.ndarray:
        return self.coef.mean(axis=0)

    def mean_estimate(self) -> VarEstimate:
        return self.template

    def quantile(self, q) -> np.ndarray:
        return np.quantile(self.coef, q, axis=0)

    def mcse(self) -> np.ndarray:
        """Batch-means Monte Carlo standard error of the posterior mean."""
        D = self.coef.shape[0]
        n_batch = max(int(np.sqrt(D)), 2)
        size = D // n_batch
        if size < 1:
            return np.full(self.coef.shape[1:], np.nan)
        means = self.coef[: n_batch * size].reshape(n_batch, size, *self.coef.shape[1:]).mean(1)
        return means.std(axis=0, ddof=1) / np.sqrt(n_batch)

    def to_csv(self) -> str:
        """One row per draw: coefficients ``coef[term|equation]`` then ``sigma[i|j]`` (upper triangle)."""
        t = self.template
        cols = [f"coef[{r}|{e}]" for e in t.endog_names for r in t.regressor_names]
        m = t.n_endog
        cols += [f"sigma[{t.endog_names[i]}|{t.endog_names[j]}]"
                 for i in range(m) for j in range(i, m)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["draw"] + cols)
        iu = np.triu_indices(m)
        for d in range(self.coef.shape[0]):
            vals = list(self.coef[d].T.ravel()) + list(self.sigma[d][iu])
            w.writerow([d] + [repr(float(v)) for v in vals])
        return buf.getvalue()


def split_rhat(chains: np.ndarray) -> np.ndarray:
    """Split-chain potential scale reduction.

    ``chains`` has shape ``(C, D, ...)``; each chain is split in half.
    """
    C, D = chains.shape[:2]
    half = D // 2
    if half < 2:
        return np.full(chains.shape[2:], np.nan)
    parts = np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)
    n = half
    means = parts.mean(axis=1)
    W = parts.var(axis=1, ddof=1).mean(axis=0)
    B = n * means.var(axis=0, ddof=1)
    var_hat = (n - 1) / n * W + B / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var_hat / W)
    return np.where(W > 0, r, 1.0)


def _niw_posterior(X, Y, prior: PriorSpec):
    V0inv, A0 = prior.coef_precision, prior.coef_mean
    prec = V0inv + X.T @ X
    prec = 0.5 * (prec + prec.T)
    chol = sla.cho_factor(prec, lower=True)
    A_bar = sla.cho_solve(chol, V0inv @ A0 + X.T @ Y)
    S_bar = prior.scale + Y.T @ Y + A0.T @ V0inv @ A0 - A_bar.T @ prec @ A_bar
    S_bar = 0.5 * (S_bar + S_bar.T)
    return A_bar, chol, S_bar, prior.dof + X.shape[0]


def _draw_invwishart(rng, df, scale, size):
    draws = stats.invwishart.rvs(df=df, scale=scale, size=size, random_state=rng)
    draws = np.asarray(draws).reshape(size, *scale.shape)
    return 0.5 * (draws + np.swapaxes(draws, 1, 2))


def _sample_niw(X, Y, prior, n_draws, rng):
    A_bar, chol, S_bar, nu = _niw_posterior(X, Y, prior)
    P, m = A_bar.shape
    sig = _draw_invwishart(rng, nu, S_bar, n_draws)
    L_prec = np.tril(chol[0])
    Z = rng.standard_normal((n_draws, P, m))
    # A = A_bar + inv(L')^T-side factor: Cov rows = inv(prec) = inv(L L')
    W = sla.solve_triangular(L_prec.T, Z.transpose(1, 0, 2).reshape(P, -1), lower=False)
    W = W.reshape(P, n_draws, m).transpose(1, 0, 2)
    coef = A_bar + W @ np.swapaxes(np.linalg.cholesky(sig), 1, 2)
    return coef, sig


def _sample_minnesota(X, Y, prior, n_draws, burn_in, rng, coef_init):
    n, P = X.shape
    m = Y.shape[1]
    XtX, XtY = X.T @ X, X.T @ Y
    prior_prec = prior.coef_precision.ravel(order="F")
    prior_term = prior_prec * prior.coef_mean.ravel(order="F")
    coef = coef_init.copy()
    out_coef = np.empty((n_draws, P, m))
    out_sig = np.empty((n_draws, m, m))
    nu = prior.dof + n
    for it in range(burn_in + n_draws):
        E = Y - X @ coef
        S = prior.scale + E.T @ E
        sigma = _draw_invwishart(rng, nu, 0.5 * (S + S.T), 1)[0]
        sig_inv = np.linalg.inv(sigma)
        H = np.kron(sig_inv, XtX)
        H[np.diag_indices_from(H)] += prior_prec
        b = prior_term + (XtY @ sig_inv).ravel(order="F")
        L = np.linalg.cholesky(H)
        mean = sla.cho_solve((L, True), b)
        z = rng.standard_normal(P * m)
        a = mean + sla.solve_triangular(L.T, z, lower=False)
        coef = a.reshape((P, m), order="F")
        if it >= burn_in:
            out_coef[it - burn_in] = coef
            out_sig[it - burn_in] = sigma
    return out_coef, out_sig


def sample_posterior(design: DesignMatrices, prior: PriorSpec, draws: int = 1000,
                     burn_in: int = 0, seed: int = 0, chains: int = 1) -> PosteriorDraws:
    """Draw from the posterior of ``(A, Sigma)``.

    The conjugate prior is sampled exactly (``burn_in`` is ignored); the
    Minnesota prior by Gibbs alternation. Each chain uses its own stream
    spawned from ``seed``; identical inputs and seed give identical draws.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    X, Y = design.regressors, design.response
    if prior.coef_mean.shape != (X.shape[1], Y.shape[1]):
        raise InconsistentInputs("prior is not conformable with the design")
    if prior.kind == MINNESOTA:
        _check_rank(X, design.regressor_names)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(chains)]
    per_chain = []
    if prior.kind == NIW:
        burn_in = 0
        for rng in streams:
            per_chain.append(_sample_niw(X, Y, prior, draws, rng))
    else:
        init, *_ = np.linalg.lstsq(X, Y, rcond=None)
        for rng in streams:
            per_chain.append(_sample_minnesota(X, Y, prior, draws, burn_in, rng, init))
    coef_chains = np.stack([c for c, _ in per_chain])
    sig_chains = np.stack([s for _, s in per_chain])
    coef = coef_chains.reshape(-1, *coef_chains.shape[2:])
    sigma = sig_chains.reshape(-1, *sig_chains.shape[2:])
    m = Y.shape[1]
    iu = np.triu_indices(m)
    mean_coef, mean_sig = coef.mean(axis=0), sigma.mean(axis=0)
    resid = Y - X @ mean_coef
    template = VarEstimate(design.endog_names, design.exog_names, design.lags, mean_coef,
                           0.5 * (mean_sig + mean_sig.T), design.nobs, residuals=resid,
                           method=f"bayes-{prior.kind}",
                           extra={"prior": prior.kind, **prior.hyper})
    return PosteriorDraws(coef, sigma, template, seed, draws, burn_in, prior.kind, chains,
                          split_rhat(coef_chains), split_rhat(sig_chains[:, :, iu[0], iu[1]]))


def posterior_mean(design: DesignMatrices, prior: PriorSpec,
                   sigma: np.ndarray | None = None) -> np.ndarray:
    """Analytic posterior mean of ``A``.

    Exact for the conjugate prior. For the Minnesota prior this is the mean
    of ``A | Sigma``, with ``Sigma`` defaulting to the least-squares
    residual covariance.
    """
    X, Y = design.regressors, design.response
    if prior.kind == NIW:
        return _niw_posterior(X, Y, prior)[0]
    P, m = prior.coef_mean.shape
    if sigma is None:
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
        E = Y - X @ coef
        sigma = E.T @ E / max(X.shape[0] - P, 1)
    sig_inv = np.linalg.inv(sigma)
    prior_prec = prior.coef_precision.ravel(order="F")
    H = np.kron(sig_inv, X.T @ X)
    H[np.diag_indices_from(H)] += prior_prec
    b = prior_prec * prior.coef_mean.ravel(order="F") + (X.T @ Y @ sig_inv).ravel(order="F")
    return np.linalg.solve(H, b).reshape((P, m), order="F")
