"""Impulse responses: MA coefficients, orthogonalized, generalized, accumulated.

Tensors are indexed ``values[h, impulse, response]``. Shocks are one
residual standard deviation of the impulse variable.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import AlreadyAccumulated, NoStableDraws, SingularCovariance
from .estimation import VarEstimate, stability_check

KINDS = ("orthogonalized", "generalized")
DEFAULT_HORIZON = 10


@dataclass(frozen=True, eq=False)
class IrfResult:
    values: np.ndarray
    kind: str
    names: tuple[str, ...]
    accumulated: bool = False
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    quantiles: tuple[float, float, float] | None = None
    ordering: tuple[str, ...] | None = None
    excluded_fraction: float = 0.0
    stable: bool | None = None

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def response(self, impulse: str, response: str) -> np.ndarray:
        """Path of ``response`` after a shock to ``impulse``, horizons 0..H."""
        return self.values[:, self.names.index(impulse), self.names.index(response)]

    def band(self, impulse: str, response: str) -> tuple[np.ndarray, np.ndarray]:
        j, i = self.names.index(impulse), self.names.index(response)
        return self.lower[:, j, i], self.upper[:, j, i]

    def to_csv(self) -> str:
        """Long format: horizon, impulse, response, value, lower, upper."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["horizon", "impulse", "response", "value", "lower", "upper"])
        H, m = self.values.shape[0], len(self.names)
        for j in range(m):
            for i in range(m):
                for h in range(H):
                    lo = "" if self.lower is None else repr(float(self.lower[h, j, i]))
                    hi = "" if self.upper is None else repr(float(self.upper[h, j, i]))
                    w.writerow([h, self.names[j], self.names[i],
                                repr(float(self.values[h, j, i])), lo, hi])
        return buf.getvalue()


def ma_coefficients(estimate: VarEstimate, horizon: int) -> np.ndarray:
    """``Phi[h]`` with ``Phi_0 = I`` and ``Phi_h = sum_l B_l Phi_{h-l}``."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    B = estimate.lag_matrices
    L, m, _ = B.shape
    phi = np.zeros((horizon + 1, m, m))
    phi[0] = np.eye(m)
    for h in range(1, horizon + 1):
        for lag in range(1, min(h, L) + 1):
            phi[h] += B[lag - 1] @ phi[h - lag]
    return phi


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularCovariance("residual covariance is not positive definite") from None


def impact_matrix(estimate: VarEstimate, kind: str, ordering=None) -> np.ndarray:
    """Columns are the horizon-0 responses to each (original-label) impulse."""
    sigma = estimate.sigma
    names = estimate.endog_names
    if kind == "generalized":
        _cholesky(sigma)
        sd = np.sqrt(np.diag(sigma))
        impact = sigma / sd[None, :]
        np.fill_diagonal(impact, sd)  # exact own-shock impact
        return impact
    if kind != "orthogonalized":
        raise ValueError(f"kind must be one of {KINDS}")
    order = _order_index(names, ordering)
    P = np.zeros_like(sigma)
    factor = _cholesky(sigma[np.ix_(order, order)])
    P[np.ix_(order, order)] = factor
    return P


def _order_index(names, ordering) -> list[int]:
    if ordering is None:
        return list(range(len(names)))
    if sorted(ordering) != sorted(names):
        raise ValueError(f"ordering {list(ordering)} is not a permutation of {list(names)}")
    return [names.index(v) for v in ordering]


def _tensor(phi: np.ndarray, impact: np.ndarray) -> np.ndarray:
    # values[h, j, i] = (Phi_h @ P)[i, j]
    return np.transpose(phi @ impact, (0, 2, 1))


def oirf(estimate: VarEstimate, horizon: int = DEFAULT_HORIZON, ordering=None) -> IrfResult:
    """Cholesky-orthogonalized responses under ``ordering``.

    The covariance is permuted into ``ordering``, factored, and the factor is
    mapped back to the original labels, so impulses and responses keep their
    original indices.
    """
    P = impact_matrix(estimate, "orthogonalized", ordering)
    values = _tensor(ma_coefficients(estimate, horizon), P)
    ordering = tuple(ordering) if ordering is not None else estimate.endog_names
    return IrfResult(values, "orthogonalized", estimate.endog_names, ordering=ordering,
                     stable=stability_check(estimate).stable)


def girf(estimate: VarEstimate, horizon: int = DEFAULT_HORIZON) -> IrfResult:
    """Generalized responses to a one-standard-deviation shock.

    Response at ``h`` to impulse ``j`` is ``Phi_h Sigma e_j / sqrt(Sigma_jj)``.
    """
    P = impact_matrix(estimate, "generalized")
    values = _tensor(ma_coefficients(estimate, horizon), P)
    return IrfResult(values, "generalized", estimate.endog_names,
                     stable=stability_check(estimate).stable)


def compute_irf(estimate: VarEstimate, horizon: int, kind: str, ordering=None) -> IrfResult:
    if kind in ("generalized", "girf"):
        return girf(estimate, horizon)
    if kind in ("orthogonalized", "oirf"):
        return oirf(estimate, horizon, ordering)
    raise ValueError(f"unknown IRF kind {kind!r}")


def accumulate_irf(irf: IrfResult) -> IrfResult:
    """Cumulative sum over horizons; every other attribute is preserved."""
    if irf.accumulated:
        raise AlreadyAccumulated("IRF is already accumulated")
    return replace(irf, values=np.cumsum(irf.values, axis=0), accumulated=True,
                   lower=None if irf.lower is None else np.cumsum(irf.lower, axis=0),
                   upper=None if irf.upper is None else np.cumsum(irf.upper, axis=0))


def long_run_multiplier(estimate: VarEstimate) -> np.ndarray:
    """``(I - sum_l B_l)^{-1}``."""
    B = estimate.lag_matrices
    return np.linalg.inv(np.eye(B.shape[1]) - B.sum(axis=0))


def _ma_batch(B: np.ndarray, horizon: int) -> np.ndarray:
    """MA coefficients for a stack of lag polynomials ``B[d, l]``."""
    D, L, m, _ = B.shape
    phi = np.zeros((D, horizon + 1, m, m))
    phi[:, 0] = np.eye(m)
    for h in range(1, horizon + 1):
        for lag in range(1, min(h, L) + 1):
            phi[:, h] += B[:, lag - 1] @ phi[:, h - lag]
    return phi


def irf_bands(draws, horizon: int = DEFAULT_HORIZON, kind: str = "generalized",
              quantiles=(0.05, 0.5, 0.95), ordering=None, accumulate: bool = False) -> IrfResult:
    """Pointwise posterior quantiles of the IRF across draws.

    Draws whose companion matrix has spectral radius ``>= 1`` are excluded;
    the excluded share is reported on the result. The point value is the
    middle quantile (the median by default).

    Raises
    ------
    NoStableDraws
        Every draw is explosive.
    """
    q_lo, q_mid, q_hi = quantiles
    if not q_lo <= q_mid <= q_hi:
        raise ValueError("quantiles must be ordered (lower, point, upper)")
    template = draws.template
    m, L = template.n_endog, template.lags
    coefs, sigmas = draws.coef, draws.sigma
    if coefs.shape[0] == 0:
        raise NoStableDraws("no draws supplied")
    B = np.transpose(coefs[:, : m * L].reshape(-1, m, L, m), (0, 2, 3, 1))
    comp = np.zeros((B.shape[0], m * L, m * L))
    comp[:, :m] = np.concatenate(list(np.moveaxis(B, 1, 0)), axis=-1)
    if L > 1:
        comp[:, m:, :-m] = np.eye(m * (L - 1))
    radius = np.abs(np.linalg.eigvals(comp)).max(axis=1)
    ok = radius < 1.0
    if not ok.any():
        raise NoStableDraws("every posterior draw is explosive")
    B, S = B[ok], sigmas[ok]
    phi = _ma_batch(B, horizon)
    if kind in ("generalized", "girf"):
        sd = np.sqrt(np.einsum("dii->di", S))
        impact = S / sd[:, None, :]
        idx = np.arange(m)
        impact[:, idx, idx] = sd
        kind = "generalized"
    elif kind in ("orthogonalized", "oirf"):
        order = _order_index(template.endog_names, ordering)
        impact = np.zeros_like(S)
        sub = S[:, order][:, :, order]
        try:
            fac = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            raise SingularCovariance("a covariance draw is not positive definite") from None
        impact[:, np.array(order)[:, None], np.array(order)[None, :]] = fac
        kind = "orthogonalized"
        ordering = tuple(ordering) if ordering is not None else template.endog_names
    else:
        raise ValueError(f"unknown IRF kind {kind!r}")
    vals = np.transpose(phi @ impact[:, None], (0, 1, 3, 2))
    if accumulate:
        vals = np.cumsum(vals, axis=1)
    lo, mid, hi = np.quantile(vals, [q_lo, q_mid, q_hi], axis=0)
    return IrfResult(mid, kind, template.endog_names, accumulated=accumulate, lower=lo,
                     upper=hi, quantiles=(q_lo, q_mid, q_hi), ordering=ordering,
                     excluded_fraction=float(1 - ok.mean()), stable=True)
