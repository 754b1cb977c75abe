from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .params import GLM, GlmParams

log = logging.getLogger(__name__)


class SeparationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GlmModel:
    """Logistic regression ``p = sigmoid(b0 + X @ coef)``."""

    intercept: float
    coef: np.ndarray
    std_errors: np.ndarray  # intercept first
    params: GlmParams
    n_features: int
    converged: bool
    n_iter: int
    penalty_used: float
    threshold: float = 0.5
    family: str = GLM

    def decision_function(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def wald_pvalues(self) -> np.ndarray:
        """Two-sided Wald p-values for ``coef`` (intercept excluded)."""
        se = self.std_errors[1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, np.abs(self.coef) / se, 0.0)
        return 2.0 * norm.sf(z)


def _design(X):
    X = np.asarray(X, dtype=float)
    return np.hstack([np.ones((X.shape[0], 1)), X])


def penalized_loglik(beta, X, y, l2: float) -> float:
    """Log-likelihood minus ``l2/2 * ||coef||^2`` (intercept unpenalized)."""
    eta = _design(X) @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * l2 * np.sum(beta[1:] ** 2))


def penalized_gradient(beta, X, y, l2: float) -> np.ndarray:
    Z = _design(X)
    g = Z.T @ (np.asarray(y, dtype=float) - expit(Z @ beta))
    g[1:] -= l2 * beta[1:]
    return g


def _irls(Z, y, l2, max_iter, tol=1e-8):
    p = Z.shape[1]
    pen = np.full(p, l2)
    pen[0] = 0.0
    beta = np.zeros(p)
    separated = False
    converged = False
    it = 0

    def objective(b):
        eta = Z @ b
        return np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * np.sum(pen * b * b)

    obj = objective(beta)
    for it in range(1, max_iter + 1):
        eta = Z @ beta
        mu = expit(eta)
        w = mu * (1 - mu)
        H = (Z * w[:, None]).T @ Z + np.diag(pen)
        g = Z.T @ (y - mu) - pen * beta
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        # step halving keeps the penalized likelihood non-decreasing
        t = 1.0
        while True:
            cand = beta + t * step
            new = objective(cand)
            if new >= obj - 1e-12 * abs(obj) or t < 1e-6:
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, obj = cand, new
        if l2 == 0 and np.max(np.abs(Z @ beta)) > 30:
            separated = True
            break
        if change < tol:
            converged = True
            break
    return beta, converged, it, separated


def train_glm(X, y, params: GlmParams = GlmParams()) -> GlmModel:
    """Fit logistic regression by IRLS (Newton) with optional L2 penalty.

    Convergence is declared when the largest coefficient change drops below
    1e-8. An unpenalized fit that runs into perfect separation emits a
    :class:`SeparationWarning` and is refit with ``params.separation_penalty``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.isfinite(X).all():
        raise ValueError("GLM input has missing or non-finite cells")
    Z = _design(X)
    l2 = params.l2_penalty
    beta, converged, it, separated = _irls(Z, y, l2, params.max_iter)
    if separated:
        warnings.warn("perfect separation detected; refitting with L2 penalty "
                      f"{params.separation_penalty}", SeparationWarning, stacklevel=2)
        l2 = params.separation_penalty
        beta, converged, it, _ = _irls(Z, y, l2, params.max_iter)
    if not converged:
        log.warning("GLM hit the iteration cap (%d) before converging", params.max_iter)
    mu = expit(Z @ beta)
    pen = np.full(Z.shape[1], l2)
    pen[0] = 0.0
    H = (Z * (mu * (1 - mu))[:, None]).T @ Z + np.diag(pen)
    cov = np.linalg.pinv(H)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return GlmModel(float(beta[0]), beta[1:].copy(), se, params, X.shape[1], converged, it, l2,
                    threshold=params.threshold)
