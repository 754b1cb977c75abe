from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .params import SVM, SvmParams

log = logging.getLogger(__name__)

_TAU = 1e-12


def kernel_matrix(A, B, kernel: str, gamma: float = 1.0, degree: int = 3) -> np.ndarray:
    """K[i, j] = K(A[i], B[j]) for the linear, polynomial and RBF kernels."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly":
        return (1.0 + A @ B.T) ** degree
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class SvmModel:
    """Kernel SVM ``f(x) = bias + sum_i dual_coef[i] * K(x, support_vectors[i])``.

    ``dual_coef`` folds the label sign into the multiplier (``a_i = alpha_i * y_i``).
    Probabilities come from a sigmoid ``1 / (1 + exp(platt_a * f + platt_b))``.
    """

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    params: SvmParams
    n_features: int
    platt_a: float
    platt_b: float
    n_iter: int
    threshold: float = 0.5
    family: str = SVM

    def kernel(self, X) -> np.ndarray:
        return kernel_matrix(X, self.support_vectors, self.params.kernel, self.params.gamma,
                             self.params.degree)

    def decision_function(self, X) -> np.ndarray:
        return self.bias + self.kernel(X) @ self.dual_coef

    def predict_proba(self, X) -> np.ndarray:
        f = self.decision_function(X)
        return 1.0 / (1.0 + np.exp(np.clip(self.platt_a * f + self.platt_b, -500, 500)))


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 200_000):
    """Solve the soft-margin dual with second-order working-set selection.

    ``K`` is the full kernel matrix and ``y`` holds labels in {-1, +1}.
    Returns ``(alpha, bias, iterations)``; stops when the maximal KKT
    violation ``m(alpha) - M(alpha)`` falls below ``tol``.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        m_val = yg[i]
        M_val = yg[low].min()
        if m_val - M_val < tol:
            break
        b = m_val - yg
        cand = low & (b > 0)
        a = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, _TAU)
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        it += 1

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        di, dj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        grad += Q[:, i] * di + Q[:, j] * dj
    else:
        log.warning("SMO hit the iteration cap (%d)", max_iter)

    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, it


def platt_scale(f: np.ndarray, y01: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Fit ``P(y=1|f) = 1/(1+exp(A f + B))`` by Newton's method with smoothed targets."""
    f = np.asarray(f, dtype=float)
    n_pos = float(np.sum(y01 == 1))
    n_neg = float(len(y01) - n_pos)
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y01 == 1, hi, lo)
    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))

    def objective(A, B):
        z = A * f + B
        return float(np.sum(t * z + np.logaddexp(0.0, -z)))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = A * f + B
        p = 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))  # P(y=1)
        q = 1.0 - p
        d1 = t - q  # dF/dz
        d2 = p * q
        h11 = np.sum(f * f * d2) + 1e-12
        h22 = np.sum(d2) + 1e-12
        h21 = np.sum(f * d2)
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return A, B


def train_svm(X, y, params: SvmParams = SvmParams()) -> SvmModel:
    """Train a soft-margin kernel SVM by SMO and calibrate it with Platt scaling."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    ys = np.where(y > 0, 1.0, -1.0)
    K = kernel_matrix(X, X, params.kernel, params.gamma, params.degree)
    alpha, bias, it = smo(K, ys, params.C, params.tol, params.max_iter)
    sv = alpha > 0
    dual = alpha[sv] * ys[sv]
    f = bias + K[:, sv] @ dual
    if np.unique(ys).size == 2:
        A, B = platt_scale(f, (ys > 0).astype(int))
    else:
        A, B = -1.0, 0.0
    return SvmModel(X[sv].copy(), dual, bias, params, X.shape[1], A, B, it)
