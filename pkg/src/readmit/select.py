"""Boruta all-relevant selection, two-threshold stepwise logistic selection, and their consensus."""
from __future__ import annotations

import csv
import enum
import io
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .models import ForestParams, GlmParams, oob_permutation_losses, train_forest, train_glm
from .models.glm import SeparationWarning

log = logging.getLogger(__name__)


class SelectionError(ValueError):
    pass


class Decision(str, enum.Enum):
    CONFIRMED = "Confirmed"
    TENTATIVE = "Tentative"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class BorutaConfig:
    max_iterations: int = 100
    forest: ForestParams = ForestParams(n_trees=50, min_node_size=1)
    alpha: float = 0.01


@dataclass
class FeatureImportanceReport:
    names: list[str]
    mean_importance: np.ndarray
    sd_importance: np.ndarray
    z_score: np.ndarray
    decisions: list[Decision]
    hits: np.ndarray
    runs: np.ndarray
    iterations: int
    shadow_max_history: list[float] = field(default_factory=list)
    decided_at: list[int | None] = field(default_factory=list)

    def with_decision(self, decision: Decision) -> list[str]:
        return [n for n, d in zip(self.names, self.decisions) if d == decision]

    @property
    def confirmed(self) -> list[str]:
        return self.with_decision(Decision.CONFIRMED)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "mean_importance", "sd_importance", "z_score", "hits", "runs",
                    "decision"])
        order = sorted(range(len(self.names)), key=lambda i: (-_finite_or(self.z_score[i]), i))
        for i in order:
            w.writerow([self.names[i], repr(float(self.mean_importance[i])),
                        repr(float(self.sd_importance[i])), repr(float(self.z_score[i])),
                        int(self.hits[i]), int(self.runs[i]), self.decisions[i].value])
        return buf.getvalue()


def _finite_or(v, default=-np.inf):
    return float(v) if np.isfinite(v) else default


def make_shadows(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independently permute every column of ``X``."""
    S = np.empty_like(X)
    for j in range(X.shape[1]):
        S[:, j] = X[rng.permutation(X.shape[0]), j]
    return S


def _z(losses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = losses.mean(axis=0)
    sd = losses.std(axis=0, ddof=1) if losses.shape[0] > 1 else np.zeros(losses.shape[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, mean / sd, np.where(mean == 0, 0.0, np.sign(mean) * np.inf))
    return mean, z


def binomial_decision(hits: int, runs: int, threshold: float) -> Decision:
    """Two-sided binomial test of the hit count against a fair coin."""
    upper = binom.sf(hits - 1, runs, 0.5)  # P(X >= hits)
    lower = binom.cdf(hits, runs, 0.5)  # P(X <= hits)
    p_two = min(1.0, 2.0 * min(upper, lower))
    if p_two < threshold:
        return Decision.CONFIRMED if upper < lower else Decision.REJECTED
    return Decision.TENTATIVE


def boruta(X, y, names: Sequence[str] | None = None, config: BorutaConfig = BorutaConfig(),
           seed: int = 0) -> FeatureImportanceReport:
    """Boruta selection with OOB permutation importance.

    Each round adds a permuted copy of every still-active feature, fits a
    forest, and scores features by Z = mean/sd of the per-tree accuracy loss.
    A feature scores a hit when its Z beats the best shadow Z. Hit counts are
    tested two-sided against Binomial(runs, 1/2) at ``config.alpha`` with a
    Bonferroni correction over all features; rejected features leave the
    forest, confirmed ones stay.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if p < 2:
        raise SelectionError("Boruta needs at least two features")
    if len(np.unique(y)) < 2:
        raise SelectionError("Boruta needs both classes present")
    if config.max_iterations < 1:
        raise SelectionError("max_iterations must be >= 1")
    rng = np.random.default_rng(seed)
    decisions = [Decision.TENTATIVE] * p
    decided_at: list[int | None] = [None] * p
    hits = np.zeros(p, dtype=int)
    runs = np.zeros(p, dtype=int)
    imp_hist = [[] for _ in range(p)]
    shadow_hist = []
    threshold = config.alpha / p
    it = 0
    for it in range(1, config.max_iterations + 1):
        active = [j for j in range(p) if decisions[j] != Decision.REJECTED]
        Xa = X[:, active]
        Xs = np.hstack([Xa, make_shadows(Xa, rng)])
        forest = train_forest(Xs, y, config.forest, seed=int(rng.integers(2**31)))
        losses = oob_permutation_losses(forest, Xs, y, seed=int(rng.integers(2**31)))
        mean, z = _z(losses)
        k = len(active)
        shadow_max = float(np.max(z[k:]))
        shadow_hist.append(shadow_max)
        for pos, j in enumerate(active):
            imp_hist[j].append(mean[pos])
            if decisions[j] == Decision.TENTATIVE:
                runs[j] += 1
                hits[j] += bool(z[pos] > shadow_max)
        for j in range(p):
            if decisions[j] == Decision.TENTATIVE:
                d = binomial_decision(int(hits[j]), int(runs[j]), threshold)
                if d != Decision.TENTATIVE:
                    decisions[j] = d
                    decided_at[j] = it
        log.debug("boruta iteration %d: %d confirmed, %d rejected", it,
                  decisions.count(Decision.CONFIRMED), decisions.count(Decision.REJECTED))
        if Decision.TENTATIVE not in decisions:
            break
    mean_imp = np.array([np.mean(h) for h in imp_hist])
    sd_imp = np.array([np.std(h, ddof=1) if len(h) > 1 else 0.0 for h in imp_hist])
    with np.errstate(divide="ignore", invalid="ignore"):
        z_all = np.where(sd_imp > 0, mean_imp / sd_imp,
                         np.where(mean_imp == 0, 0.0, np.sign(mean_imp) * np.inf))
    return FeatureImportanceReport(names, mean_imp, sd_imp, z_all, decisions, hits, runs, it,
                                   shadow_hist, decided_at)


# ---------------------------------------------------------------- stepwise

@dataclass
class StepwiseTrace:
    steps: list[tuple[int, str, str, float]]  # (step, action, feature, p-value)
    selected: list[str]
    alpha_enter: float
    alpha_remove: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "action", "feature", "p_value"])
        for s in self.steps:
            w.writerow([s[0], s[1], s[2], repr(float(s[3]))])
        return buf.getvalue()


def _pvalues(X, y, cols):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeparationWarning)
        model = train_glm(X[:, cols], y, GlmParams())
    return model.wald_pvalues()


def stepwise_select(X, y, names: Sequence[str] | None = None, alpha_enter: float = 0.05,
                    alpha_remove: float = 0.10, max_actions: int | None = None) -> StepwiseTrace:
    """Forward selection with backward re-checks after every addition.

    The candidate with the smallest Wald p-value enters if it is below
    ``alpha_enter``; afterwards the included feature with the largest p-value
    above ``alpha_remove`` leaves, repeatedly. A model state is never revisited.
    """
    if not alpha_enter < alpha_remove:
        raise SelectionError("alpha_enter must be strictly below alpha_remove")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    usable = [j for j in range(p) if np.ptp(X[:, j]) > 0]
    cap = max_actions if max_actions is not None else 4 * p + 10
    selected: list[int] = []
    seen = {frozenset()}
    steps: list[tuple[int, str, str, float]] = []
    while True:
        best_j, best_p = -1, np.inf
        for j in usable:
            if j in selected or frozenset(selected + [j]) in seen:
                continue
            pv = _pvalues(X, y, selected + [j])[-1]
            if pv < best_p:
                best_j, best_p = j, pv
        if best_j < 0 or not best_p < alpha_enter:
            break
        selected.append(best_j)
        seen.add(frozenset(selected))
        steps.append((len(steps) + 1, "add", names[best_j], float(best_p)))
        while selected:
            pv = _pvalues(X, y, selected)
            worst = int(np.argmax(pv))
            if not pv[worst] > alpha_remove:
                break
            state = frozenset(selected) - {selected[worst]}
            if state in seen:
                break
            gone = selected.pop(worst)
            seen.add(state)
            steps.append((len(steps) + 1, "remove", names[gone], float(pv[worst])))
        if len(steps) > cap:
            raise SelectionError(f"stepwise selection exceeded {cap} actions without terminating")
    return StepwiseTrace(steps, [names[j] for j in selected], alpha_enter, alpha_remove)


def consensus(report: FeatureImportanceReport, trace: StepwiseTrace) -> list[str]:
    """Features Boruta confirmed and stepwise kept, by descending Boruta Z."""
    chosen = set(trace.selected)
    idx = [i for i, (n, d) in enumerate(zip(report.names, report.decisions))
           if d == Decision.CONFIRMED and n in chosen]
    idx.sort(key=lambda i: (-_finite_or(report.z_score[i], np.inf), i))
    return [report.names[i] for i in idx]
