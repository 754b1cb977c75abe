"""Confusion-matrix metrics, sampling-strategy comparison and interaction-effect grids."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import models
from .preprocess import SamplingStrategy, balance

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """Metric values; ``None`` marks a metric whose denominator is zero."""

    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    def undefined(self) -> list[str]:
        return [m for m in METRIC_NAMES if getattr(self, m) is None]

    def as_dict(self) -> dict:
        return {m: getattr(self, m) for m in METRIC_NAMES}


def confusion(predicted, truth) -> ConfusionMatrix:
    p, t = np.asarray(predicted), np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} predictions vs {t.shape} labels")
    for name, v in (("predictions", p), ("labels", t)):
        if not np.isin(v, (0, 1)).all():
            raise ValueError(f"{name} must be 0/1")
    p, t = p.astype(bool), t.astype(bool)
    return ConfusionMatrix(int(np.sum(p & t)), int(np.sum(p & ~t)), int(np.sum(~p & ~t)),
                           int(np.sum(~p & t)))


def _ratio(num, den):
    return num / den if den else None


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """ACC, SN (= recall), SP, precision and F1 with the readmitted class as positive."""
    acc = _ratio(cm.tp + cm.tn, cm.total)
    sn = _ratio(cm.tp, cm.tp + cm.fn)
    sp = _ratio(cm.tn, cm.tn + cm.fp)
    prec = _ratio(cm.tp, cm.tp + cm.fp)
    # harmonic mean of precision and recall; 0 when both are 0, undefined when either is
    f1 = None if prec is None or sn is None else _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)
    return MetricsReport(acc, sn, sp, prec, sn, f1)


def evaluate_model(model, X, y) -> tuple[ConfusionMatrix, MetricsReport]:
    pred = models.classify(models.predict(model, X), model.threshold)
    cm = confusion(pred, y)
    return cm, metrics(cm)


def _fmt(v):
    return "" if v is None else repr(float(v))


# ---------------------------------------------------------------- sampling-strategy comparison

@dataclass(frozen=True)
class SamplingComparison:
    rows: list  # (strategy, metric, value or None, error message or "")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["strategy", "metric", "value", "error"])
        for r in self.rows:
            w.writerow([r[0], r[1], _fmt(r[2]), r[3]])
        return buf.getvalue()


COMPARISON_METRICS = ("f1", "precision", "recall", "sensitivity", "specificity")


def compare_sampling(strategies: Sequence[SamplingStrategy | str], family: str, X_train, y_train,
                     X_test, y_test, seed: int = 0, params=None) -> SamplingComparison:
    """Balance -> train -> score on the untouched test rows, once per strategy.

    A strategy whose training fails contributes rows carrying the error
    message; the remaining strategies still run.
    """
    rows = []
    for strat in strategies:
        strat = SamplingStrategy.parse(strat)
        name = strat.kind.value
        try:
            Xb, yb = balance(X_train, y_train, strat, seed)
            model = models.train(family, Xb, yb, params, seed)
            _, rep = evaluate_model(model, X_test, y_test)
            rows += [(name, m, getattr(rep, m), "") for m in COMPARISON_METRICS]
        except Exception as exc:  # noqa: BLE001 - reported per strategy
            log.error("strategy %s failed: %s", name, exc)
            rows += [(name, m, None, f"{type(exc).__name__}: {exc}") for m in COMPARISON_METRICS]
    return SamplingComparison(rows)


# ---------------------------------------------------------------- interaction grids

@dataclass(frozen=True)
class InteractionGrid:
    feature_a: str
    feature_b: str
    levels_a: list[str]
    levels_b: list[str]
    means: np.ndarray  # NaN where the cell is empty
    counts: np.ndarray

    def cell_mean(self, level_a: str, level_b: str) -> float | None:
        i, j = self.levels_a.index(level_a), self.levels_b.index(level_b)
        return None if self.counts[i, j] == 0 else float(self.means[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature_a", "level_a", "feature_b", "level_b", "count", "mean_label"])
        for i, la in enumerate(self.levels_a):
            for j, lb in enumerate(self.levels_b):
                c = int(self.counts[i, j])
                w.writerow([self.feature_a, la, self.feature_b, lb, c,
                            _fmt(None if c == 0 else self.means[i, j])])
        return buf.getvalue()


def bin_feature(x, quantile: float = 0.5, max_raw_levels: int = 0) -> tuple[np.ndarray, list[str]]:
    """Low/high split at ``quantile`` (value <= cut is low), or raw values when the
    feature has at most ``max_raw_levels`` distinct values."""
    x = np.asarray(x, dtype=float)
    distinct = np.unique(x)
    if 0 < len(distinct) <= max_raw_levels:
        labels = [repr(float(v)) for v in distinct]
        return np.searchsorted(distinct, x), labels
    cut = np.quantile(x, quantile)
    return (x > cut).astype(int), ["low", "high"]


def interaction_means(X, y, names: Sequence[str], feature_a: str, feature_b: str,
                      quantile: float = 0.5, max_raw_levels: int = 0) -> InteractionGrid:
    """Mean label per (bin of A, bin of B) cell."""
    names = list(names)
    for f in (feature_a, feature_b):
        if f not in names:
            raise KeyError(f"feature {f!r} not present")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    ba, la = bin_feature(X[:, names.index(feature_a)], quantile, max_raw_levels)
    bb, lb = bin_feature(X[:, names.index(feature_b)], quantile, max_raw_levels)
    counts = np.zeros((len(la), len(lb)), dtype=np.int64)
    sums = np.zeros((len(la), len(lb)))
    np.add.at(counts, (ba, bb), 1)
    np.add.at(sums, (ba, bb), y)
    with np.errstate(divide="ignore", invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return InteractionGrid(feature_a, feature_b, la, lb, means, counts)
