"""Outlier flagging, imputation, min-max scaling, partitioning and class rebalancing."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .ingest import CohortTable

log = logging.getLogger(__name__)

MAD_SCALE = 1.4826


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizationParams:
    columns: tuple[int, ...]
    e_min: tuple[float, ...]
    e_max: tuple[float, ...]

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.e_min, self.e_max)):
            raise PreprocessError("normalization minimum exceeds maximum")

    def to_dict(self):
        return {"columns": list(self.columns), "e_min": list(self.e_min), "e_max": list(self.e_max)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["columns"]), tuple(d["e_min"]), tuple(d["e_max"]))


@dataclass(frozen=True)
class ImputationParams:
    columns: tuple[int, ...]
    means: tuple[float, ...]
    fallback_levels: dict  # categorical source -> column index of its most frequent level

    def __post_init__(self):
        if not all(np.isfinite(self.means)):
            raise PreprocessError("imputation means must be finite")

    def to_dict(self):
        return {"columns": list(self.columns), "means": list(self.means),
                "fallback_levels": dict(self.fallback_levels)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["columns"]), tuple(d["means"]), dict(d["fallback_levels"]))


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


class Sampling(str, enum.Enum):
    NONE = "none"
    OVERSAMPLE = "oversample"
    UNDERSAMPLE = "undersample"
    ROSE = "rose"


@dataclass(frozen=True)
class SamplingStrategy:
    kind: Sampling = Sampling.UNDERSAMPLE
    shrink: float = 1.0  # ROSE bandwidth multiplier

    @classmethod
    def parse(cls, value: "str | SamplingStrategy") -> "SamplingStrategy":
        return value if isinstance(value, SamplingStrategy) else cls(Sampling(value))


# ---------------------------------------------------------------- outliers

def detect_outliers_mad(column, cutoff: float = 3.0) -> np.ndarray:
    """Flag values whose robust z-score ``|x - median| / (1.4826 * MAD)`` exceeds ``cutoff``.

    Missing (NaN) entries are never flagged. A zero MAD flags nothing.
    """
    x = np.asarray(column, dtype=float)
    finite = np.isfinite(x)
    if not finite.any():
        raise PreprocessError("cannot compute MAD of an all-missing column")
    if cutoff <= 0:
        raise PreprocessError("cutoff must be positive")
    vals = x[finite]
    med = np.median(vals)
    mad = np.median(np.abs(vals - med))
    mask = np.zeros(x.shape, dtype=bool)
    if mad == 0:
        log.warning("MAD is zero (degenerate scale); no outliers flagged")
        return mask
    z = np.abs(vals - med) / (MAD_SCALE * mad)
    mask[finite] = z > cutoff
    return mask


def blank_outliers(table: CohortTable, cutoff: float = 3.0, rows=None) -> CohortTable:
    """Set MAD outliers in numeric columns to NaN so they are mean-imputed later.

    When ``rows`` is given, the median/MAD are computed on those rows only and
    applied to every row.
    """
    X = table.X.copy()
    total = 0
    for j in table.numeric_indices():
        ref = X[:, j] if rows is None else X[rows, j]
        if not np.isfinite(ref).any():
            continue
        med = np.nanmedian(ref)
        mad = np.nanmedian(np.abs(ref - med))
        if mad == 0:
            continue
        z = np.abs(X[:, j] - med) / (MAD_SCALE * mad)
        flagged = np.nan_to_num(z, nan=0.0) > cutoff
        X[flagged, j] = np.nan
        total += int(flagged.sum())
    return table.with_matrix(X, f"blank_outliers(cutoff={cutoff}, cells={total})")


# ---------------------------------------------------------------- imputation / scaling

def impute_missing(table: CohortTable, params: ImputationParams | None = None
                   ) -> tuple[CohortTable, ImputationParams]:
    """Replace missing numeric cells with (training) column means."""
    X = table.X.copy()
    if params is None:
        cols, means = [], []
        for j in table.numeric_indices():
            col = X[:, j]
            if not np.isfinite(col).any():
                raise PreprocessError(f"column {table.columns[j].name} is entirely missing")
            cols.append(j)
            means.append(float(np.nanmean(col)))
        fallback = {}
        for source, idx in table.categorical_blocks().items():
            fallback[source] = int(idx[int(np.argmax(X[:, idx].sum(axis=0)))])
        params = ImputationParams(tuple(cols), tuple(means), fallback)
    filled = 0
    for j, m in zip(params.columns, params.means):
        miss = ~np.isfinite(X[:, j])
        X[miss, j] = m
        filled += int(miss.sum())
    for source, idx in table.categorical_blocks().items():
        empty = X[:, idx].sum(axis=1) == 0
        if empty.any() and source in params.fallback_levels:
            X[empty, params.fallback_levels[source]] = 1.0
            filled += int(empty.sum())
    return table.with_matrix(X, f"impute_missing(cells={filled})"), params


def normalize(table: CohortTable, params: NormalizationParams | None = None
              ) -> tuple[CohortTable, NormalizationParams]:
    """Min-max scale every column; a constant column maps to 0.5."""
    X = table.X
    if not np.isfinite(X).all():
        raise PreprocessError("normalize requires a complete, finite matrix")
    if params is None:
        cols = tuple(range(X.shape[1]))
        params = NormalizationParams(cols, tuple(float(v) for v in X.min(axis=0)),
                                     tuple(float(v) for v in X.max(axis=0)))
    out = X.copy()
    for j, lo, hi in zip(params.columns, params.e_min, params.e_max):
        out[:, j] = 0.5 if hi == lo else (X[:, j] - lo) / (hi - lo)
    outside = int(((out < 0) | (out > 1)).sum())
    if outside:
        log.info("normalize: %d cell(s) fell outside [0, 1] under reused parameters", outside)
    return table.with_matrix(out, f"normalize(outside_unit={outside})"), params


# ---------------------------------------------------------------- partitioning

def partition(table_or_rows, ratio: float = 0.70, seed: int = 0) -> SplitIndices:
    """Uniform random train/test split; the train size is ``round(ratio * n)``."""
    n = table_or_rows if isinstance(table_or_rows, (int, np.integer)) else len(table_or_rows.y)
    if not 0 < ratio < 1:
        raise PreprocessError("split ratio must lie in (0, 1)")
    if n < 10:
        raise PreprocessError("partition needs at least 10 rows")
    perm = np.random.default_rng(seed).permutation(n)
    k = int(np.floor(ratio * n + 0.5))
    return SplitIndices(np.sort(perm[:k]), np.sort(perm[k:]), seed)


def stratified_holdout(y, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split positions of ``y`` into (fit, holdout) keeping class proportions."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fit, hold = [], []
    for c in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == c))
        k = int(np.floor(ratio * len(idx) + 0.5))
        fit.append(idx[:k])
        hold.append(idx[k:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(hold))


# ---------------------------------------------------------------- balancing

def _silverman(X: np.ndarray) -> np.ndarray:
    n, d = X.shape
    sd = X.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    return (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4)) * sd


def balance(X, y, strategy: SamplingStrategy | str = SamplingStrategy(), seed: int = 0,
            return_index: bool = False):
    """Equalize class counts.

    Oversample keeps every row and redraws minority rows with replacement up to
    the majority count; Undersample draws majority rows without replacement down
    to the minority count; Rose replaces the data with an equal number of
    synthetic rows per class (total size unchanged) drawn from a Gaussian kernel
    around randomly chosen rows of that class.

    With ``return_index`` the source row of each output row is also returned
    (-1 for synthetic rows).
    """
    strategy = SamplingStrategy.parse(strategy)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) != 2:
        raise PreprocessError("balancing requires both classes present")
    rng = np.random.default_rng(seed)
    minority = classes[np.argmin(counts)] if counts[0] != counts[1] else classes[1]
    majority = classes[0] if minority == classes[1] else classes[1]
    min_idx = np.flatnonzero(y == minority)
    maj_idx = np.flatnonzero(y == majority)
    kind = strategy.kind

    if kind == Sampling.NONE:
        index = np.arange(len(y))
    elif kind == Sampling.OVERSAMPLE:
        extra = rng.choice(min_idx, size=len(maj_idx) - len(min_idx), replace=True)
        index = rng.permutation(np.concatenate([np.arange(len(y)), extra]))
    elif kind == Sampling.UNDERSAMPLE:
        keep = rng.choice(maj_idx, size=len(min_idx), replace=False)
        index = rng.permutation(np.concatenate([min_idx, keep]))
    elif kind == Sampling.ROSE:
        n = len(y)
        n_per = [n // 2, n - n // 2]
        parts_X, parts_y = [], []
        for c, m in zip(classes, n_per):
            src = X[y == c]
            h = strategy.shrink * _silverman(src)
            centers = src[rng.integers(0, len(src), size=m)]
            parts_X.append(centers + rng.standard_normal(centers.shape) * h)
            parts_y.append(np.full(m, c, dtype=y.dtype))
        Xs, ys = np.vstack(parts_X), np.concatenate(parts_y)
        order = rng.permutation(len(ys))
        if return_index:
            return Xs[order], ys[order], np.full(len(ys), -1)
        return Xs[order], ys[order]
    else:  # pragma: no cover
        raise PreprocessError(f"unknown sampling strategy {kind}")
    if return_index:
        return X[index], y[index], index
    return X[index], y[index]
