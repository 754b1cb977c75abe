from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import FOREST, ForestParams
from .tree import CLASSIFICATION, REGRESSION, DecisionTree, grow_tree


@dataclass(frozen=True)
class ForestModel:
    """Bagged trees with per-split feature subsampling.

    ``tree_seeds`` regenerate each tree's bootstrap sample, so out-of-bag
    rows are recoverable for the training matrix.
    """

    trees: tuple[DecisionTree, ...]
    tree_seeds: tuple[int, ...]
    m: int
    params: ForestParams
    n_features: int
    n_train: int
    threshold: float = 0.5
    family: str = FOREST

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict_value(X) for t in self.trees], axis=0)

    def inbag_counts(self, k: int) -> np.ndarray:
        return np.bincount(_bootstrap(self.tree_seeds[k], self.n_train), minlength=self.n_train)


def _bootstrap(seed: int, n: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, n, size=n)


def train_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0,
                 record_candidates: bool = False) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    m = params.features_per_split(p)
    seeds = tuple(int(s) for s in np.random.SeedSequence(seed).generate_state(params.n_trees, np.uint32))
    task = REGRESSION if params.regression else CLASSIFICATION
    trees = []
    for s in seeds:
        sample = _bootstrap(s, n)
        rng = np.random.default_rng([s, 1])
        trees.append(grow_tree(X, y, task=task, min_node_size=params.min_node_size,
                               max_depth=params.max_depth, max_features=m, rng=rng,
                               sample_index=sample, record_candidates=record_candidates))
    return ForestModel(tuple(trees), seeds, m, params, p, n)


def oob_permutation_losses(model: ForestModel, X, y, seed: int = 0) -> np.ndarray:
    """Per-tree out-of-bag accuracy loss from permuting each feature.

    Returns a ``(n_trees, n_features)`` matrix. A feature the tree never splits
    on has loss exactly 0 for that tree. For regression forests the loss is
    the increase in out-of-bag mean squared error.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != model.n_train:
        raise ValueError("OOB importance needs the forest's own training matrix")
    rng = np.random.default_rng(seed)
    losses = np.zeros((len(model.trees), model.n_features))
    regression = model.params.regression
    for k, tree in enumerate(model.trees):
        oob = np.flatnonzero(model.inbag_counts(k) == 0)
        if oob.size < 2:
            continue
        Xo = X[oob]
        yo = y[oob]

        def score(M):
            v = tree.predict_value(M)
            if regression:
                return -np.mean((v - yo) ** 2)
            return np.mean((v >= 0.5) == (yo >= 0.5))

        base = score(Xo)
        for j in np.unique(tree.feature[tree.feature >= 0]):
            saved = Xo[:, j].copy()
            Xo[:, j] = saved[rng.permutation(oob.size)]
            losses[k, j] = base - score(Xo)
            Xo[:, j] = saved
    return losses
