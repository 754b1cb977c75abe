from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import CART, CartParams
from .tree import CLASSIFICATION, DecisionTree, grow_tree, prune


@dataclass(frozen=True)
class CartModel:
    tree: DecisionTree
    params: CartParams
    n_features: int
    threshold: float = 0.5
    family: str = CART

    def predict_proba(self, X) -> np.ndarray:
        return self.tree.predict_value(X)


def train_cart(X, y, params: CartParams = CartParams()) -> CartModel:
    """Grow a Gini tree to purity (or the node-size floor), then cost-complexity prune it."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    full = grow_tree(X, y, task=CLASSIFICATION, min_node_size=params.min_node_size)
    return CartModel(prune(full, params.complexity), params, X.shape[1])
