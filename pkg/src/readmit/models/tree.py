"""Binary decision trees: greedy growth, weakest-link cost-complexity pruning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"
_EPS = 1e-12


@dataclass
class DecisionTree:
    """Array-backed binary tree in preorder (a parent precedes its children).

    ``value`` holds the class-1 probability (classification) or the mean
    response (regression) for every node, internal ones included, so any
    node can be collapsed into a leaf. ``error`` is the node's resubstitution
    error R(t) as a leaf, normalized by the root sample count.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    error: np.ndarray
    task: str = CLASSIFICATION
    candidates: list | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    @property
    def n_leaves(self) -> int:
        return int((self.left < 0).sum())

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for t in range(self.n_nodes):
            if self.left[t] >= 0:
                depth[self.left[t]] = depth[self.right[t]] = depth[t] + 1
        return int(depth.max())

    def subtree_error(self) -> float:
        """R(T): summed leaf error."""
        return float(self.error[self.left < 0].sum())

    def cost(self, alpha: float) -> float:
        return self.subtree_error() + alpha * self.n_leaves

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row (go left when ``x <= threshold``)."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.left[node[active]] >= 0]
        return node

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def leaf_proba(self, node: int) -> tuple[float, float]:
        p = float(self.value[node])
        return 1.0 - p, p

    def to_dict(self) -> dict:
        return {"task": self.task, "feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(), "left": self.left.tolist(),
                "right": self.right.tolist(), "value": self.value.tolist(),
                "n_node": self.n_node.tolist(), "error": self.error.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float), np.array(d["n_node"], dtype=np.int64),
                   np.array(d["error"], dtype=float), d["task"])


# ---------------------------------------------------------------- growth

def _best_split(X, y, idx, features, min_leaf, task):
    """Best (score, feature, threshold) over ``features``; lower score is better.

    All candidate features are scanned in one vectorized pass. Ties resolve
    to the lowest column index, then the lowest threshold.
    """
    n = len(idx)
    sizes = np.arange(1, n)
    size_ok = (sizes >= min_leaf) & (n - sizes >= min_leaf)
    if not size_ok.any():
        return (np.inf, -1, 0.0)
    features = np.asarray(features)
    sub = X[np.ix_(idx, features)]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[idx][order]
    valid = size_ok[:, None] & (xs[:-1] < xs[1:])
    if not valid.any():
        return (np.inf, -1, 0.0)
    cs = np.cumsum(ys, axis=0)[:-1]
    total = ys.sum(axis=0)
    nl = sizes[:, None].astype(float)
    nr = n - nl
    cr = total[None, :] - cs
    if task == CLASSIFICATION:
        score = cs * (nl - cs) / nl + cr * (nr - cr) / nr
    else:
        score = -(cs * cs / nl + cr * cr / nr)
    score = np.where(valid, score, np.inf)
    flat = int(np.argmin(score.T))  # feature-major: lowest feature, then lowest threshold
    k, i = divmod(flat, n - 1)
    lo, hi = xs[i, k], xs[i + 1, k]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return (float(score[i, k]), int(features[k]), float(thr))


def grow_tree(X, y, *, task: str = CLASSIFICATION, min_node_size: int = 1,
              max_depth: int | None = None, max_features: int | None = None,
              rng: np.random.Generator | None = None, sample_index=None,
              record_candidates: bool = False) -> DecisionTree:
    """Grow a tree greedily until leaves are pure, too small, or at ``max_depth``.

    A split is admissible only if both children hold at least ``min_node_size``
    rows. ``max_features`` enables per-node random feature subsets (forests);
    ``sample_index`` lists the (possibly repeated) training rows to use.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n_features = X.shape[1]
    if min_node_size < 1:
        raise ValueError("min_node_size must be >= 1")
    if max_features is not None and not 1 <= max_features <= n_features:
        raise ValueError("max_features must lie in [1, n_features]")
    root_idx = np.arange(len(y)) if sample_index is None else np.asarray(sample_index)
    n_root = len(root_idx)
    if n_root == 0:
        raise ValueError("cannot grow a tree on zero rows")
    all_features = np.arange(n_features)

    feature, threshold, left, right, value, n_node, error, cands = [], [], [], [], [], [], [], []
    stack = [(root_idx, 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        yn = y[idx]
        n = len(idx)
        s = float(yn.sum())
        mean = s / n
        if task == CLASSIFICATION:
            err = (n - s) if mean >= 0.5 else s
            pure = s == 0 or s == n
        else:
            err = float(((yn - mean) ** 2).sum())
            pure = bool(np.ptp(yn) == 0)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(mean)
        n_node.append(n)
        error.append(err / n_root)
        cands.append(None)
        if pure or n < 2 * min_node_size or (max_depth is not None and depth >= max_depth):
            continue
        if max_features is not None and max_features < n_features:
            feats = np.sort(rng.choice(n_features, size=max_features, replace=False))
        else:
            feats = all_features
        if record_candidates:
            cands[node] = feats
        score, f, thr = _best_split(X, y, idx, feats, min_node_size, task)
        if f < 0:
            continue
        feature[node] = f
        threshold[node] = thr
        go_left = X[idx, f] <= thr
        # push right first so the left child gets the next preorder index
        stack.append((idx[~go_left], depth + 1, node, True))
        stack.append((idx[go_left], depth + 1, node, False))
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                        np.array(value), np.array(n_node, dtype=np.int64), np.array(error),
                        task, cands if record_candidates else None)


# ---------------------------------------------------------------- pruning

def _subtree_stats(tree: DecisionTree, collapsed: np.ndarray):
    """R(T_t) and |T_t| for every node given a set of collapsed nodes."""
    n = tree.n_nodes
    r_sub = np.zeros(n)
    leaves = np.zeros(n, dtype=np.int64)
    for t in range(n - 1, -1, -1):
        if tree.left[t] < 0 or collapsed[t]:
            r_sub[t] = tree.error[t]
            leaves[t] = 1
        else:
            l, r = tree.left[t], tree.right[t]
            r_sub[t] = r_sub[l] + r_sub[r]
            leaves[t] = leaves[l] + leaves[r]
    return r_sub, leaves


def _reachable(tree: DecisionTree, collapsed: np.ndarray) -> np.ndarray:
    alive = np.zeros(tree.n_nodes, dtype=bool)
    alive[0] = True
    for t in range(tree.n_nodes):
        if alive[t] and tree.left[t] >= 0 and not collapsed[t]:
            alive[tree.left[t]] = alive[tree.right[t]] = True
    return alive


def pruning_path(tree: DecisionTree) -> list[tuple[float, np.ndarray]]:
    """Weakest-link sequence ``[(alpha_k, nodes collapsed at alpha_k), ...]``.

    At each step every internal node whose link strength
    ``g(t) = (R(t) - R(T_t)) / (|T_t| - 1)`` equals the current minimum is
    collapsed together. ``alpha_k`` is non-decreasing.
    """
    collapsed = np.zeros(tree.n_nodes, dtype=bool)
    path = []
    last = 0.0
    while True:
        alive = _reachable(tree, collapsed)
        internal = alive & (tree.left >= 0) & ~collapsed
        if not internal.any():
            break
        r_sub, leaves = _subtree_stats(tree, collapsed)
        cand = np.flatnonzero(internal)
        g = (tree.error[cand] - r_sub[cand]) / (leaves[cand] - 1)
        g_min = max(float(g.min()), last)
        weakest = cand[g <= g_min + _EPS]
        collapsed[weakest] = True
        path.append((g_min, weakest))
        last = g_min
    return path


def collapse(tree: DecisionTree, collapsed) -> DecisionTree:
    """Return a compact copy where the given nodes become leaves."""
    collapsed = np.asarray(collapsed, dtype=bool)
    alive = _reachable(tree, collapsed)
    keep = np.flatnonzero(alive)
    remap = -np.ones(tree.n_nodes, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    leaf = (tree.left[keep] < 0) | collapsed[keep]
    left = np.where(leaf, -1, remap[np.maximum(tree.left[keep], 0)])
    right = np.where(leaf, -1, remap[np.maximum(tree.right[keep], 0)])
    feature = np.where(leaf, -1, tree.feature[keep])
    threshold = np.where(leaf, 0.0, tree.threshold[keep])
    cands = None
    if tree.candidates is not None:
        cands = [None if lf else tree.candidates[k] for k, lf in zip(keep, leaf)]
    return DecisionTree(feature, threshold, left, right, tree.value[keep].copy(),
                        tree.n_node[keep].copy(), tree.error[keep].copy(), tree.task, cands)


def prune(tree: DecisionTree, alpha: float) -> DecisionTree:
    """Smallest subtree minimizing ``R(T) + alpha * |T|`` (weakest-link pruning)."""
    if alpha < 0:
        raise ValueError("complexity alpha must be non-negative")
    collapsed = np.zeros(tree.n_nodes, dtype=bool)
    for a_k, nodes in pruning_path(tree):
        if a_k > alpha + _EPS:
            break
        collapsed[nodes] = True
    return collapse(tree, collapsed)
