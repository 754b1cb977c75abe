"""Independent oracles and data generators shared by the unit and acceptance tests.

Nothing here calls into the code under test except to read tree structure.
"""
import itertools
from fractions import Fraction

import numpy as np


def two_gaussians(n=2000, p=10, sep=3.0, seed=0):
    """Equal-size classes; class 1 is shifted by ``sep`` standard deviations in every coordinate."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], [n // 2, n - n // 2])
    X = rng.standard_normal((n, p)) + sep * y[:, None]
    perm = rng.permutation(n)
    return X[perm], y[perm].astype(np.int8)


def xor_data():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    return X, np.array([0, 1, 1, 0], dtype=np.int8)


def count_metrics(pred, truth):
    """Element-by-element tally, then the textbook ratios (None when undefined)."""
    tp = fp = tn = fn = 0
    for p, t in zip(pred, truth):
        if p == 1 and t == 1:
            tp += 1
        elif p == 1 and t == 0:
            fp += 1
        elif p == 0 and t == 0:
            tn += 1
        else:
            fn += 1
    # exact rationals, rounded once, so the comparison can be exact
    div = lambda a, b: None if b == 0 else Fraction(a, b)
    prec, sens = div(tp, tp + fp), div(tp, tp + fn)
    if prec is None or sens is None:
        f1 = None
    else:
        f1 = Fraction(0) if prec + sens == 0 else 2 * prec * sens / (prec + sens)
    out = {"accuracy": div(tp + tn, tp + fp + tn + fn), "sensitivity": sens, "recall": sens,
           "specificity": div(tn, tn + fp), "precision": prec, "f1": f1}
    out = {k: None if v is None else float(v) for k, v in out.items()}
    return {"tp": tp, "fp": fp, "tn": tn, "fn": fn, **out}


def all_prunings(tree, node=0):
    """Every pruned subtree rooted at ``node`` as (R, leaves, frozenset of collapsed nodes)."""
    leaf = (float(tree.error[node]), 1, frozenset([node]))
    if tree.left[node] < 0:
        return [(float(tree.error[node]), 1, frozenset())]
    out = [leaf]
    for (rl, nl, cl), (rr, nr, cr) in itertools.product(all_prunings(tree, tree.left[node]),
                                                         all_prunings(tree, tree.right[node])):
        out.append((rl + rr, nl + nr, cl | cr))
    return out


def best_pruning(tree, alpha, tol=1e-12):
    """Minimum of R(T) + alpha |T| by enumeration; ties go to the fewest leaves."""
    options = all_prunings(tree)
    costs = [r + alpha * n for r, n, _ in options]
    low = min(costs)
    tied = [o for o, c in zip(options, costs) if c <= low + tol]
    return low, min(n for _, n, _ in tied)


def exhaustive_ensemble(scores, thresholds, y, max_size=3):
    """Best accuracy over all multisets of pool members up to ``max_size``."""
    scores = np.asarray(scores, dtype=float)
    best = -1.0
    for size in range(1, max_size + 1):
        for combo in itertools.combinations_with_replacement(range(len(scores)), size):
            s = scores[list(combo)].mean(axis=0)
            t = float(np.mean([thresholds[k] for k in combo]))
            best = max(best, float(np.mean((s >= t).astype(int) == y)))
    return best


def sphere(genes):
    """Maximized at the origin with value 0."""
    return -float(np.sum(np.asarray(genes) ** 2))
