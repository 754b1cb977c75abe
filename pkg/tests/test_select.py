import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binomtest

from readmit.models import ForestParams
from readmit.select import (BorutaConfig, Decision, SelectionError, boruta, binomial_decision,
                            consensus, make_shadows, stepwise_select)

FAST = BorutaConfig(max_iterations=30, forest=ForestParams(n_trees=20, min_node_size=1), alpha=0.01)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 200).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))),
       st.sampled_from([0.05, 0.01, 1e-3, 1e-4]))
def test_binomial_decision_matches_scipy(hits_runs, threshold):
    hits, runs = hits_runs
    p = binomtest(hits, runs, 0.5, alternative="two-sided").pvalue
    got = binomial_decision(hits, runs, threshold)
    # symmetric null: scipy's two-sided p equals twice the smaller tail, capped at 1
    if abs(p - threshold) < 1e-12:
        return
    if p < threshold:
        assert got == (Decision.CONFIRMED if hits > runs / 2 else Decision.REJECTED)
    else:
        assert got == Decision.TENTATIVE


def test_shadows_are_column_permutations():
    X = np.arange(30, dtype=float).reshape(10, 3)
    S = make_shadows(X, np.random.default_rng(0))
    for j in range(3):
        assert sorted(S[:, j]) == sorted(X[:, j])
    assert not np.array_equal(S, X)


def signal_plus_noise(seed, n=200, noise=6):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    signal = np.where(rng.random(n) < 0.9, y, 1 - y) + 0.1 * rng.standard_normal(n)
    return np.column_stack([signal, rng.standard_normal((n, noise))]), y


def test_boruta_confirms_signal_and_rejects_noise():
    X, y = signal_plus_noise(0)
    rep = boruta(X, y, config=FAST, seed=1)
    assert rep.decisions[0] == Decision.CONFIRMED
    assert rep.decisions.count(Decision.REJECTED) >= 4
    assert rep.z_score[0] == max(rep.z_score)
    assert rep.runs[0] <= rep.iterations and len(rep.shadow_max_history) == rep.iterations
    again = boruta(X, y, config=FAST, seed=1)
    assert again.decisions == rep.decisions and np.array_equal(again.hits, rep.hits)
    header = rep.to_csv().splitlines()[0]
    assert header == "feature,mean_importance,sd_importance,z_score,hits,runs,decision"


def test_boruta_input_validation():
    with pytest.raises(SelectionError):
        boruta(np.zeros((10, 1)), np.arange(10) % 2)
    with pytest.raises(SelectionError):
        boruta(np.zeros((10, 3)), np.zeros(10))


def test_stepwise_picks_signal_only():
    X, y = signal_plus_noise(2, n=300, noise=8)
    tr = stepwise_select(X, y, [f"x{j}" for j in range(9)])
    assert tr.selected[0] == "x0" and tr.steps[0][1] == "add"
    assert tr.to_csv().splitlines()[0] == "step,action,feature,p_value"


def test_stepwise_thresholds_and_state_uniqueness():
    with pytest.raises(SelectionError):
        stepwise_select(np.zeros((10, 2)), np.arange(10) % 2, alpha_enter=0.1, alpha_remove=0.1)
    rng = np.random.default_rng(7)
    X = rng.standard_normal((150, 6))
    X[:, 1] = X[:, 0] + 0.05 * rng.standard_normal(150)  # collinear pair invites add/remove cycling
    y = (X[:, 0] + X[:, 2] + rng.standard_normal(150) > 0).astype(int)
    tr = stepwise_select(X, y, alpha_enter=0.3, alpha_remove=0.35)
    states, cur = [frozenset()], set()
    for _, action, name, _p in tr.steps:
        (cur.add if action == "add" else cur.discard)(name)
        states.append(frozenset(cur))
    assert len(states) == len(set(states))
    assert len(tr.steps) <= 4 * 6 + 10


def test_stepwise_ignores_constant_columns():
    X, y = signal_plus_noise(4, noise=1)
    X = np.column_stack([np.ones(len(y)), X])
    assert "x0" not in stepwise_select(X, y).selected


def test_consensus_is_ordered_intersection():
    X, y = signal_plus_noise(0)
    names = [f"f{j}" for j in range(X.shape[1])]
    rep = boruta(X, y, names, FAST, seed=1)
    tr = stepwise_select(X, y, names)
    both = consensus(rep, tr)
    assert set(both) == set(rep.confirmed) & set(tr.selected)
    z = {n: rep.z_score[names.index(n)] for n in both}
    assert both == sorted(both, key=lambda n: -z[n])
