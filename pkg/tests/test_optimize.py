import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readmit import models
from readmit.optimize import (DEFAULT_DECODERS, GaConfig, GaError, GeneDecoder, GeneSpec,
                              arithmetic_crossover, decode, decode_gene, ga_tune, greedy_ensemble,
                              greedy_select, rank_probabilities, rank_select, repair, run_ga,
                              uniform_mutate)
from support import exhaustive_ensemble, sphere, two_gaussians


# ---------------------------------------------------------------- selection

def test_rank_probabilities_worked_examples():
    np.testing.assert_allclose(rank_probabilities([3.0, 7.0], pressure=2.0), [0.0, 1.0])
    np.testing.assert_allclose(rank_probabilities([1.0, 2.0, 3.0], pressure=1.0), [1 / 3] * 3)
    # s = 1.5, N = 3: 1/6 + r/6 for r = 0, 1, 2
    np.testing.assert_allclose(rank_probabilities([5.0, 1.0, 3.0]), [3 / 6, 1 / 6, 2 / 6])
    # tied fitnesses share the average rank
    np.testing.assert_allclose(rank_probabilities([2.0, 2.0, 1.0]), [2.5 / 6, 2.5 / 6, 1 / 6])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(1.0, 2.0))
def test_rank_probabilities_are_a_distribution_ordered_by_fitness(fit, s):
    p = rank_probabilities(fit, s)
    assert p.sum() == pytest.approx(1.0) and np.all(p >= -1e-15)
    f = np.array(fit)
    for i in range(len(f)):
        for j in range(len(f)):
            if f[i] > f[j]:
                assert p[i] >= p[j]
            if f[i] == f[j]:
                assert p[i] == pytest.approx(p[j])


def test_rank_select_never_picks_worst_at_max_pressure():
    rng = np.random.default_rng(0)
    picks = [rank_select(range(2), [0.0, 1.0], rng, 2.0) for _ in range(50)]
    assert all(p == (1, 1) for p in picks)


# ---------------------------------------------------------------- variation

@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
def test_crossover_preserves_gene_sums_and_stays_between_parents(genes, seed):
    a = np.array(genes)
    b = np.random.default_rng(seed).uniform(-10, 10, len(a))
    c1, c2 = arithmetic_crossover(a, b, 1.0, np.random.default_rng(seed))
    np.testing.assert_allclose(c1 + c2, a + b, atol=1e-12)
    lo, hi = np.minimum(a, b) - 1e-12, np.maximum(a, b) + 1e-12
    assert np.all((c1 >= lo) & (c1 <= hi) & (c2 >= lo) & (c2 <= hi))
    d1, d2 = arithmetic_crossover(a, b, 0.0, np.random.default_rng(seed))
    assert np.array_equal(d1, a) and np.array_equal(d2, b)


def test_mutation_and_repair():
    rng = np.random.default_rng(1)
    c = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(uniform_mutate(c, 0.0, rng=rng), c)
    m = uniform_mutate(c, 1.0, (-1.0, 0.0), rng)
    assert np.all((m >= -1) & (m <= 0))
    assert repair([-12.0, 3.0, 10.5]).tolist() == [-10.0, 3.0, 10.0]
    with pytest.raises(GaError):
        uniform_mutate(c, 1.5, rng=rng)


def test_config_validation_and_elites():
    assert GaConfig().elite_count == 1
    assert GaConfig(population=40).elite_count == 2
    for bad in ({"population": 1}, {"pressure": 2.5}, {"mutation_p": -0.1}, {"bounds": (1, 1)}):
        with pytest.raises(GaError):
            GaConfig(**bad)


# ---------------------------------------------------------------- driver

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_ga_contract(seed, n_genes):
    calls = []

    def f(g):
        calls.append(g.copy())
        return sphere(g)

    res = run_ga(f, n_genes, GaConfig(seed=seed))
    assert res.evaluations == len(calls) == 225
    bests = [b for _, b, _, _ in res.trace]
    assert len(bests) == 15 and all(x <= y for x, y in zip(bests, bests[1:]))
    for pop in res.populations:
        assert pop.shape == (15, n_genes) and np.all((pop >= -10) & (pop <= 10))
    assert res.best_fitness == bests[-1] == sphere(res.best_chromosome)


def test_ga_is_seeded():
    a = run_ga(sphere, 3, GaConfig(seed=4))
    b = run_ga(sphere, 3, GaConfig(seed=4))
    assert np.array_equal(a.best_chromosome, b.best_chromosome) and a.trace_csv() == b.trace_csv()
    assert a.trace_csv().splitlines()[0] == "generation,best_fitness,mean_fitness,gene0,gene1,gene2"


# ---------------------------------------------------------------- decoding

def test_decoding_endpoints_midpoints_and_rounding():
    lr = GeneSpec("learning_rate", 0.01, 1.0, "log")
    assert decode_gene(-10, lr) == pytest.approx(0.01)
    assert decode_gene(10, lr) == pytest.approx(1.0)
    assert decode_gene(0, lr) == pytest.approx(0.1, rel=1e-12)
    assert decode_gene(99, lr) == pytest.approx(1.0)
    depth = GeneSpec("max_depth", 1, 6, integer=True)
    assert decode_gene(0, depth) == 4  # 3.5 rounds half up
    assert decode_gene(-10, depth) == 1 and decode_gene(10, depth) == 6
    p = decode([0.0, 0.0], DEFAULT_DECODERS["gbm"])
    assert isinstance(p, models.GbmParams) and p.max_depth == 4
    assert p.learning_rate == pytest.approx(0.1) and p.n_stages == 100


def test_fixed_values_carry_into_decoded_params():
    dec = GeneDecoder("gbm", (GeneSpec("learning_rate", 0.01, 1.0, "log"),), fixed={"n_stages": 7})
    assert decode([0.0], dec).n_stages == 7
    with pytest.raises(GaError):
        decode([0.0, 1.0], dec)


def test_ga_tune_returns_valid_hyperparameters():
    X, y = two_gaussians(200, 3, sep=2.0, seed=0)
    res = ga_tune("glm", X[:140], y[:140], X[140:], y[140:], GaConfig(population=4, generations=3))
    assert res.evaluations == 12
    assert 1e-4 <= res.hyperparameters.l2_penalty <= 100 and 0.1 <= res.hyperparameters.threshold <= 0.9
    with pytest.raises(GaError):
        ga_tune("glm", X, y, X, y, decoder=DEFAULT_DECODERS["svm"])


# ---------------------------------------------------------------- greedy ensemble

A = np.array([.9, .9, .9, .9, .1, .1, .6, .6])
B = np.array([.4, .4, .9, .9, .1, .1, .1, .1])
TRUTH = np.array([1, 1, 1, 1, 0, 0, 0, 0])


def test_complementary_pair_beats_each_member():
    idx, score = greedy_select([A, B], [0.5, 0.5], TRUTH)
    assert idx == [0, 1] and score == 1.0
    assert exhaustive_ensemble([A, B], [0.5, 0.5], TRUTH) == 1.0


def test_greedy_stops_without_strict_improvement_and_ties_go_low():
    idx, score = greedy_select([B, A, A], [0.5] * 3, TRUTH, max_rounds=0)
    assert idx == [0] and score == 0.75
    same, _ = greedy_select([A, A], [0.5, 0.5], TRUTH)
    assert same == [0]
    with pytest.raises(GaError):
        greedy_select([], [], TRUTH)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_greedy_never_worse_than_any_member(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 30)
    pool = rng.random((5, 30))
    thr = rng.uniform(0.3, 0.7, 5)
    _, score = greedy_select(pool, thr, y)
    singles = [np.mean((pool[k] >= thr[k]).astype(int) == y) for k in range(5)]
    assert score >= max(singles)


def test_ensemble_model_combines_probabilities():
    X, y = two_gaussians(200, 2, sep=1.5, seed=3)
    pool = [models.train("glm", X, y), models.train("cart", X, y)]
    ens = greedy_ensemble(pool, X, y)
    manual = np.mean([models.predict(pool[k], X) for k in ens.member_index], axis=0)
    np.testing.assert_array_equal(models.predict(ens, X), manual)
    assert ens.threshold == pytest.approx(np.mean([pool[k].threshold for k in ens.member_index]))
