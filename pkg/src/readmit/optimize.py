"""Real-valued genetic-algorithm hyperparameter tuning and greedy ensemble selection."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from . import models
from .evaluate import confusion, metrics
from .models import CART, FOREST, GBM, GLM, SVM


class GaError(ValueError):
    pass


@dataclass(frozen=True)
class GaConfig:
    population: int = 15
    generations: int = 15
    crossover_p: float = 0.8
    mutation_p: float = 0.1
    elite_fraction: float = 0.05
    pressure: float = 1.5
    bounds: tuple[float, float] = (-10.0, 10.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("crossover_p", "mutation_p", "elite_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise GaError(f"{name} must lie in [0, 1]")
        if self.population < 2:
            raise GaError("population must be >= 2")
        if self.generations < 1:
            raise GaError("generations must be >= 1")
        if not 1 <= self.pressure <= 2:
            raise GaError("linear-rank selection pressure must lie in [1, 2]")
        if self.bounds[0] >= self.bounds[1]:
            raise GaError("gene bounds must satisfy low < high")

    @property
    def elite_count(self) -> int:
        return math.ceil(self.elite_fraction * self.population) if self.elite_fraction > 0 else 0


# ---------------------------------------------------------------- operators

def rank_probabilities(fitnesses, pressure: float = 1.5) -> np.ndarray:
    """Linear-rank selection probabilities; rank 0 is the worst, N-1 the best.

    Tied fitnesses share the average of their ranks.
    """
    f = np.asarray(fitnesses, dtype=float)
    n = len(f)
    if n == 0:
        raise GaError("empty population")
    if n == 1:
        return np.ones(1)
    r = rankdata(f, method="average") - 1.0
    return (2.0 - pressure) / n + 2.0 * r * (pressure - 1.0) / (n * (n - 1))


def rank_select(population, fitnesses, rng: np.random.Generator, pressure: float = 1.5
                ) -> tuple[int, int]:
    """Draw two parent indices independently under linear-rank selection."""
    if len(population) == 0:
        raise GaError("empty population")
    p = rank_probabilities(fitnesses, pressure)
    i, j = rng.choice(len(p), size=2, replace=True, p=p)
    return int(i), int(j)


def arithmetic_crossover(parent1, parent2, probability: float, rng: np.random.Generator):
    """Per-gene convex recombination ``c1 = l*g1 + (1-l)*g2``, ``c2 = g1 + g2 - c1``."""
    a = np.asarray(parent1, dtype=float)
    b = np.asarray(parent2, dtype=float)
    if a.shape != b.shape:
        raise GaError("parents differ in length")
    if rng.random() >= probability:
        return a.copy(), b.copy()
    lam = rng.random(a.shape)
    c1 = lam * a + (1.0 - lam) * b
    c2 = (a + b) - c1
    return c1, c2


def uniform_mutate(chromosome, probability: float, bounds=(-10.0, 10.0),
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Replace each gene with a uniform draw from ``bounds`` with the given probability."""
    if not 0 <= probability <= 1:
        raise GaError("mutation probability must lie in [0, 1]")
    c = np.array(chromosome, dtype=float)
    hit = rng.random(c.shape) < probability
    c[hit] = rng.uniform(bounds[0], bounds[1], size=int(hit.sum()))
    return c


def repair(chromosome, bounds=(-10.0, 10.0)) -> np.ndarray:
    return np.clip(np.asarray(chromosome, dtype=float), bounds[0], bounds[1])


# ---------------------------------------------------------------- decoding

@dataclass(frozen=True)
class GeneSpec:
    name: str
    low: float
    high: float
    scale: str = "affine"  # or "log"
    integer: bool = False

    def __post_init__(self):
        if self.scale not in ("affine", "log"):
            raise GaError(f"unknown gene scale {self.scale!r}")
        if self.low > self.high:
            raise GaError(f"gene {self.name}: low exceeds high")
        if self.scale == "log" and self.low <= 0:
            raise GaError(f"gene {self.name}: log scale needs a positive range")


@dataclass(frozen=True)
class GeneDecoder:
    family: str
    genes: tuple[GeneSpec, ...]
    bounds: tuple[float, float] = (-10.0, 10.0)
    fixed: dict = field(default_factory=dict)  # hyperparameters held constant

    @property
    def length(self) -> int:
        return len(self.genes)


def decode_gene(g: float, spec: GeneSpec, bounds=(-10.0, 10.0)) -> float | int:
    t = (min(max(g, bounds[0]), bounds[1]) - bounds[0]) / (bounds[1] - bounds[0])
    if spec.scale == "log":
        v = math.exp(math.log(spec.low) + t * (math.log(spec.high) - math.log(spec.low)))
    else:
        v = spec.low + t * (spec.high - spec.low)
    v = min(max(v, spec.low), spec.high)
    if spec.integer:
        return int(math.floor(v + 0.5))
    return v


def decode_values(chromosome, decoder: GeneDecoder) -> dict:
    c = np.asarray(chromosome, dtype=float)
    if len(c) != decoder.length:
        raise GaError(f"chromosome has {len(c)} genes, decoder expects {decoder.length}")
    return {s.name: decode_gene(float(g), s, decoder.bounds) for g, s in zip(c, decoder.genes)}


def decode(chromosome, decoder: GeneDecoder):
    """Map genes to a hyperparameter bundle for ``decoder.family``."""
    values = dict(decoder.fixed)
    values.update(decode_values(chromosome, decoder))
    return models.make_params(decoder.family, **values)


DEFAULT_DECODERS = {
    GBM: GeneDecoder(GBM, (GeneSpec("learning_rate", 0.01, 1.0, "log"),
                           GeneSpec("max_depth", 1, 6, integer=True))),
    GLM: GeneDecoder(GLM, (GeneSpec("l2_penalty", 1e-4, 100.0, "log"),
                           GeneSpec("threshold", 0.1, 0.9))),
    SVM: GeneDecoder(SVM, (GeneSpec("C", 0.01, 100.0, "log"),
                           GeneSpec("gamma", 1e-3, 10.0, "log"))),
    CART: GeneDecoder(CART, (GeneSpec("complexity", 1e-4, 0.1, "log"),
                             GeneSpec("min_node_size", 1, 50, integer=True))),
    FOREST: GeneDecoder(FOREST, (GeneSpec("n_trees", 10, 100, integer=True),
                                 GeneSpec("m", 1, 12, integer=True))),
}


# ---------------------------------------------------------------- GA driver

@dataclass
class GaResult:
    best_chromosome: np.ndarray
    best_fitness: float
    trace: list  # (generation, best fitness, mean fitness, best genes)
    evaluations: int
    populations: list = field(default_factory=list, repr=False)
    hyperparameters: object = None

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n_genes = len(self.best_chromosome)
        w.writerow(["generation", "best_fitness", "mean_fitness",
                    *(f"gene{k}" for k in range(n_genes))])
        for gen, best, mean, genes in self.trace:
            w.writerow([gen, repr(float(best)), repr(float(mean)), *(repr(float(g)) for g in genes)])
        return buf.getvalue()


def run_ga(fitness: Callable[[np.ndarray], float], n_genes: int, config: GaConfig = GaConfig()
           ) -> GaResult:
    """Maximize ``fitness`` over ``[low, high]^n_genes``.

    Every generation evaluates the whole population, so a run makes exactly
    ``population * generations`` fitness calls; elites are re-evaluated and
    ``fitness`` must be deterministic for the best-fitness trace to be
    non-decreasing.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.bounds
    n = config.population
    elite = config.elite_count
    pop = rng.uniform(lo, hi, size=(n, n_genes))
    trace, history = [], []
    evals = 0
    best_c, best_f = None, -np.inf
    for gen in range(config.generations):
        fit = np.array([float(fitness(ind.copy())) for ind in pop])
        evals += n
        history.append(pop.copy())
        k = int(np.argmax(fit))
        trace.append((gen, float(fit[k]), float(fit.mean()), pop[k].copy()))
        if fit[k] > best_f:
            best_f, best_c = float(fit[k]), pop[k].copy()
        if gen == config.generations - 1:
            break
        order = np.argsort(-fit, kind="stable")
        nxt = [pop[i].copy() for i in order[:elite]]
        while len(nxt) < n:
            i, j = rank_select(pop, fit, rng, config.pressure)
            c1, c2 = arithmetic_crossover(pop[i], pop[j], config.crossover_p, rng)
            for c in (c1, c2):
                if len(nxt) < n:
                    nxt.append(repair(uniform_mutate(c, config.mutation_p, config.bounds, rng),
                                      config.bounds))
        pop = np.array(nxt)
    return GaResult(best_c, best_f, trace, evals, history)


def accuracy_fitness(family: str, decoder: GeneDecoder, X_train, y_train, X_val, y_val,
                     seed: int = 0) -> Callable[[np.ndarray], float]:
    def fitness(genes):
        params = decode(genes, decoder)
        model = models.train(family, X_train, y_train, params, seed)
        pred = models.classify(models.predict(model, X_val), model.threshold)
        return float(np.mean(pred == np.asarray(y_val)))
    return fitness


def ga_tune(family: str, X_train, y_train, X_val, y_val, config: GaConfig = GaConfig(),
            decoder: GeneDecoder | None = None, seed: int = 0) -> GaResult:
    """Tune a family's hyperparameters for validation accuracy."""
    decoder = decoder or DEFAULT_DECODERS[family]
    if decoder.family != family:
        raise GaError(f"decoder targets {decoder.family}, not {family}")
    fit = accuracy_fitness(family, decoder, X_train, y_train, X_val, y_val, seed)
    result = run_ga(fit, decoder.length, config)
    result.hyperparameters = decode(result.best_chromosome, decoder)
    return result


# ---------------------------------------------------------------- greedy ensemble

def score_metric(y, scores, threshold: float, metric: str = "accuracy") -> float:
    pred = (np.asarray(scores) >= threshold).astype(int)
    value = getattr(metrics(confusion(pred, y)), metric)
    return 0.0 if value is None else float(value)


@dataclass(frozen=True)
class EnsembleModel:
    """Mean-probability ensemble; members may repeat.

    The decision threshold is the mean of the members' thresholds, so a
    one-member ensemble classifies exactly like that member.
    """

    members: tuple
    member_index: tuple[int, ...]
    metric: str
    selection_score: float
    family: str = "ensemble"

    @property
    def n_features(self) -> int:
        return self.members[0].n_features

    @property
    def threshold(self) -> float:
        return float(np.mean([m.threshold for m in self.members]))

    def predict_proba(self, X) -> np.ndarray:
        return np.mean([models.predict(m, X) for m in self.members], axis=0)


def greedy_select(pool_scores: Sequence[np.ndarray], thresholds: Sequence[float], y,
                  metric: str = "accuracy", max_rounds: int = 25) -> tuple[list[int], float]:
    """Greedy forward selection with replacement over precomputed member scores.

    Starts from the best single member and adds the member that most improves
    the averaged ensemble, stopping when nothing improves or after
    ``max_rounds`` additions. Ties go to the lowest pool index.
    """
    if len(pool_scores) == 0:
        raise GaError("greedy ensemble needs a non-empty pool")
    S = np.asarray(pool_scores, dtype=float)
    thr = np.asarray(thresholds, dtype=float)
    singles = [score_metric(y, S[k], thr[k], metric) for k in range(len(S))]
    first = int(np.argmax(singles))
    chosen = [first]
    total, tsum = S[first].copy(), thr[first]
    best = singles[first]
    for _ in range(max_rounds):
        cand_best, cand_k = best, -1
        size = len(chosen) + 1
        for k in range(len(S)):
            v = score_metric(y, (total + S[k]) / size, (tsum + thr[k]) / size, metric)
            if v > cand_best:
                cand_best, cand_k = v, k
        if cand_k < 0:
            break
        chosen.append(cand_k)
        total += S[cand_k]
        tsum += thr[cand_k]
        best = cand_best
    return chosen, best


def greedy_ensemble(pool: Sequence, X_sel, y_sel, metric: str = "accuracy",
                    max_rounds: int = 25) -> EnsembleModel:
    if len(pool) == 0:
        raise GaError("greedy ensemble needs a non-empty pool")
    scores = [models.predict(m, X_sel) for m in pool]
    idx, value = greedy_select(scores, [m.threshold for m in pool], y_sel, metric, max_rounds)
    return EnsembleModel(tuple(pool[k] for k in idx), tuple(idx), metric, value)
