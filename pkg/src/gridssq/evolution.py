"""Real-coded genetic algorithm over network weights, plus GA-then-BP training.

Each chromosome is the flat vector ``[w_ih (row-major), w_ho (row-major), a, b]``.
Fitness is the mean summed absolute error of the decoded network (lower is
better); parents are drawn by roulette over inverse fitness.

Random streams are keyed by counters so that the result never depends on the
order or thread in which fitness values are computed:

* initial individual ``i``: ``SeedSequence([seed, 0, 0, i])``
* offspring slot ``i`` of generation ``g``: ``SeedSequence([seed, 1, g, i])``
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigInvalid, EmptyPopulation, LengthMismatch
from .neural import Dataset, MlpParams, NormalizationMeta, loss, train_bp

FITNESS_EPS = 1e-9

_INIT_STREAM = 0
_BREED_STREAM = 1


@dataclass(frozen=True)
class Chromosome:
    genes: np.ndarray

    def __post_init__(self) -> None:
        genes = np.array(self.genes, dtype=float).reshape(-1)
        genes.flags.writeable = False
        object.__setattr__(self, "genes", genes)

    def __len__(self) -> int:
        return self.genes.shape[0]


class Dims(NamedTuple):
    n: int
    l: int  # noqa: E741
    m: int

    @property
    def gene_count(self) -> int:
        return gene_count(self.n, self.l, self.m)


@dataclass(frozen=True)
class GaConfig:
    population: int = 40
    generations: int = 50
    crossover_prob: float = 0.8
    mutation_prob: float = 0.05
    mutation_sigma: float = 0.1
    elitism_count: int = 1
    gene_min: float = -5.0
    gene_max: float = 5.0
    init_min: float = -1.0
    init_max: float = 1.0
    seed: int = 0
    target_fitness: float | None = None
    threads: int = 1

    def validate(self) -> "GaConfig":
        problems = []
        if self.population < 2:
            problems.append(f"population {self.population} < 2")
        if self.generations < 1:
            problems.append(f"generations {self.generations} < 1")
        if not 0.0 <= self.crossover_prob <= 1.0:
            problems.append(f"crossover_prob {self.crossover_prob} outside [0, 1]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            problems.append(f"mutation_prob {self.mutation_prob} outside [0, 1]")
        if not self.mutation_sigma > 0:
            problems.append(f"mutation_sigma {self.mutation_sigma} must be > 0")
        if not 1 <= self.elitism_count < self.population:
            problems.append(f"elitism_count {self.elitism_count} must be in [1, population)")
        if not self.gene_min < self.gene_max:
            problems.append("gene bounds not ordered")
        if not (self.gene_min <= self.init_min < self.init_max <= self.gene_max):
            problems.append("init bounds must be ordered and inside gene bounds")
        if self.seed < 0:
            problems.append(f"seed {self.seed} must be >= 0")
        if self.threads < 1:
            problems.append(f"threads {self.threads} < 1")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self


@dataclass(frozen=True)
class BpConfig:
    lr: float = 0.05
    epochs: int = 200
    seed: int = 0
    momentum: float = 0.9

    def validate(self) -> "BpConfig":
        if not self.lr > 0:
            raise ConfigInvalid(f"lr {self.lr} must be > 0")
        if self.epochs < 0:
            raise ConfigInvalid(f"epochs {self.epochs} must be >= 0")
        if self.seed < 0:
            raise ConfigInvalid(f"seed {self.seed} must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigInvalid(f"momentum {self.momentum} must be in [0, 1)")
        return self


class GenerationStats(NamedTuple):
    generation: int
    best_fitness: float
    mean_fitness: float


def gene_count(n: int, l: int, m: int) -> int:  # noqa: E741
    return l * n + m * l + l + m


def encode(params: MlpParams) -> Chromosome:
    return Chromosome(
        np.concatenate([params.w_ih.ravel(), params.w_ho.ravel(), params.a, params.b])
    )


def decode(genes, n: int, l: int, m: int) -> MlpParams:  # noqa: E741
    if isinstance(genes, Chromosome):
        genes = genes.genes
    genes = np.asarray(genes, dtype=float).reshape(-1)
    expected = gene_count(n, l, m)
    if genes.shape[0] != expected:
        raise LengthMismatch(f"chromosome has {genes.shape[0]} genes, (n={n}, l={l}, m={m}) needs {expected}")
    cut1 = l * n
    cut2 = cut1 + m * l
    cut3 = cut2 + l
    return MlpParams(
        genes[:cut1].reshape(l, n),
        genes[cut1:cut2].reshape(m, l),
        genes[cut2:cut3],
        genes[cut3:],
    )


def fitness(chrom, data: Dataset, dims: Dims) -> float:
    return loss(decode(chrom, *dims), data)


def selection_probabilities(fitness_values: Sequence[float]) -> np.ndarray:
    """Roulette probabilities proportional to ``1 / F``.

    When some individual has zero fitness every value is shifted by ``eps``
    first; the uniform shift keeps the ordering and avoids the singularity.
    """
    f = np.asarray(fitness_values, dtype=float)
    if f.size == 0:
        raise EmptyPopulation("no fitness values")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ConfigInvalid("fitness values must be finite and >= 0")
    if np.any(f == 0):
        f = f + FITNESS_EPS
    inv = 1.0 / f
    return inv / inv.sum()


def select(population: Sequence, probabilities, rng: np.random.Generator) -> tuple:
    """Two independent roulette draws, with replacement."""
    probs = np.asarray(probabilities, dtype=float)
    if len(population) != probs.shape[0]:
        raise LengthMismatch(f"{len(population)} individuals vs {probs.shape[0]} probabilities")
    cdf = np.cumsum(probs)
    picks = np.searchsorted(cdf, rng.random(2) * cdf[-1], side="right")
    picks = np.minimum(picks, len(population) - 1)
    return population[picks[0]], population[picks[1]]


def crossover(p1, p2, alpha: float) -> Chromosome:
    g1 = p1.genes if isinstance(p1, Chromosome) else np.asarray(p1, dtype=float)
    g2 = p2.genes if isinstance(p2, Chromosome) else np.asarray(p2, dtype=float)
    if g1.shape != g2.shape:
        raise LengthMismatch(f"parents have {g1.shape[0]} and {g2.shape[0]} genes")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigInvalid(f"alpha {alpha} outside [0, 1]")
    return Chromosome(alpha * g1 + (1.0 - alpha) * g2)


def mutate(chrom, cfg: GaConfig, rng: np.random.Generator) -> Chromosome:
    """Gaussian noise on each gene with probability ``mutation_prob``, then clamp.

    Draws a fixed number of variates per call whatever the outcome, so the
    stream position after mutation is independent of the gene values.
    """
    genes = chrom.genes if isinstance(chrom, Chromosome) else np.asarray(chrom, dtype=float)
    hit = rng.random(genes.shape[0]) < cfg.mutation_prob
    noise = rng.normal(0.0, cfg.mutation_sigma, genes.shape[0])
    if not hit.any():
        return Chromosome(genes)
    return Chromosome(np.clip(genes + np.where(hit, noise, 0.0), cfg.gene_min, cfg.gene_max))


def substream(seed: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *counters]))


def _evaluate(population: list[Chromosome], data: Dataset, dims: Dims, threads: int) -> np.ndarray:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda c: fitness(c, data, dims), population))
    else:
        values = [fitness(c, data, dims) for c in population]
    return np.asarray(values, dtype=float)


def _breed(population, probs, cfg: GaConfig, generation: int, slot: int) -> Chromosome:
    rng = substream(cfg.seed, _BREED_STREAM, generation, slot)
    p1, p2 = select(population, probs, rng)
    if rng.random() < cfg.crossover_prob:
        child = crossover(p1, p2, rng.random())
    else:
        child = p1
    return mutate(child, cfg, rng)


def evolve(data: Dataset, dims: Dims, cfg: GaConfig) -> tuple[Chromosome, list[GenerationStats]]:
    """Run the GA and return the best chromosome with per-generation stats.

    Generation ``g`` is evaluated, recorded, and (unless it is the last or the
    fitness target is met) bred into generation ``g + 1``. The top
    ``elitism_count`` individuals pass through unchanged, so the recorded
    best fitness never increases.
    """
    cfg.validate()
    dims = Dims(*dims)
    L = dims.gene_count
    population = [
        Chromosome(substream(cfg.seed, _INIT_STREAM, 0, i).uniform(cfg.init_min, cfg.init_max, L))
        for i in range(cfg.population)
    ]
    history: list[GenerationStats] = []
    for g in range(cfg.generations):
        fit = _evaluate(population, data, dims, cfg.threads)
        order = np.argsort(fit, kind="stable")
        best_idx = int(order[0])
        history.append(GenerationStats(g, float(fit[best_idx]), float(fit.mean())))
        done = g == cfg.generations - 1 or (
            cfg.target_fitness is not None and fit[best_idx] < cfg.target_fitness
        )
        if done:
            return population[best_idx], history
        probs = selection_probabilities(fit)
        elites = [population[int(i)] for i in order[: cfg.elitism_count]]
        children = [
            _breed(population, probs, cfg, g + 1, slot)
            for slot in range(cfg.elitism_count, cfg.population)
        ]
        population = elites + children
    raise AssertionError("unreachable")


class HybridResult(NamedTuple):
    params: MlpParams
    history: list[GenerationStats]
    ga_fitness: float
    final_fitness: float
    fine_tune_kept: bool


def fine_tune(params: MlpParams, data: Dataset, bp: BpConfig) -> tuple[MlpParams, bool]:
    """Run BP from ``params``; keep the result only if it lowers absolute error."""
    bp.validate()
    if bp.epochs == 0:
        return params, False
    tuned = train_bp(params, data, lr=bp.lr, epochs=bp.epochs, seed=bp.seed, momentum=bp.momentum)
    if loss(tuned, data) <= loss(params, data):
        return tuned, True
    return params, False


def run_hybrid(
    data: Dataset,
    dims: Dims,
    ga: GaConfig,
    bp: BpConfig,
    norm: NormalizationMeta | None = None,
) -> HybridResult:
    dims = Dims(*dims)
    best, history = evolve(data, dims, ga)
    start = decode(best, *dims)
    params, kept = fine_tune(start, data, bp)
    return HybridResult(
        params.with_norm(norm),
        history,
        history[-1].best_fitness,
        loss(params, data),
        kept,
    )


def hybrid_train(
    data: Dataset,
    dims: Dims,
    ga: GaConfig,
    bp: BpConfig,
    norm: NormalizationMeta | None = None,
) -> MlpParams:
    return run_hybrid(data, dims, ga, bp, norm).params


def plain_train(
    data: Dataset,
    dims: Dims,
    bp: BpConfig,
    init_seed: int,
    norm: NormalizationMeta | None = None,
    init_bounds: tuple[float, float] = (-1.0, 1.0),
) -> MlpParams:
    """BP from a uniform random start; the baseline the GA start is compared to."""
    bp.validate()
    dims = Dims(*dims)
    start = MlpParams.random(*dims, substream(init_seed, _INIT_STREAM, 1, 0), *init_bounds)
    return train_bp(
        start, data, lr=bp.lr, epochs=bp.epochs, seed=bp.seed, momentum=bp.momentum
    ).with_norm(norm)

