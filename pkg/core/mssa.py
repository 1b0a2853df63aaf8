"""
Quench Core - Modified Social Spider Algorithm
Population metaheuristic over bounded real vectors: female and male moves,
roulette-wheel mating, a Levy-flight modification and a best-shift local search.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import gamma

from exceptions import ConfigValidationError, OptimizationError
from logging_config import get_logger, log_operation
from utils.rng import as_seed_sequence

logger = get_logger(__name__)

Objective = Callable[[np.ndarray], float]


class Sex(Enum):
    """Role of a spider within the colony."""
    FEMALE = "female"
    DOMINANT_MALE = "dominant_male"
    NONDOMINANT_MALE = "nondominant_male"


# =============================================================================
# Data Types
# =============================================================================

@dataclass(frozen=True)
class Bounds:
    """Closed box ``[lower, upper]`` per coordinate."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigValidationError("bounds must be matching 1-D arrays")
        if np.any(upper < lower):
            raise ConfigValidationError("every upper bound must be >= its lower bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def box(cls, dim: int, low: float, high: float) -> Bounds:
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, position: np.ndarray) -> np.ndarray:
        return np.clip(np.nan_to_num(position, nan=0.0), self.lower, self.upper)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lower + rng.random(self.dim) * self.width


@dataclass
class Spider:
    """A colony member."""
    position: np.ndarray
    fitness: float = math.inf
    weight: float = 0.0
    sex: Sex = Sex.FEMALE

    @property
    def is_male(self) -> bool:
        return self.sex is not Sex.FEMALE


@dataclass(frozen=True)
class SsaParams:
    """
    Colony parameters.

    The female count is ``floor((0.9 - 0.25 u) N)`` with ``u`` uniform in
    [0, 1], kept within ``[1, N - 1]``, unless ``female_count`` pins it. The
    mating radius is the sum of the coordinate widths over twice the dimension.
    """
    population_size: int = 25
    iterations: int = 100
    seed: int | np.random.SeedSequence = 0
    attraction_probability: float = 0.7
    levy_probability: float = 0.2
    levy_beta_range: tuple[float, float] = (0.0, 1.0)
    female_count: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ConfigValidationError("population_size must be >= 4", config_key="ssa.population_size")
        if self.iterations < 1:
            raise ConfigValidationError("iterations must be >= 1", config_key="ssa.iterations")
        low, high = self.levy_beta_range
        if not 0.0 <= low < high <= 1.0:
            raise ConfigValidationError("levy beta range must lie in (0, 1]", config_key="ssa.levy_beta")
        if self.female_count is not None and not 1 <= self.female_count <= self.population_size:
            raise ConfigValidationError("female_count must lie in [1, population_size]")
        if self.workers < 1:
            raise ConfigValidationError("workers must be >= 1", config_key="workers")

    @classmethod
    def from_settings(cls, settings: Any, seed: int | np.random.SeedSequence, workers: int = 1) -> SsaParams:
        """Build from ``config.SsaSettings``."""
        return cls(
            population_size=settings.population_size,
            iterations=settings.iterations,
            seed=seed,
            attraction_probability=settings.attraction_probability,
            levy_probability=settings.levy_probability,
            levy_beta_range=(settings.levy_beta_min, settings.levy_beta_max),
            workers=workers,
        )


@dataclass(frozen=True)
class TraceRow:
    """Convergence record of one iteration."""
    iteration: int
    best_fitness: float
    mean_fitness: float | None  # over finite fitnesses


@dataclass
class OptimizationResult:
    best_position: np.ndarray
    best_fitness: float
    trace: list[TraceRow] = field(default_factory=list)
    evaluations: int = 0
    iterations: int = 0

    @property
    def best_trace(self) -> list[float]:
        return [row.best_fitness for row in self.trace]


# =============================================================================
# Colony Rules
# =============================================================================

def spider_weight(f_i: float, f_b: float, f_w: float) -> float:
    """Weight of a spider for minimization: 1 at the best, 0 at the worst."""
    if f_w == f_b:
        return 1.0
    return (f_w - f_i) / (f_w - f_b)


def population_weights(fitness: Sequence[float]) -> np.ndarray:
    """
    Weights over the finite fitnesses of a population.

    Spiders with non-finite fitness weigh 0. A degenerate population where
    every finite fitness is equal weighs 1 everywhere it is finite.
    """
    values = np.asarray(fitness, dtype=float)
    finite = np.isfinite(values)
    weights = np.zeros(len(values))
    if not finite.any():
        weights[:] = 1.0
        return weights
    f_b = float(values[finite].min())
    f_w = float(values[finite].max())
    weights[finite] = [spider_weight(f, f_b, f_w) for f in values[finite]]
    return weights


def female_count(population_size: int, u: float) -> int:
    count = math.floor((0.9 - 0.25 * u) * population_size)
    return min(max(count, 1), population_size - 1)


def mating_radius(bounds: Bounds) -> float:
    return float(np.sum(bounds.width) / (2.0 * bounds.dim))


def _vibration(weight: float, distance: float) -> float:
    return weight * math.exp(-distance ** 2)


def female_move(
    spider: Spider,
    closest: Spider | None,
    best: Spider,
    rng: np.random.Generator,
    bounds: Bounds,
    *,
    attraction_probability: float = 0.7,
    alpha: tuple[float, float, Any] | None = None,
    attract: tuple[bool, bool] | None = None,
    distances: tuple[float, float] | None = None,
) -> np.ndarray:
    """
    Move a female under the vibrations of the closest heavier spider and the
    best spider. Each term attracts with ``attraction_probability`` and
    repels otherwise. ``alpha``, ``attract`` and ``distances`` override the
    random draws and the Euclidean distances.
    """
    x = spider.position
    if alpha is None:
        a1, a2, a3 = rng.random(), rng.random(), rng.random(bounds.dim)
    else:
        a1, a2, a3 = alpha
    if attract is None:
        draws = rng.random(2)
        attract = (bool(draws[0] < attraction_probability), bool(draws[1] < attraction_probability))

    step = np.zeros_like(x)
    if closest is not None:
        d_c = float(np.linalg.norm(closest.position - x)) if distances is None else distances[0]
        term = a1 * _vibration(closest.weight, d_c) * (closest.position - x)
        step += term if attract[0] else -term
    d_b = float(np.linalg.norm(best.position - x)) if distances is None else distances[1]
    term = a2 * _vibration(best.weight, d_b) * (best.position - x)
    step += term if attract[1] else -term

    return bounds.clip(x + step + (np.asarray(a3) - 0.5))


def dominant_male_move(
    spider: Spider,
    nearest_female: Spider | None,
    rng: np.random.Generator,
    bounds: Bounds,
    *,
    alpha: tuple[float, Any] | None = None,
    distance: float | None = None,
) -> np.ndarray:
    """Move a dominant male towards the nearest female."""
    x = spider.position
    if alpha is None:
        a5, a6 = rng.random(), rng.random(bounds.dim)
    else:
        a5, a6 = alpha
    step = np.zeros_like(x)
    if nearest_female is not None:
        d = float(np.linalg.norm(nearest_female.position - x)) if distance is None else distance
        step = a5 * _vibration(nearest_female.weight, d) * (nearest_female.position - x)
    return bounds.clip(x + step + (np.asarray(a6) - 0.5))


def nondominant_male_move(
    spider: Spider,
    weighted_mean: np.ndarray,
    rng: np.random.Generator,
    bounds: Bounds,
    *,
    alpha: float | None = None,
) -> np.ndarray:
    """Move a non-dominant male towards the weighted mean of the males."""
    a7 = rng.random() if alpha is None else alpha
    x = spider.position
    return bounds.clip(x + a7 * (np.asarray(weighted_mean) - x))


def weighted_male_mean(males: Sequence[Spider]) -> np.ndarray:
    positions = np.array([s.position for s in males])
    weights = np.array([s.weight for s in males])
    if weights.sum() <= 0:
        return positions.mean(axis=0)
    return (positions * weights[:, None]).sum(axis=0) / weights.sum()


def mate(
    dominant_male: Spider,
    females_in_radius: Sequence[Spider],
    rng: np.random.Generator,
) -> np.ndarray | None:
    """
    Roulette-wheel offspring: every coordinate comes from one participant
    drawn with probability proportional to its weight.
    """
    if not females_in_radius:
        return None
    participants = [dominant_male, *females_in_radius]
    positions = np.array([s.position for s in participants])
    weights = np.array([s.weight for s in participants], dtype=float)
    if weights.sum() <= 0:
        probs = np.full(len(participants), 1.0 / len(participants))
    else:
        probs = weights / weights.sum()
    dim = positions.shape[1]
    picks = rng.choice(len(participants), size=dim, p=probs)
    return positions[picks, np.arange(dim)].copy()


def levy_sample(beta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Heavy-tailed steps with tail exponent ``beta`` (Mantegna's construction)."""
    sigma_u = (
        gamma(1.0 + beta) * math.sin(math.pi * beta / 2.0)
        / (gamma((1.0 + beta) / 2.0) * beta * 2.0 ** ((beta - 1.0) / 2.0))
    ) ** (1.0 / beta)
    u = rng.normal(0.0, sigma_u, size)
    v = rng.normal(0.0, 1.0, size)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        steps = u / np.abs(v) ** (1.0 / beta)
    limit = np.finfo(float).max / 4
    return np.nan_to_num(steps, nan=0.0, posinf=limit, neginf=-limit)


def draw_beta(rng: np.random.Generator, beta_range: tuple[float, float]) -> float:
    """Uniform on ``(low, high]`` so that zero is never drawn."""
    low, high = beta_range
    return low + (high - low) * (1.0 - rng.random())


def levy_step(
    position: np.ndarray,
    best: np.ndarray,
    rng: np.random.Generator,
    bounds: Bounds,
    *,
    beta_range: tuple[float, float] = (0.0, 1.0),
    step: Any = None,
) -> np.ndarray:
    """Levy flight relative to the best position; ``step`` pins L."""
    x = np.asarray(position, dtype=float)
    diff = x - np.asarray(best, dtype=float)
    if step is None:
        step = levy_sample(draw_beta(rng, beta_range), bounds.dim, rng)
    if not np.any(diff):
        return bounds.clip(x.copy())
    with np.errstate(over="ignore", invalid="ignore"):
        moved = x + np.asarray(step) * diff
    return bounds.clip(np.nan_to_num(moved, nan=0.0, posinf=np.inf, neginf=-np.inf))


def local_search_shift(
    position: np.ndarray,
    best: np.ndarray,
    population_mean: np.ndarray,
    rng: np.random.Generator,
    bounds: Bounds,
    *,
    alpha: float | None = None,
    t: int | None = None,
) -> np.ndarray:
    """Shift towards the best position relative to T times the colony mean."""
    a8 = rng.random() if alpha is None else alpha
    shift = int(rng.integers(1, 3)) if t is None else t
    x = np.asarray(position, dtype=float)
    return bounds.clip(x + a8 * (np.asarray(best) - shift * np.asarray(population_mean)))


# =============================================================================
# Optimizer
# =============================================================================

class SocialSpiderOptimizer:
    """
    Minimize ``objective`` over ``bounds``.

    One iteration runs: weights -> female and male moves -> mating ->
    Levy modification (per spider with ``levy_probability``) -> best-shift
    modification (every spider) -> elitism. Standard moves always replace;
    both modifications are kept only when they improve the spider. Random
    draws come from per-spider streams spawned from the seed, and fitness
    batches are reduced in spider order, so the worker count never changes
    the result.
    """

    def __init__(
        self,
        objective: Objective,
        bounds: Bounds,
        params: SsaParams,
        *,
        initial_positions: Sequence[np.ndarray] | None = None,
        on_iteration: Callable[[TraceRow], None] | None = None,
    ) -> None:
        self.objective = objective
        self.bounds = bounds
        self.params = params
        self.initial_positions = list(initial_positions or [])
        self.on_iteration = on_iteration
        self.evaluations = 0
        self._executor: ThreadPoolExecutor | None = None

    # -------------------------------------------------------------------------

    def _evaluate(self, positions: Sequence[np.ndarray], iteration: int) -> list[float]:
        try:
            if self._executor is not None and len(positions) > 1:
                values = list(self._executor.map(self.objective, positions))
            else:
                values = [self.objective(p) for p in positions]
        except OptimizationError:
            raise
        except Exception as e:
            raise OptimizationError(
                f"objective failed: {type(e).__name__}: {e}", iteration=iteration, cause=e,
            ) from e
        self.evaluations += len(positions)
        return [math.inf if (v is None or math.isnan(v)) else float(v) for v in values]

    @staticmethod
    def _assign_roles(spiders: list[Spider]) -> None:
        weights = population_weights([s.fitness for s in spiders])
        for spider, w in zip(spiders, weights):
            spider.weight = float(w)
        males = [s for s in spiders if s.is_male]
        if not males:
            return
        median = float(np.median([s.weight for s in males]))
        for spider in males:
            spider.sex = Sex.DOMINANT_MALE if spider.weight > median else Sex.NONDOMINANT_MALE

    @staticmethod
    def _nearest(origin: Spider, pool: Sequence[Spider]) -> Spider | None:
        best: Spider | None = None
        best_d = math.inf
        for candidate in pool:
            if candidate is origin:
                continue
            d = float(np.linalg.norm(candidate.position - origin.position))
            if d < best_d:
                best, best_d = candidate, d
        return best

    def _standard_moves(
        self,
        spiders: list[Spider],
        elite: Spider,
        rngs: list[np.random.Generator],
    ) -> list[np.ndarray]:
        females = [s for s in spiders if s.sex is Sex.FEMALE]
        males = [s for s in spiders if s.is_male]
        male_mean = weighted_male_mean(males) if males else None

        moved = []
        for i, spider in enumerate(spiders):
            rng = rngs[i]
            if spider.sex is Sex.FEMALE:
                heavier = [s for s in spiders if s.weight > spider.weight]
                closest = self._nearest(spider, heavier)
                moved.append(female_move(
                    spider, closest, elite, rng, self.bounds,
                    attraction_probability=self.params.attraction_probability,
                ))
            elif spider.sex is Sex.DOMINANT_MALE:
                moved.append(dominant_male_move(spider, self._nearest(spider, females), rng, self.bounds))
            else:
                moved.append(nondominant_male_move(spider, male_mean, rng, self.bounds))
        return moved

    def _mating(self, spiders: list[Spider], rng: np.random.Generator, iteration: int) -> int:
        radius = mating_radius(self.bounds)
        females = [s for s in spiders if s.sex is Sex.FEMALE]
        offspring = []
        for male in (s for s in spiders if s.sex is Sex.DOMINANT_MALE):
            partners = [f for f in females if np.linalg.norm(f.position - male.position) <= radius]
            child = mate(male, partners, rng)
            if child is not None:
                offspring.append(self.bounds.clip(child))
        if not offspring:
            return 0

        replaced = 0
        for child, fit in zip(offspring, self._evaluate(offspring, iteration)):
            worst = max(range(len(spiders)), key=lambda k: (spiders[k].fitness, -k))
            if fit < spiders[worst].fitness:
                spiders[worst].position = child
                spiders[worst].fitness = fit
                replaced += 1
        return replaced

    def _greedy(self, spiders: list[Spider], indices: list[int], candidates: list[np.ndarray], iteration: int) -> None:
        if not candidates:
            return
        for i, cand, fit in zip(indices, candidates, self._evaluate(candidates, iteration)):
            if fit < spiders[i].fitness:
                spiders[i].position = cand
                spiders[i].fitness = fit

    # -------------------------------------------------------------------------

    def run(self) -> OptimizationResult:
        """Run every iteration and return the best position found."""
        p = self.params
        n = p.population_size
        streams = as_seed_sequence(p.seed).spawn(n + 1)
        colony_rng = np.random.default_rng(streams[0])
        rngs = [np.random.default_rng(s) for s in streams[1:]]

        n_female = p.female_count if p.female_count is not None else female_count(n, colony_rng.random())
        positions = [self.bounds.sample(rngs[i]) for i in range(n)]
        for i, start in enumerate(self.initial_positions[:n]):
            positions[i] = self.bounds.clip(np.asarray(start, dtype=float))

        self.evaluations = 0
        self._executor = ThreadPoolExecutor(max_workers=p.workers) if p.workers > 1 else None
        try:
            fitness = self._evaluate(positions, 0)
            spiders = [
                Spider(pos, fit, sex=Sex.FEMALE if i < n_female else Sex.NONDOMINANT_MALE)
                for i, (pos, fit) in enumerate(zip(positions, fitness))
            ]
            best_i = int(np.argmin([s.fitness for s in spiders]))
            elite = Spider(spiders[best_i].position.copy(), spiders[best_i].fitness, 1.0)
            trace: list[TraceRow] = []

            for iteration in range(1, p.iterations + 1):
                self._assign_roles(spiders)
                elite.weight = 1.0

                moved = self._standard_moves(spiders, elite, rngs)
                for spider, pos, fit in zip(spiders, moved, self._evaluate(moved, iteration)):
                    spider.position = pos
                    spider.fitness = fit

                self._assign_roles(spiders)
                self._mating(spiders, colony_rng, iteration)
                elite = self._update_elite(spiders, elite)

                levy_idx = [i for i in range(n) if rngs[i].random() < p.levy_probability]
                self._greedy(
                    spiders,
                    levy_idx,
                    [
                        levy_step(spiders[i].position, elite.position, rngs[i], self.bounds,
                                  beta_range=p.levy_beta_range)
                        for i in levy_idx
                    ],
                    iteration,
                )

                colony_mean = np.mean([s.position for s in spiders], axis=0)
                self._greedy(
                    spiders,
                    list(range(n)),
                    [
                        local_search_shift(spiders[i].position, elite.position, colony_mean, rngs[i], self.bounds)
                        for i in range(n)
                    ],
                    iteration,
                )
                elite = self._update_elite(spiders, elite)

                worst = max(range(n), key=lambda k: (spiders[k].fitness, -k))
                if min(s.fitness for s in spiders) > elite.fitness:
                    spiders[worst].position = elite.position.copy()
                    spiders[worst].fitness = elite.fitness

                finite = [s.fitness for s in spiders if math.isfinite(s.fitness)]
                row = TraceRow(iteration, elite.fitness, float(np.mean(finite)) if finite else None)
                trace.append(row)
                logger.debug(f"iteration {iteration}: best={row.best_fitness:.6g} mean={row.mean_fitness}")
                if self.on_iteration is not None:
                    self.on_iteration(row)
        finally:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None

        log_operation(logger, "MSSA optimization", True, {
            "iterations": p.iterations,
            "population": n,
            "evaluations": self.evaluations,
            "best": f"{elite.fitness:.6g}",
        })
        return OptimizationResult(
            best_position=elite.position.copy(),
            best_fitness=elite.fitness,
            trace=trace,
            evaluations=self.evaluations,
            iterations=p.iterations,
        )

    @staticmethod
    def _update_elite(spiders: list[Spider], elite: Spider) -> Spider:
        best_i = int(np.argmin([s.fitness for s in spiders]))
        if spiders[best_i].fitness < elite.fitness:
            return Spider(spiders[best_i].position.copy(), spiders[best_i].fitness, 1.0)
        return elite


def optimize(
    objective: Objective,
    bounds: Bounds,
    params: SsaParams,
    *,
    initial_positions: Sequence[np.ndarray] | None = None,
    on_iteration: Callable[[TraceRow], None] | None = None,
) -> OptimizationResult:
    """Convenience wrapper around ``SocialSpiderOptimizer.run``."""
    return SocialSpiderOptimizer(
        objective, bounds, params,
        initial_positions=initial_positions, on_iteration=on_iteration,
    ).run()
