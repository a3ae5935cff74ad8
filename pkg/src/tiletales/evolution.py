"""Seeded genetic search for rules hitting a target difficulty.

Mutation-only GA: elitism plus tournament selection, genomes are always
top-level composites so add/remove-child mutations stay available. One
RNG drives everything in a documented draw order, which makes runs
bit-reproducible; fitness evaluation is pure, so it may fan out across
processes without touching that order.

Draw order per run: generation 0 takes, per genome, one child-count draw
then that many rule draws; each later generation takes, per offspring,
`tournament_size` index draws (lowest drawn index into the
fitness-sorted population wins), one mutation coin, then the mutation's
own draws when the coin hits.
"""

from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from random import Random
from typing import Sequence

from .difficulty import count_solutions_fast, entropy_profile
from .rules import (
    Arrangement,
    Composite,
    RuleNode,
    canonical_rule_json,
    loads_rule,
    mutate,
    random_rule,
)
from .tiles import Tile, TileSet, canonical_generic_set, load_tileset, save_tileset

EVALUATORS = ("count", "entropy")

_GEN0_MAX_CHILDREN = 3


@dataclass(frozen=True)
class EvolutionConfig:
    """Search parameters; defaults mirror the reference experiment setup."""

    target: float
    seed: int
    population_size: int = 100
    mutation_rate: float = 0.5
    max_generations: int = 50
    elite_count: int = 10
    tournament_size: int = 2
    evaluator: str = "count"

    def __post_init__(self) -> None:
        if not 0 < self.elite_count < self.population_size:
            raise ValueError("elite_count must satisfy 0 < elite_count < population_size")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.max_generations < 0:
            raise ValueError("max_generations must be non-negative")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")
        if self.evaluator not in EVALUATORS:
            raise ValueError(f"evaluator must be one of {EVALUATORS}")
        if self.target < 0:
            raise ValueError("target must be non-negative")
        if self.evaluator == "count" and self.target != int(self.target):
            raise ValueError("the count evaluator needs an integer target")


@dataclass(frozen=True)
class EvolutionResult:
    best_rule: RuleNode
    achieved: int
    accuracy: float
    generations_used: int
    fitness_history: tuple[float, ...]
    achieved_entropy: float | None = None


def _empty_arrangement(tileset: TileSet) -> Arrangement:
    return Arrangement((None,) * 5, tileset)


def _measure_count(rule: RuleNode, tileset: TileSet) -> float:
    return count_solutions_fast(rule, tileset).solution_count


def _measure_entropy(rule: RuleNode, tileset: TileSet) -> float | None:
    return entropy_profile(rule, _empty_arrangement(tileset)).entropy


def _fitness_from_measure(measure: float | None, config: EvolutionConfig, tileset: TileSet) -> float:
    if measure is None:  # dead board: strictly worse than any live miss
        return 5 * math.log2(len(tileset)) + config.target + 1.0
    return abs(measure - config.target)


# Worker-process state for parallel fitness evaluation. The executor maps
# genomes in population order, so results are order-stable.
_worker_tileset: TileSet | None = None
_worker_evaluator = "count"


def _worker_init(tileset_text: str, evaluator: str) -> None:
    global _worker_tileset, _worker_evaluator
    _worker_tileset = load_tileset(tileset_text)
    _worker_evaluator = evaluator


def _worker_measure(rule_json: str) -> float | None:
    rule = loads_rule(rule_json)
    if _worker_evaluator == "entropy":
        return _measure_entropy(rule, _worker_tileset)
    return _measure_count(rule, _worker_tileset)


class _FitnessEvaluator:
    """Maps genomes to fitness, optionally across worker processes."""

    def __init__(self, config: EvolutionConfig, tileset: TileSet, workers: int):
        self.config = config
        self.tileset = tileset
        self.pool = (
            ProcessPoolExecutor(
                max_workers=workers,
                initializer=_worker_init,
                initargs=(save_tileset(tileset), config.evaluator),
            )
            if workers > 1
            else None
        )
        self.measure = _measure_entropy if config.evaluator == "entropy" else _measure_count

    def __call__(self, population: Sequence[RuleNode]) -> list[float]:
        if self.pool is not None:
            measures = list(self.pool.map(_worker_measure, map(canonical_rule_json, population)))
        else:
            measures = [self.measure(genome, self.tileset) for genome in population]
        return [_fitness_from_measure(m, self.config, self.tileset) for m in measures]

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()


def evolve(
    config: EvolutionConfig,
    tileset: TileSet | None = None,
    sample_tiles: Sequence[Tile] | None = None,
    *,
    workers: int = 1,
) -> EvolutionResult:
    """Search up to max_generations for a rule whose measure hits the target.

    `sample_tiles` is where rule parameters are drawn from; it defaults
    to the whole tile set, and a caller adapting mid-game can pass just
    the tiles from the latest solved board instead.
    """
    tileset = tileset or canonical_generic_set()
    total = math.comb(len(tileset), 5)
    if config.evaluator == "count" and config.target > total:
        raise ValueError(f"count target {config.target} exceeds the {total} possible sets")
    sample = list(sample_tiles) if sample_tiles else list(tileset.tiles)
    rng = Random(config.seed)

    population: list[RuleNode] = [
        Composite(
            tuple(
                random_rule(tileset.schema, sample, rng)
                for _ in range(1 + rng.randrange(_GEN0_MAX_CHILDREN))
            )
        )
        for _ in range(config.population_size)
    ]

    evaluator = _FitnessEvaluator(config, tileset, workers)
    try:
        fitness = evaluator(population)
        order = sorted(range(config.population_size), key=lambda i: (fitness[i], i))
        best_rule, best_fitness = population[order[0]], fitness[order[0]]
        history = [best_fitness]
        generations_used = 0

        for generation in range(1, config.max_generations + 1):
            if best_fitness == 0.0:
                break
            ranked = [population[i] for i in order]
            next_population = ranked[: config.elite_count]
            for _ in range(config.population_size - config.elite_count):
                drawn = min(
                    rng.randrange(config.population_size)
                    for _ in range(config.tournament_size)
                )
                child = ranked[drawn]
                if rng.random() < config.mutation_rate:
                    child = mutate(child, tileset.schema, sample, rng)
                next_population.append(child)
            population = next_population
            fitness = evaluator(population)
            order = sorted(range(config.population_size), key=lambda i: (fitness[i], i))
            generations_used = generation
            if fitness[order[0]] < best_fitness:
                best_rule, best_fitness = population[order[0]], fitness[order[0]]
            history.append(best_fitness)
    finally:
        evaluator.close()

    achieved = count_solutions_fast(best_rule, tileset).solution_count
    if config.evaluator == "entropy":
        achieved_entropy = _measure_entropy(best_rule, tileset)
        max_entropy = 5 * math.log2(len(tileset))
        accuracy = (
            0.0
            if achieved_entropy is None
            else max(0.0, 1.0 - abs(achieved_entropy - config.target) / max_entropy)
        )
    else:
        achieved_entropy = None
        accuracy = 1.0 - abs(achieved - config.target) / total
    return EvolutionResult(
        best_rule=best_rule,
        achieved=achieved,
        accuracy=accuracy,
        generations_used=generations_used,
        fitness_history=tuple(history),
        achieved_entropy=achieved_entropy,
    )


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentReport:
    """Per-run records plus aggregate statistics, JSON-lines friendly."""

    records: tuple[dict, ...]
    summary: dict

    def to_jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"


def convergence_experiment(
    runs: int,
    seed: int,
    *,
    tileset: TileSet | None = None,
    target: float | None = None,
    evaluator: str = "count",
    population_size: int = 100,
    mutation_rate: float = 0.5,
    max_generations: int = 50,
    elite_count: int = 10,
    workers: int = 1,
) -> ExperimentReport:
    """Run the GA `runs` times and aggregate accuracy and generation stats.

    Without a fixed `target`, each run draws its own uniformly over the
    whole solution-count range, mirroring the reference experiment. Per-run
    seeds derive from `seed`, so the full report reproduces bit-for-bit.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    tileset = tileset or canonical_generic_set()
    total = math.comb(len(tileset), 5)
    master = Random(seed)
    records = []
    accuracies = []
    generations = []
    for _ in range(runs):
        run_target = master.randrange(total + 1) if target is None else target
        run_seed = master.getrandbits(63)
        config = EvolutionConfig(
            target=run_target,
            seed=run_seed,
            population_size=population_size,
            mutation_rate=mutation_rate,
            max_generations=max_generations,
            elite_count=elite_count,
            evaluator=evaluator,
        )
        result = evolve(config, tileset, workers=workers)
        record = {
            "seed": run_seed,
            "target": run_target,
            "achieved": result.achieved,
            "accuracy": result.accuracy,
            "generations": result.generations_used,
        }
        if evaluator == "entropy":
            record["achieved_entropy"] = result.achieved_entropy
        records.append(record)
        accuracies.append(result.accuracy)
        generations.append(result.generations_used)
    summary = {
        "runs": runs,
        "mean_accuracy": statistics.fmean(accuracies),
        "stddev_accuracy": statistics.stdev(accuracies) if runs > 1 else 0.0,
        "mean_generations": statistics.fmean(generations),
        "stddev_generations": statistics.stdev(generations) if runs > 1 else 0.0,
    }
    return ExperimentReport(tuple(records), summary)
