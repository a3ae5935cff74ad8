"""Tests for the rule-evolution search and its experiment harness.

Long-horizon convergence statistics live in the acceptance suite; these
tests pin determinism, the selection mechanics, and the report format.
"""

import json
import math
from random import Random

import pytest

from tiletales.difficulty import count_solutions_fast
from tiletales.evolution import (
    EvolutionConfig,
    EvolutionResult,
    convergence_experiment,
    evolve,
)
from tiletales.rules import Composite, canonical_rule_json, validate_rule
from tiletales.tiles import canonical_generic_set

TS = canonical_generic_set()
TOTAL = math.comb(30, 5)

FAST = dict(population_size=20, elite_count=2, max_generations=6)


class TestConfig:
    def test_defaults_match_experiment_setup(self):
        config = EvolutionConfig(target=1000, seed=1)
        assert config.population_size == 100
        assert config.mutation_rate == 0.5
        assert config.max_generations == 50
        assert config.elite_count == 10
        assert config.tournament_size == 2

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(elite_count=0),
            dict(elite_count=100),
            dict(mutation_rate=1.5),
            dict(mutation_rate=-0.1),
            dict(max_generations=-1),
            dict(tournament_size=0),
            dict(evaluator="guess"),
            dict(target=-5),
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        base = dict(target=1000, seed=1)
        base.update(kwargs)
        with pytest.raises(ValueError):
            EvolutionConfig(**base)

    def test_count_target_must_be_integer(self):
        with pytest.raises(ValueError, match="integer target"):
            EvolutionConfig(target=10.5, seed=1)

    def test_count_target_bounded_by_solution_space(self):
        with pytest.raises(ValueError, match="exceeds"):
            evolve(EvolutionConfig(target=TOTAL + 1, seed=1, **FAST), TS)


class TestEvolve:
    def test_deterministic_for_a_seed(self):
        config = EvolutionConfig(target=50000, seed=424242, **FAST)
        a = evolve(config, TS)
        b = evolve(config, TS)
        assert canonical_rule_json(a.best_rule) == canonical_rule_json(b.best_rule)
        assert a.fitness_history == b.fitness_history
        assert a.achieved == b.achieved

    def test_parallel_fitness_changes_nothing(self):
        config = EvolutionConfig(target=50000, seed=424242, **FAST)
        serial = evolve(config, TS)
        parallel = evolve(config, TS, workers=2)
        assert canonical_rule_json(serial.best_rule) == canonical_rule_json(parallel.best_rule)
        assert serial.fitness_history == parallel.fitness_history

    def test_max_target_succeeds_immediately(self):
        # any rule that rejects nothing counts every set
        result = evolve(EvolutionConfig(target=TOTAL, seed=3, max_generations=10), TS)
        assert result.achieved == TOTAL
        assert result.accuracy == 1.0
        assert result.generations_used < 10

    def test_achieved_matches_recount(self):
        result = evolve(EvolutionConfig(target=30000, seed=9, **FAST), TS)
        assert count_solutions_fast(result.best_rule, TS).solution_count == result.achieved

    def test_accuracy_identity(self):
        result = evolve(EvolutionConfig(target=30000, seed=9, **FAST), TS)
        assert result.accuracy == pytest.approx(1 - abs(result.achieved - 30000) / TOTAL)

    def test_best_fitness_never_increases(self):
        result = evolve(EvolutionConfig(target=12345, seed=77, **FAST), TS)
        history = result.fitness_history
        assert all(later <= earlier for earlier, later in zip(history, history[1:]))

    def test_history_and_generations_line_up(self):
        result = evolve(EvolutionConfig(target=12345, seed=77, **FAST), TS)
        assert len(result.fitness_history) == result.generations_used + 1
        assert result.generations_used <= 6

    def test_early_exit_stops_breeding(self):
        result = evolve(EvolutionConfig(target=TOTAL, seed=5, max_generations=50), TS)
        assert result.fitness_history[-1] == 0
        assert result.generations_used < 50

    def test_best_rule_is_a_valid_composite(self):
        result = evolve(EvolutionConfig(target=60000, seed=13, **FAST), TS)
        assert isinstance(result.best_rule, Composite)
        validate_rule(result.best_rule, TS.schema)

    def test_sample_tiles_restrict_parameters(self):
        reds = [t for t in TS.tiles if t.properties["color"] == "red"]
        result = evolve(EvolutionConfig(target=40000, seed=21, **FAST), TS, sample_tiles=reds)
        red_values = {prop: {t.properties[prop] for t in reds} for prop in TS.schema}

        def check(node):
            for prop, value in _leaf_pairs(node):
                assert value in red_values[prop]

        for child in result.best_rule.children:
            check(child)

    def test_zero_generations_returns_generation_zero_best(self):
        result = evolve(EvolutionConfig(target=1000, seed=2, max_generations=0), TS)
        assert result.generations_used == 0
        assert len(result.fitness_history) == 1


def _leaf_pairs(node):
    pairs = []
    if hasattr(node, "value"):
        pairs.append((node.property, node.value))
    if hasattr(node, "value2"):
        pairs.append((node.property2, node.value2))
    return pairs


class TestEntropyEvaluator:
    def test_entropy_search_runs_and_reports(self):
        target = 5 * math.log2(10)  # an exclusive-style rule's profile
        config = EvolutionConfig(target=target, seed=31, evaluator="entropy", **FAST)
        result = evolve(config, TS)
        assert result.achieved_entropy is None or result.achieved_entropy >= 0
        assert 0.0 <= result.accuracy <= 1.0

    def test_entropy_accuracy_uses_entropy_distance(self):
        config = EvolutionConfig(
            target=5 * math.log2(30), seed=8, evaluator="entropy", **FAST
        )
        result = evolve(config, TS)
        if result.achieved_entropy is not None:
            expected = max(
                0.0, 1 - abs(result.achieved_entropy - config.target) / (5 * math.log2(30))
            )
            assert result.accuracy == pytest.approx(expected)

    def test_entropy_run_deterministic(self):
        config = EvolutionConfig(target=20.0, seed=17, evaluator="entropy", **FAST)
        a = evolve(config, TS)
        b = evolve(config, TS)
        assert canonical_rule_json(a.best_rule) == canonical_rule_json(b.best_rule)


class TestExperiment:
    def test_report_is_reproducible(self):
        kwargs = dict(population_size=16, max_generations=4)
        a = convergence_experiment(3, 999, **kwargs)
        b = convergence_experiment(3, 999, **kwargs)
        assert a.to_jsonl() == b.to_jsonl()

    def test_record_shape(self):
        report = convergence_experiment(2, 4, population_size=16, max_generations=3)
        assert len(report.records) == 2
        for record in report.records:
            assert set(record) == {"seed", "target", "achieved", "accuracy", "generations"}
            assert 0 <= record["target"] <= TOTAL
        assert report.summary["runs"] == 2
        for key in ("mean_accuracy", "stddev_accuracy", "mean_generations", "stddev_generations"):
            assert key in report.summary

    def test_jsonl_layout(self):
        report = convergence_experiment(2, 4, population_size=16, max_generations=3)
        lines = report.to_jsonl().strip().split("\n")
        assert len(lines) == 3
        assert json.loads(lines[0])["seed"] == report.records[0]["seed"]
        assert "summary" in json.loads(lines[-1])

    def test_fixed_target_pins_every_run(self):
        report = convergence_experiment(
            3, 11, target=2500, population_size=16, max_generations=3
        )
        assert all(r["target"] == 2500 for r in report.records)

    def test_single_run_statistics(self):
        report = convergence_experiment(1, 6, population_size=16, max_generations=3)
        assert report.summary["stddev_accuracy"] == 0.0
        assert report.summary["mean_accuracy"] == report.records[0]["accuracy"]

    def test_zero_runs_rejected(self):
        with pytest.raises(ValueError, match="at least 1"):
            convergence_experiment(0, 1)

    def test_different_seeds_draw_different_targets(self):
        a = convergence_experiment(2, 1, population_size=16, max_generations=2)
        b = convergence_experiment(2, 2, population_size=16, max_generations=2)
        assert [r["target"] for r in a.records] != [r["target"] for r in b.records]
