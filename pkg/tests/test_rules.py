"""Tests for rule semantics, generation, mutation, rendering, serialization.

The reference oracle here is deliberately naive: evaluate every
permutation through the public evaluate() and look for a reject-free one.
is_valid_set must agree with it everywhere.
"""

import itertools
from collections import Counter
from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiletales.rules import (
    Arrangement,
    Composite,
    CountLimit,
    ExcludeWhere,
    ExclusiveWhere,
    MatchProperty,
    NotAdjacent,
    RuleBindingError,
    RuleError,
    Verdict,
    canonical_rule_json,
    dumps_rule,
    evaluate,
    is_valid_set,
    loads_rule,
    mutate,
    random_rule,
    render_rule,
    rule_from_dict,
    rule_to_dict,
    validate_rule,
)
from tiletales.tiles import canonical_generic_set

TS = canonical_generic_set()
GROUP1 = [t.id for t in TS.tiles if t.properties["group"] == "1"]
GROUP2 = [t.id for t in TS.tiles if t.properties["group"] == "2"]
GROUP3 = [t.id for t in TS.tiles if t.properties["group"] == "3"]


def arr(*slots):
    padded = tuple(slots) + (None,) * (5 - len(slots))
    return Arrangement(padded, TS)


def oracle_is_valid(rule, ids, tileset=TS):
    """Exists-a-permutation validity, straight from the definition."""
    return any(
        all(v is not Verdict.REJECT for _, v in evaluate(rule, Arrangement(tuple(perm), tileset)))
        for perm in itertools.permutations(ids)
    )


def seeded_rule(seed, max_children=5):
    rng = Random(seed)
    return Composite(
        tuple(random_rule(TS.schema, TS.tiles, rng) for _ in range(1 + rng.randrange(max_children)))
    )


# ---------------------------------------------------------------------------
# leaf semantics
# ---------------------------------------------------------------------------


class TestLeafSemantics:
    def test_exclude_where(self):
        # tile 0 is red, tile 1 is blue
        got = evaluate(ExcludeWhere("color", "red"), arr(0, 1))
        assert got == [(0, Verdict.REJECT), (1, Verdict.IGNORE)]

    def test_exclusive_where(self):
        got = evaluate(ExclusiveWhere("color", "red"), arr(0, 1))
        assert got == [(0, Verdict.ACCEPT), (1, Verdict.REJECT)]

    def test_match_property_reference_is_lowest_occupied(self):
        # slot 0 empty: the slot-1 tile sets the reference value
        a = Arrangement((None, GROUP2[0], GROUP1[0], GROUP2[1], None), TS)
        got = dict(evaluate(MatchProperty("group"), a))
        assert got == {1: Verdict.ACCEPT, 2: Verdict.REJECT, 3: Verdict.ACCEPT}

    def test_not_adjacent_rejects_higher_index_of_each_pair(self):
        rule = NotAdjacent("group", "1", "group", "2")
        got = dict(evaluate(rule, arr(GROUP1[0], GROUP2[0], GROUP1[1])))
        assert got == {0: Verdict.IGNORE, 1: Verdict.REJECT, 2: Verdict.REJECT}

    def test_not_adjacent_is_order_symmetric(self):
        rule = NotAdjacent("group", "1", "group", "2")
        got = dict(evaluate(rule, arr(GROUP2[0], GROUP1[0])))
        assert got[1] == Verdict.REJECT

    def test_not_adjacent_ignores_gap(self):
        rule = NotAdjacent("group", "1", "group", "2")
        a = Arrangement((GROUP1[0], None, GROUP2[0], None, None), TS)
        assert all(v is Verdict.IGNORE for _, v in evaluate(rule, a))

    def test_count_limit_first_n_pass(self):
        reds = [t.id for t in TS.tiles if t.properties["color"] == "red"]
        blue = next(t.id for t in TS.tiles if t.properties["color"] == "blue")
        rule = CountLimit(2, "color", "red")
        got = dict(evaluate(rule, arr(reds[0], blue, reds[1], reds[2], reds[3])))
        assert got == {
            0: Verdict.IGNORE,
            1: Verdict.IGNORE,
            2: Verdict.IGNORE,
            3: Verdict.REJECT,
            4: Verdict.REJECT,
        }

    def test_empty_composite_ignores_occupied(self):
        assert evaluate(Composite(), arr(3, 9)) == [(0, Verdict.IGNORE), (1, Verdict.IGNORE)]

    def test_empty_board_yields_no_verdicts(self):
        assert evaluate(ExcludeWhere("color", "red"), Arrangement((None,) * 5, TS)) == []

    def test_accept_and_reject_merge_to_reject(self):
        comp = Composite((ExclusiveWhere("group", "1"), ExcludeWhere("group", "1")))
        assert all(v is Verdict.REJECT for _, v in evaluate(comp, arr(GROUP1[0], GROUP2[0])))


# ---------------------------------------------------------------------------
# algebraic properties
# ---------------------------------------------------------------------------


class TestProperties:
    @given(st.integers(0, 10**9), st.integers(0, 10**9))
    @settings(max_examples=150, deadline=None)
    def test_merge_is_max_of_children(self, rule_seed, board_seed):
        rule = seeded_rule(rule_seed)
        rng = Random(board_seed)
        ids = rng.sample(range(30), 5)
        slots = tuple(tid if rng.random() < 0.8 else None for tid in ids)
        a = Arrangement(slots, TS)
        merged = dict(evaluate(rule, a))
        per_child = [dict(evaluate(child, a)) for child in rule.children]
        for slot in merged:
            child_verdicts = [cv[slot] for cv in per_child]
            expected = max(child_verdicts) if child_verdicts else Verdict.IGNORE
            assert merged[slot] == expected

    @given(st.integers(0, 10**9), st.integers(0, 10**9))
    @settings(max_examples=100, deadline=None)
    def test_order_free_rules_are_permutation_invariant(self, rule_seed, set_seed):
        rule = seeded_rule(rule_seed)
        if any(isinstance(c, NotAdjacent) for c in rule.children):
            rule = Composite(tuple(c for c in rule.children if not isinstance(c, NotAdjacent)))
        ids = Random(set_seed).sample(range(30), 5)
        outcomes = {
            any(v is Verdict.REJECT for _, v in evaluate(rule, Arrangement(tuple(p), TS)))
            for p in itertools.permutations(ids)
        }
        assert len(outcomes) == 1
        assert is_valid_set(rule, ids, TS) == (not outcomes.pop())

    @given(st.integers(0, 10**9), st.integers(0, 10**9), st.integers(0, 10**9))
    @settings(max_examples=150, deadline=None)
    def test_adding_a_child_never_validates(self, rule_seed, child_seed, set_seed):
        rule = seeded_rule(rule_seed, max_children=4)
        extra = random_rule(TS.schema, TS.tiles, Random(child_seed))
        ids = Random(set_seed).sample(range(30), 5)
        before = is_valid_set(rule, ids, TS)
        after = is_valid_set(Composite(rule.children + (extra,)), ids, TS)
        if not before:
            assert not after

    @given(st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_generated_rules_always_validate(self, seed):
        rng = Random(seed)
        rule = seeded_rule(seed)
        validate_rule(rule, TS.schema)
        for _ in range(5):
            rule = mutate(rule, TS.schema, TS.tiles, rng)
            validate_rule(rule, TS.schema)


class TestValiditySemantics:
    def test_empty_composite_accepts_anything(self):
        assert is_valid_set(Composite(), [0, 1, 2, 3, 4], TS)

    def test_match_property_needs_uniform_value(self):
        assert is_valid_set(MatchProperty("group"), GROUP1[:5], TS)
        assert not is_valid_set(MatchProperty("group"), GROUP1[:4] + GROUP2[:1], TS)

    def test_not_adjacent_separator_makes_the_difference(self):
        rule = NotAdjacent("group", "1", "group", "2")
        assert not is_valid_set(rule, GROUP1[:2] + GROUP2[:3], TS)
        assert is_valid_set(rule, GROUP1[:2] + GROUP2[:2] + GROUP3[:1], TS)

    def test_wrong_set_size_rejected(self):
        with pytest.raises(ValueError, match="exactly 5"):
            is_valid_set(Composite(), [0, 1, 2, 3], TS)
        with pytest.raises(ValueError, match="exactly 5"):
            is_valid_set(Composite(), [0, 1, 2, 3, 3, 4], TS)

    def test_agrees_with_permutation_oracle(self):
        # Seeded sweep across all concepts, heavy on adjacency mixtures.
        for seed in range(25):
            rule = seeded_rule(seed)
            rng = Random(1000 + seed)
            for _ in range(12):
                ids = rng.sample(range(30), 5)
                assert is_valid_set(rule, ids, TS) == oracle_is_valid(rule, ids), (
                    canonical_rule_json(rule),
                    sorted(ids),
                )


# ---------------------------------------------------------------------------
# generation and mutation
# ---------------------------------------------------------------------------


class TestRandomRule:
    def test_seeded_draw_is_frozen(self):
        got = random_rule(TS.schema, TS.tiles, Random(12345))
        assert got == NotAdjacent("group", "3", "color", "blue")
        assert random_rule(TS.schema, TS.tiles, Random(7)) == MatchProperty("color")

    def test_concept_frequencies_near_uniform(self):
        rng = Random(99)
        counts = Counter(type(random_rule(TS.schema, TS.tiles, rng)).__name__ for _ in range(10000))
        assert set(counts) == {
            "ExcludeWhere",
            "ExclusiveWhere",
            "MatchProperty",
            "NotAdjacent",
            "CountLimit",
        }
        for concept, n in counts.items():
            assert 1880 <= n <= 2120, (concept, n)  # 2000 ± 3 sigma

    def test_parameters_come_from_sample_support(self):
        reds = [t for t in TS.tiles if t.properties["color"] == "red"]
        rng = Random(3)
        for _ in range(200):
            rule = random_rule(TS.schema, reds, rng)
            for prop, value in _pairs_of(rule):
                assert value in {t.properties[prop] for t in reds}

    def test_count_limit_range(self):
        rng = Random(5)
        numbers = {
            r.number
            for r in (random_rule(TS.schema, TS.tiles, rng) for _ in range(2000))
            if isinstance(r, CountLimit)
        }
        assert numbers == {1, 2, 3, 4}

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            random_rule(TS.schema, [], Random(0))


def _pairs_of(rule):
    if isinstance(rule, (ExcludeWhere, ExclusiveWhere, CountLimit)):
        return [(rule.property, rule.value)]
    if isinstance(rule, NotAdjacent):
        return [(rule.property, rule.value), (rule.property2, rule.value2)]
    return []


class TestMutate:
    @given(st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_leaf_mutation_keeps_concept_and_changes_it(self, seed):
        rng = Random(seed)
        rule = random_rule(TS.schema, TS.tiles, rng)
        mutant = mutate(rule, TS.schema, TS.tiles, rng)
        assert type(mutant) is type(rule)
        assert mutant != rule  # full tile set offers enough variety

    def test_input_rule_is_untouched(self):
        rule = seeded_rule(42)
        snapshot = canonical_rule_json(rule)
        for i in range(50):
            mutate(rule, TS.schema, TS.tiles, Random(i))
        assert canonical_rule_json(rule) == snapshot

    @given(st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_composite_respects_size_bounds(self, seed):
        rng = Random(seed)
        rule = seeded_rule(seed)
        for _ in range(8):
            rule = mutate(rule, TS.schema, TS.tiles, rng)
            assert isinstance(rule, Composite)
            assert 1 <= len(rule.children) <= 5

    def test_full_composite_never_grows(self):
        rule = Composite(tuple(random_rule(TS.schema, TS.tiles, Random(i)) for i in range(5)))
        for seed in range(100):
            assert len(mutate(rule, TS.schema, TS.tiles, Random(seed)).children) <= 5

    def test_single_child_never_dropped_to_zero(self):
        rule = Composite((ExcludeWhere("color", "red"),))
        for seed in range(100):
            assert len(mutate(rule, TS.schema, TS.tiles, Random(seed)).children) >= 1

    def test_empty_composite_gains_a_child(self):
        mutant = mutate(Composite(), TS.schema, TS.tiles, Random(8))
        assert len(mutant.children) == 1


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


class TestRender:
    @pytest.mark.parametrize(
        "rule,expected",
        [
            (ExcludeWhere("color", "red"), "Exclude any where color is equal to red"),
            (ExclusiveWhere("group", "1"), "Exclusively for any where group is equal to 1"),
            (MatchProperty("type"), "Only the ones where the value of type match"),
            (
                NotAdjacent("group", "3", "type", "E"),
                "Those with group set to 3 cannot be adjacent to those with type set to E",
            ),
            (CountLimit(3, "type", "A"), "There can only be 3 with type set to A"),
        ],
    )
    def test_leaf_templates(self, rule, expected):
        assert render_rule(rule) == expected

    def test_composite_joins_with_and(self):
        comp = Composite((CountLimit(3, "type", "A"), CountLimit(3, "color", "red")))
        assert (
            render_rule(comp)
            == "There can only be 3 with type set to A and There can only be 3 with color set to red"
        )

    def test_empty_composite_renders_empty(self):
        assert render_rule(Composite()) == ""


# ---------------------------------------------------------------------------
# serialization and validation
# ---------------------------------------------------------------------------


class TestSerialization:
    @given(st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, seed):
        rule = seeded_rule(seed)
        assert loads_rule(dumps_rule(rule)) == rule
        assert rule_from_dict(rule_to_dict(rule)) == rule

    def test_canonical_json_is_stable(self):
        rule = seeded_rule(11)
        assert canonical_rule_json(rule) == canonical_rule_json(loads_rule(dumps_rule(rule)))

    def test_unknown_concept(self):
        with pytest.raises(RuleError, match="unknown rule concept 'Sometimes'"):
            rule_from_dict({"concept": "Sometimes", "params": {}, "children": []})

    def test_missing_parameter(self):
        with pytest.raises(RuleError, match="missing parameter 'value'"):
            rule_from_dict({"concept": "ExcludeWhere", "params": {"property": "color"}, "children": []})

    def test_leaf_with_children_rejected(self):
        doc = {
            "concept": "ExcludeWhere",
            "params": {"property": "color", "value": "red"},
            "children": [{"concept": "Composite", "params": {}, "children": []}],
        }
        with pytest.raises(RuleError, match="cannot have children"):
            rule_from_dict(doc)


class TestValidation:
    def test_unbound_property(self):
        with pytest.raises(RuleBindingError, match="'flavor' not in tile-set schema"):
            validate_rule(ExcludeWhere("flavor", "sour"), TS.schema)

    def test_unbound_value(self):
        with pytest.raises(RuleBindingError, match="value 'mauve' not allowed"):
            validate_rule(ExcludeWhere("color", "mauve"), TS.schema)

    def test_evaluate_surfaces_binding_errors(self):
        with pytest.raises(RuleBindingError):
            evaluate(ExcludeWhere("color", "mauve"), arr(0))

    @pytest.mark.parametrize("number", [0, 5, -1])
    def test_count_limit_number_bounds(self, number):
        with pytest.raises(RuleError, match="outside 1..4"):
            validate_rule(CountLimit(number, "color", "red"), TS.schema)

    def test_nested_composite_rejected(self):
        with pytest.raises(RuleError, match="may not nest"):
            validate_rule(Composite((Composite(),)), TS.schema)

    def test_oversized_composite_rejected(self):
        children = tuple(ExcludeWhere("color", "red") for _ in range(6))
        with pytest.raises(RuleError, match="at most 5"):
            validate_rule(Composite(children), TS.schema)


class TestArrangement:
    def test_duplicate_tile_rejected(self):
        with pytest.raises(ValueError, match="two slots"):
            Arrangement((1, None, 1, None, None), TS)

    def test_foreign_tile_rejected(self):
        with pytest.raises(KeyError):
            Arrangement((99, None, None, None, None), TS)
