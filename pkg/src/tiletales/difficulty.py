"""Difficulty evaluation: exact solution-set counting and board entropy.

Two counters with one contract. The brute-force counter walks every
five-tile subset through the set-validity check and is the oracle. The
fast counter gets identical numbers by folding rules into tile bitmasks,
branching on matched property values, capping counted classes, and
seating adjacency-flag classes with a memoized search; it exists because
exact counting sits on the hot path of rule evolution.
"""

from __future__ import annotations

import itertools
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

from .rules import (
    BOARD_SLOTS,
    Arrangement,
    CountLimit,
    ExcludeWhere,
    ExclusiveWhere,
    MatchProperty,
    NotAdjacent,
    RuleNode,
    Verdict,
    _adjacency_signatures,
    _merged_verdicts,
    _order_free_rejects,
    _seating_exists,
    canonical_rule_json,
    rule_children,
    validate_rule,
)
from .tiles import TileSet

_FAST_CACHE_SIZE = 4096
_fast_cache: OrderedDict[tuple[str, str], int] = OrderedDict()
_fast_cache_lock = threading.Lock()


@dataclass(frozen=True)
class DifficultyReport:
    """Exact solution count for one rule over one tile set."""

    solution_count: int
    total_sets: int

    def __post_init__(self) -> None:
        if not 0 <= self.solution_count <= self.total_sets:
            raise ValueError("solution_count must lie in 0..total_sets")

    def accuracy_vs(self, target: int) -> float:
        """How close the count landed to `target`, on a 0..1 scale.

        1 means a perfect hit; the miss is normalized by the size of the
        whole solution space so the metric is comparable across targets.
        """
        if not 0 <= target <= self.total_sets:
            raise ValueError(f"target must lie in 0..{self.total_sets}")
        return 1.0 - abs(self.solution_count - target) / self.total_sets


@dataclass(frozen=True)
class EntropyProfile:
    """Per-slot admissible-tile counts and their log-product.

    `entropy` is None exactly when some slot admits nothing (`dead`);
    a dead board cannot be completed without backtracking.
    """

    per_slot_counts: tuple[int, int, int, int, int]
    entropy: float | None
    dead: bool


def _require_enough_tiles(tileset: TileSet) -> None:
    if len(tileset) < BOARD_SLOTS:
        raise ValueError(f"counting needs at least {BOARD_SLOTS} tiles, got {len(tileset)}")


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def count_solutions_bruteforce(rule: RuleNode, tileset: TileSet) -> DifficultyReport:
    """Count valid five-tile sets by checking every subset.

    Same split as is_valid_set: order-free leaves are checked once per
    subset, adjacency leaves through the exists-a-seating permutation
    search (memoized on the flag multiset, which takes few values).
    """
    _require_enough_tiles(tileset)
    validate_rule(rule, tileset.schema)
    order_free = [c for c in rule_children(rule) if not isinstance(c, NotAdjacent)]
    adjacency = [c for c in rule_children(rule) if isinstance(c, NotAdjacent)]
    per_tile_sig = (
        _adjacency_signatures(adjacency, tileset.tiles) if adjacency else None
    )
    seating_cache: dict[tuple, bool] = {}
    count = 0
    for combo in itertools.combinations(tileset.tiles, BOARD_SLOTS):
        if any(_order_free_rejects(leaf, combo) for leaf in order_free):
            continue
        if per_tile_sig is not None:
            key = tuple(sorted(per_tile_sig[t.id] for t in combo))
            feasible = seating_cache.get(key)
            if feasible is None:
                feasible = _seating_exists(key)
                seating_cache[key] = feasible
            if not feasible:
                continue
        count += 1
    return DifficultyReport(count, math.comb(len(tileset), BOARD_SLOTS))


# ---------------------------------------------------------------------------
# fast exact counter
# ---------------------------------------------------------------------------


def count_solutions_fast(rule: RuleNode, tileset: TileSet) -> DifficultyReport:
    """Exact solution count, organized for speed instead of clarity.

    Exclude/exclusive leaves shrink a candidate bitmask. Match leaves
    split the count into one branch per shared property value (branches
    are disjoint: a valid set is uniform in every matched property).
    Within a branch, tiles collapse into classes by (adjacency flags,
    cap memberships); a pruned enumeration over class multiplicities
    sums binomial products for every class mix whose caps hold and whose
    flags admit a seating order.
    """
    _require_enough_tiles(tileset)
    validate_rule(rule, tileset.schema)
    total = math.comb(len(tileset), BOARD_SLOTS)
    cache_key = (tileset.fingerprint, canonical_rule_json(rule))
    with _fast_cache_lock:
        if cache_key in _fast_cache:
            _fast_cache.move_to_end(cache_key)
            return DifficultyReport(_fast_cache[cache_key], total)

    pool = (1 << len(tileset)) - 1
    caps: list[tuple[int, int]] = []
    match_props: set[str] = set()
    adjacency: list[tuple[int, int]] = []
    for leaf in rule_children(rule):
        if isinstance(leaf, ExcludeWhere):
            pool &= ~tileset.property_mask(leaf.property, leaf.value)
        elif isinstance(leaf, ExclusiveWhere):
            pool &= tileset.property_mask(leaf.property, leaf.value)
        elif isinstance(leaf, MatchProperty):
            match_props.add(leaf.property)
        elif isinstance(leaf, CountLimit):
            caps.append((tileset.property_mask(leaf.property, leaf.value), leaf.number))
        elif isinstance(leaf, NotAdjacent):
            adjacency.append(
                (
                    tileset.property_mask(leaf.property, leaf.value),
                    tileset.property_mask(leaf.property2, leaf.value2),
                )
            )

    caps_key = tuple(sorted(caps))
    adj_key = tuple(sorted(adjacency))
    if match_props:
        ordered = [p for p in tileset.schema if p in match_props]
        count = 0
        for values in itertools.product(*(tileset.schema[p] for p in ordered)):
            branch_pool = pool
            for prop, value in zip(ordered, values):
                branch_pool &= tileset.property_mask(prop, value)
            count += _count_pool(branch_pool, caps_key, adj_key)
    else:
        count = _count_pool(pool, caps_key, adj_key)

    with _fast_cache_lock:
        _fast_cache[cache_key] = count
        if len(_fast_cache) > _FAST_CACHE_SIZE:
            _fast_cache.popitem(last=False)
    return DifficultyReport(count, total)


@lru_cache(maxsize=1 << 17)
def _count_pool(pool: int, caps: tuple[tuple[int, int], ...], adjacency: tuple[tuple[int, int], ...]) -> int:
    """Valid five-subsets drawn entirely from `pool`.

    Depends only on the bit patterns, never on the tile set behind them,
    so the memo is safe to share across tile sets and rules.
    """
    live_caps = []
    for mask, limit in caps:
        mask &= pool
        if mask.bit_count() > limit:  # otherwise the cap cannot bind
            live_caps.append((mask, limit))
    live_adj = []
    for a, b in adjacency:
        if a & pool and b & pool:  # otherwise no offending pair can form
            live_adj.append((a, b))
    if not live_caps and not live_adj:
        return math.comb(pool.bit_count(), BOARD_SLOTS)

    # Collapse interchangeable tiles into classes.
    classes: dict[tuple, int] = {}
    tid_pool = pool
    while tid_pool:
        tid_bit = tid_pool & -tid_pool
        tid_pool ^= tid_bit
        adj_sig = tuple((bool(a & tid_bit), bool(b & tid_bit)) for a, b in live_adj)
        cap_sig = tuple(bool(mask & tid_bit) for mask, _ in live_caps)
        classes[adj_sig, cap_sig] = classes.get((adj_sig, cap_sig), 0) + 1

    entries = sorted(classes.items())  # deterministic enumeration order
    suffix_capacity = [0] * (len(entries) + 1)
    for i in range(len(entries) - 1, -1, -1):
        suffix_capacity[i] = suffix_capacity[i + 1] + entries[i][1]
    limits = tuple(limit for _, limit in live_caps)

    count = 0

    def descend(idx: int, needed: int, cap_used: tuple[int, ...], chosen: tuple[tuple, ...], ways: int) -> None:
        nonlocal count
        if needed == 0:
            if not live_adj or _class_seating_feasible(chosen):
                count += ways
            return
        if idx == len(entries) or suffix_capacity[idx] < needed:
            return
        (adj_sig, cap_sig), size = entries[idx]
        for take in range(0, min(size, needed) + 1):
            if take:
                used = tuple(
                    u + (take if member else 0) for u, member in zip(cap_used, cap_sig)
                )
                if any(u > lim for u, lim in zip(used, limits)):
                    break  # taking more from this class only gets worse
                next_chosen = chosen + ((adj_sig, take),)
            else:
                used = cap_used
                next_chosen = chosen
            descend(idx + 1, needed - take, used, next_chosen, ways * math.comb(size, take))

    descend(0, BOARD_SLOTS, (0,) * len(limits), (), 1)
    return count


def _class_seating_feasible(chosen: tuple[tuple, ...]) -> bool:
    # Cap membership split classes that share adjacency flags; merge them
    # back so the seating question is asked of the smallest multiset.
    merged: dict[tuple, int] = {}
    for sig, n in chosen:
        merged[sig] = merged.get(sig, 0) + n
    return _multiset_seatable(tuple(sorted(merged.items())))


@lru_cache(maxsize=1 << 16)
def _multiset_seatable(items: tuple[tuple[tuple, int], ...]) -> bool:
    sigs = tuple(sig for sig, _ in items)
    counts = tuple(n for _, n in items)
    for i, si in enumerate(sigs):
        for j in range(i, len(sigs)):
            if i == j and counts[i] < 2:
                continue
            if not _compatible(si, sigs[j]):
                break
        else:
            continue
        break
    else:
        return True  # every cohabiting pair is compatible: any order seats
    return _seatable(sigs, counts, -1)


@lru_cache(maxsize=1 << 16)
def _seatable(sigs: tuple, remaining: tuple[int, ...], last: int) -> bool:
    """Seat one tile of some class next to `last`'s class, then recurse.

    Independent of the permutation search in the rule module on purpose:
    the two counters should not share their adjacency verdicts.
    """
    if not any(remaining):
        return True
    for i, left in enumerate(remaining):
        if not left:
            continue
        if last >= 0 and not _compatible(sigs[last], sigs[i]):
            continue
        nxt = remaining[:i] + (left - 1,) + remaining[i + 1 :]
        if _seatable(sigs, nxt, i):
            return True
    return False


def _compatible(x: tuple, y: tuple) -> bool:
    for (xa, xb), (ya, yb) in zip(x, y):
        if (xa and yb) or (xb and ya):
            return False
    return True


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------


def entropy_profile(rule: RuleNode, arrangement: Arrangement) -> EntropyProfile:
    """How many tiles still fit each slot, and the entropy over those counts.

    Empty slot: tiles not yet on the board that would draw no reject
    anywhere if placed there. Occupied slot: 1 while its tile stands
    unrejected, else 0. A zero anywhere marks the board dead.
    """
    tileset = arrangement.tileset
    validate_rule(rule, tileset.schema)
    occupied = arrangement.occupied
    current = _merged_verdicts(rule, occupied) if occupied else {}
    placed = {tid for tid in arrangement.slots if tid is not None}
    counts = [0] * BOARD_SLOTS
    for i, tid in enumerate(arrangement.slots):
        if tid is not None:
            counts[i] = 1 if current[i] is not Verdict.REJECT else 0
            continue
        admitted = 0
        for tile in tileset.tiles:
            if tile.id in placed:
                continue
            trial = sorted(occupied + [(i, tile)])
            verdicts = _merged_verdicts(rule, trial)
            if all(v is not Verdict.REJECT for v in verdicts.values()):
                admitted += 1
        counts[i] = admitted
    dead = any(c == 0 for c in counts)
    entropy = None if dead else sum(math.log2(c) for c in counts)
    return EntropyProfile(tuple(counts), entropy, dead)
