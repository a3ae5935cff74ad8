"""Tiles, tile sets, and the two canonical 30-tile universes.

A tile set binds a fixed property schema (property name -> allowed values)
to an ordered list of tiles. Everything downstream (rules, counting, the
board, narration) consumes tile sets through this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

MIN_TILES = 6
MAX_TILES = 64

_GENERIC_COLORS = ("red", "blue", "green", "yellow", "white")
_GENERIC_TYPE_BLOCKS = ((5, "A"), (10, "B"), (14, "C"), (18, "D"), (22, "E"), (26, "F"), (30, "G"))


class TileSetError(ValueError):
    """A tile-set document violates the schema or a tile-set invariant."""


@dataclass(frozen=True)
class Tile:
    """One game piece: a dense integer id, a display name, and named properties.

    Instances are treated as immutable values; ``properties`` must not be
    mutated after construction.
    """

    id: int
    name: str
    properties: dict[str, str]


@dataclass(frozen=True)
class TileSet:
    """An ordered collection of tiles sharing one property schema.

    Invariants (checked at construction):
      - between MIN_TILES and MAX_TILES tiles, ids dense 0..N-1 in order,
      - every tile carries exactly the schema's property names,
      - every property value is drawn from the schema's declared value list.
    """

    name: str
    schema: dict[str, tuple[str, ...]]
    tiles: tuple[Tile, ...]
    _masks: dict[tuple[str, str], int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.tiles)
        if not MIN_TILES <= n <= MAX_TILES:
            raise TileSetError(f"tile set '{self.name}' has {n} tiles; expected {MIN_TILES}..{MAX_TILES}")
        if not self.schema:
            raise TileSetError(f"tile set '{self.name}' declares no properties")
        prop_names = set(self.schema)
        seen_ids: set[int] = set()
        for position, tile in enumerate(self.tiles):
            if tile.id in seen_ids:
                raise TileSetError(f"duplicate tile id {tile.id} in tile set '{self.name}'")
            seen_ids.add(tile.id)
            if tile.id != position:
                raise TileSetError(
                    f"tile id {tile.id} at position {position}: ids must be dense 0..{n - 1} in order"
                )
            if set(tile.properties) != prop_names:
                missing = sorted(prop_names - set(tile.properties))
                extra = sorted(set(tile.properties) - prop_names)
                detail = []
                if missing:
                    detail.append(f"missing {', '.join(repr(p) for p in missing)}")
                if extra:
                    detail.append(f"unknown {', '.join(repr(p) for p in extra)}")
                raise TileSetError(f"tile {tile.id} ({tile.name}): {'; '.join(detail)}")
            for prop, value in tile.properties.items():
                if value not in self.schema[prop]:
                    raise TileSetError(
                        f"tile {tile.id} ({tile.name}): value {value!r} not allowed for property {prop!r}"
                    )

    def __len__(self) -> int:
        return len(self.tiles)

    def tile(self, tile_id: int) -> Tile:
        if not 0 <= tile_id < len(self.tiles):
            raise KeyError(f"no tile with id {tile_id} in tile set '{self.name}'")
        return self.tiles[tile_id]

    def property_mask(self, prop: str, value: str) -> int:
        """Bitmask (bit i set <=> tile i matches) for one property/value pair."""
        key = (prop, value)
        mask = self._masks.get(key)
        if mask is None:
            mask = 0
            for t in self.tiles:
                if t.properties.get(prop) == value:
                    mask |= 1 << t.id
            self._masks[key] = mask
        return mask

    @property
    def fingerprint(self) -> str:
        """Stable content hash, usable as a cache key across equal tile sets."""
        cached = self._masks.get(("", "__fingerprint__"))
        if cached is None:
            import hashlib

            digest = hashlib.sha256(save_tileset(self).encode("utf-8")).hexdigest()
            cached = int(digest[:16], 16)
            self._masks[("", "__fingerprint__")] = cached
        return f"{self.name}:{cached:016x}"


def subset_tileset(tileset: TileSet, tile_ids: list[int], name: str | None = None) -> TileSet:
    """A smaller tile set from the given tiles, re-indexed to dense ids."""
    picked = [tileset.tile(i) for i in tile_ids]
    tiles = tuple(
        Tile(id=new_id, name=t.name, properties=dict(t.properties)) for new_id, t in enumerate(picked)
    )
    return TileSet(name=name or f"{tileset.name}-subset", schema=dict(tileset.schema), tiles=tiles)


def _generic_type(tile_id: int) -> str:
    for upper, letter in _GENERIC_TYPE_BLOCKS:
        if tile_id < upper:
            return letter
    raise ValueError(f"tile id {tile_id} out of range")


@lru_cache(maxsize=1)
def canonical_generic_set() -> TileSet:
    """The deterministic 30-tile generic set with the 3/5/7 value schema.

    Assignment: group cycles 1..3, color cycles through five colors, and
    type splits ids into seven blocks (5,5,4,4,4,4,4 tiles).
    """
    schema = {
        "group": ("1", "2", "3"),
        "color": _GENERIC_COLORS,
        "type": tuple(letter for _, letter in _GENERIC_TYPE_BLOCKS),
    }
    tiles = tuple(
        Tile(
            id=i,
            name=f"tile-{i:02d}",
            properties={
                "group": str(i % 3 + 1),
                "color": _GENERIC_COLORS[i % 5],
                "type": _generic_type(i),
            },
        )
        for i in range(30)
    )
    return TileSet(name="generic", schema=schema, tiles=tiles)


@lru_cache(maxsize=1)
def animal_dinner_set() -> TileSet:
    """The 30-animal themed set, loaded from the shipped data file.

    Same schema and value distribution as the generic set, so generated
    rules transfer between the two unchanged.
    """
    return load_tileset(packaged_tileset_text("animals"))


def packaged_tileset_text(name: str) -> str:
    """Raw text of a tile-set document shipped inside the package."""
    path = resources.files("tiletales").joinpath(f"data/tilesets/{name}.json")
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise TileSetError(f"no packaged tile set named {name!r}") from None


def load_tileset(document: str) -> TileSet:
    """Parse a tile-set JSON document, validating all tile-set invariants.

    Raises TileSetError naming the offending tile or property on any
    schema violation.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TileSetError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise TileSetError("tile-set document must be a JSON object")
    for key in ("name", "schema", "tiles"):
        if key not in doc:
            raise TileSetError(f"tile-set document missing {key!r}")
    schema_doc = doc["schema"]
    if not isinstance(schema_doc, dict) or not all(
        isinstance(vals, list) and all(isinstance(v, str) for v in vals) for vals in schema_doc.values()
    ):
        raise TileSetError("schema must map property names to lists of string values")
    schema = {prop: tuple(vals) for prop, vals in schema_doc.items()}
    raw_tiles = doc["tiles"]
    if not isinstance(raw_tiles, list):
        raise TileSetError("'tiles' must be a list")
    entries = []
    for raw in raw_tiles:
        if not isinstance(raw, dict) or not isinstance(raw.get("id"), int):
            raise TileSetError(f"tile entry {raw!r} lacks an integer id")
        props = raw.get("properties")
        if not isinstance(props, dict):
            raise TileSetError(f"tile {raw['id']}: 'properties' must be an object")
        entries.append(Tile(id=raw["id"], name=str(raw.get("name", "")), properties=dict(props)))
    ids = [t.id for t in entries]
    if len(set(ids)) != len(ids):
        dupe = next(i for i in ids if ids.count(i) > 1)
        raise TileSetError(f"duplicate tile id {dupe}")
    # Accept any listing order; normalize to id order.
    entries.sort(key=lambda t: t.id)
    return TileSet(name=str(doc["name"]), schema=schema, tiles=tuple(entries))


def save_tileset(tileset: TileSet) -> str:
    """Serialize to the normalized document form (stable bytes)."""
    doc = {
        "name": tileset.name,
        "schema": {prop: list(vals) for prop, vals in tileset.schema.items()},
        "tiles": [
            {"id": t.id, "name": t.name, "properties": dict(t.properties)} for t in tileset.tiles
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
