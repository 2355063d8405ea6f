"""Grid maps, cell values, object shape templates, and the ASCII map format.

Maps are numpy uint8 arrays of CellValue codes, shape (height, width),
indexed [y, x]. The agent's own map starts as CANDIDATE everywhere except
for BLOCKED cells, which are part of the known floor plan.
"""

from __future__ import annotations

from enum import IntEnum
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import BeliefContradictionError

Cell = tuple[int, int]


class CellValue(IntEnum):
    EMPTY = 0
    CANDIDATE = 1
    OBJECT = 2
    OTHER_OBJECT = 3
    BLOCKED = 4


EMPTY = int(CellValue.EMPTY)
CANDIDATE = int(CellValue.CANDIDATE)
OBJECT = int(CellValue.OBJECT)
OTHER_OBJECT = int(CellValue.OTHER_OBJECT)
BLOCKED = int(CellValue.BLOCKED)

_MAP_CHARS = {".": EMPTY, "#": BLOCKED, "X": OTHER_OBJECT, "O": OBJECT, "A": EMPTY}
_CELL_CHARS = {EMPTY: ".", CANDIDATE: "?", OBJECT: "O", OTHER_OBJECT: "X", BLOCKED: "#"}


def new_map(width: int, height: int, fill: int = CANDIDATE) -> np.ndarray:
    if width < 1 or height < 1:
        raise ValueError("map dimensions must be positive")
    return np.full((height, width), fill, dtype=np.uint8)


def map_to_text(grid: np.ndarray) -> str:
    """Render a 2D map as one character per cell, for debugging and demos."""
    return "\n".join("".join(_CELL_CHARS[int(v)] for v in row) for row in grid)


def is_connected(cells: frozenset[Cell] | set[Cell]) -> bool:
    """4-connectivity over a set of (x, y) cells."""
    if not cells:
        return False
    todo = [next(iter(cells))]
    seen = {todo[0]}
    while todo:
        x, y = todo.pop()
        for nb in ((x, y - 1), (x + 1, y), (x, y + 1), (x - 1, y)):
            if nb in cells and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(cells)


def _normalize(cells: frozenset[Cell]) -> frozenset[Cell]:
    min_x = min(x for x, _ in cells)
    min_y = min(y for _, y in cells)
    return frozenset((x - min_x, y - min_y) for x, y in cells)


class ObjectShape:
    """A 4-connected cell template; placements cover all four 90-degree turns."""

    def __init__(self, name: str, cells: frozenset[Cell] | set[Cell]):
        cells = frozenset(cells)
        if not is_connected(cells):
            raise ValueError(f"shape {name!r} is not 4-connected")
        self.name = name
        self.cells = _normalize(cells)
        self.size = len(cells)
        variants = []
        current = self.cells
        for _ in range(4):
            if current not in variants:
                variants.append(current)
            current = _normalize(frozenset((-y, x) for x, y in current))
        self.variants: tuple[frozenset[Cell], ...] = tuple(variants)

    def __repr__(self) -> str:
        return f"ObjectShape({self.name!r}, size={self.size})"


SHAPES: dict[str, ObjectShape] = {
    s.name: s
    for s in (
        ObjectShape("cube", {(0, 0)}),
        ObjectShape("I2", {(0, 0), (1, 0)}),
        ObjectShape("L3", {(0, 0), (0, 1), (1, 1)}),
        ObjectShape("I3", {(0, 0), (1, 0), (2, 0)}),
        ObjectShape("T4", {(0, 0), (1, 0), (2, 0), (1, 1)}),
        ObjectShape("S4", {(1, 0), (2, 0), (0, 1), (1, 1)}),
    )
}

DEFAULT_SHAPE = SHAPES["L3"]


@lru_cache(maxsize=16)
def _placements_cached(
    map_bytes: bytes,
    width: int,
    height: int,
    variants: tuple[tuple[Cell, ...], ...],
) -> tuple[frozenset[Cell], ...]:
    grid = np.frombuffer(map_bytes, dtype=np.uint8).reshape(height, width)
    object_cells = {(int(x), int(y)) for y, x in zip(*np.nonzero(grid == OBJECT))}
    found: list[frozenset[Cell]] = []
    seen: set[frozenset[Cell]] = set()
    for variant in variants:
        span_x = max(x for x, _ in variant)
        span_y = max(y for _, y in variant)
        for oy in range(height - span_y):
            for ox in range(width - span_x):
                cells = frozenset((ox + x, oy + y) for x, y in variant)
                if cells in seen:
                    continue
                seen.add(cells)
                if all(grid[y, x] in (CANDIDATE, OBJECT) for x, y in cells) and object_cells.issubset(cells):
                    found.append(cells)
    return tuple(found)


def consistent_placements(grid: np.ndarray, shape: ObjectShape) -> tuple[frozenset[Cell], ...]:
    """All distinct placements of ``shape`` that the map does not contradict.

    A placement may only use CANDIDATE or OBJECT cells and must cover every
    cell already observed as OBJECT (there is a single searched object).
    """
    h, w = grid.shape
    variants_key = tuple(tuple(sorted(v)) for v in shape.variants)
    return _placements_cached(grid.tobytes(), w, h, variants_key)


def place_object(grid: np.ndarray, shape: ObjectShape, rng: np.random.Generator) -> frozenset[Cell]:
    """Uniform draw over consistent placements; raises when none exists."""
    options = consistent_placements(grid, shape)
    if not options:
        raise BeliefContradictionError(
            f"no placement of shape {shape.name!r} is consistent with the map"
        )
    return options[int(rng.integers(len(options)))]


def footprint(agent: Cell, width: int, height: int, map_w: int, map_h: int) -> list[Cell]:
    """In-bounds cells of the width x height window centered on the agent."""
    if width % 2 == 0 or height % 2 == 0:
        raise ValueError("footprint dimensions must be odd")
    ax, ay = agent
    rx, ry = width // 2, height // 2
    return [
        (x, y)
        for y in range(max(0, ay - ry), min(map_h, ay + ry + 1))
        for x in range(max(0, ax - rx), min(map_w, ax + rx + 1))
    ]


def load_map_text(text: str) -> tuple[np.ndarray, Cell, frozenset[Cell]]:
    """Parse an ASCII map; returns (true map, agent start, object cells).

    Rows are lines; '.' floor, '#' blocked, 'X' other object, 'O' object cell,
    'A' agent start. The object must be present, 4-connected, and the map must
    contain exactly one agent start.
    """
    lines = [line.rstrip("\n") for line in text.strip("\n").splitlines()]
    if not lines:
        raise ValueError("empty map")
    width = len(lines[0])
    if any(len(line) != width for line in lines):
        raise ValueError("map rows must all have the same length")
    grid = new_map(width, len(lines), fill=EMPTY)
    agent: Cell | None = None
    object_cells: set[Cell] = set()
    for y, line in enumerate(lines):
        for x, ch in enumerate(line):
            if ch not in _MAP_CHARS:
                raise ValueError(f"unknown map character {ch!r} at ({x}, {y})")
            if ch == "A":
                if agent is not None:
                    raise ValueError("map must contain exactly one agent start 'A'")
                agent = (x, y)
            elif ch == "O":
                object_cells.add((x, y))
            grid[y, x] = _MAP_CHARS[ch]
    if agent is None:
        raise ValueError("map must contain exactly one agent start 'A'")
    if not object_cells:
        raise ValueError("map contains no object cells 'O'")
    if not is_connected(object_cells):
        raise ValueError("object cells must form one 4-connected component")
    return grid, agent, frozenset(object_cells)


def load_map_file(path: str | Path) -> tuple[np.ndarray, Cell, frozenset[Cell]]:
    return load_map_text(Path(path).read_text())
