"""3D pose-refinement stage: voxel maps, synthetic top-down point clouds,
core-cell soft equality, and the lift that turns a finished 2D search belief
into the initial 3D belief.

Voxel grids are numpy uint8 arrays shaped (levels, height, width), indexed
[z, y, x]; level 0 is the table plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from .core import (
    ALL_ACTIONS,
    Action,
    BeliefContradictionError,
    GenerativeEnvironment,
    IllegalActionError,
    StageOrderError,
    StepOutcome,
)
from .gridmap import BLOCKED, CANDIDATE, EMPTY, OBJECT, OTHER_OBJECT, Cell
from .pomcp import BeliefState
from .search2d import RewardConfig, SearchState2D, is_terminal_2d

Cell3 = tuple[int, int, int]


@dataclass(eq=False, slots=True)
class SearchState3D:
    """Voxel map, agent column (the sensor flies at fixed height), and the
    believed 3D object cells."""

    grid: np.ndarray
    agent: Cell
    believed: frozenset[Cell3]


@dataclass(frozen=True, slots=True)
class ObservationGrid3D:
    """w x h x d voxel window with per-cell core flags, both z-major bytes.

    CANDIDATE marks occluded voxels (below a column's sensed surface); map
    updates skip them. Core flags are computed from point coverage, never
    asserted by hand.
    """

    width: int
    height: int
    depth: int
    pose: Cell
    values: bytes
    core: bytes

    def index(self, wx: int, wy: int, z: int) -> int:
        return (z * self.height + wy) * self.width + wx

    def value_at(self, wx: int, wy: int, z: int) -> int:
        return self.values[self.index(wx, wy, z)]

    def is_core(self, wx: int, wy: int, z: int) -> bool:
        return self.core[self.index(wx, wy, z)] == 1


@dataclass(eq=False, slots=True)
class PointCloud:
    """Sensor points in workspace units plus the cell kind that emitted them."""

    points: np.ndarray  # (n, 3) float64
    tags: np.ndarray  # (n,) uint8 CellValue codes

    def __len__(self) -> int:
        return len(self.points)

    def save_xyz(self, path: str | Path) -> None:
        """One `x y z` row per point, three decimals; tags are not persisted."""
        with open(path, "w") as fh:
            for x, y, z in self.points:
                fh.write(f"{x:.3f} {y:.3f} {z:.3f}\n")


def load_xyz(path: str | Path) -> PointCloud:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            rows.append([float(v) for v in line.split()])
    pts = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return PointCloud(pts, np.full(len(pts), OBJECT, dtype=np.uint8))


def classify_core(points: np.ndarray, cell_min: tuple[float, float], cell_size: float) -> bool:
    """Core cell test: points cover all four x-y quadrants of the cell.

    Quadrants split at the cell center; points on a split line count toward
    the upper quadrant.
    """
    if len(points) == 0:
        return False
    cx = cell_min[0] + cell_size / 2.0
    cy = cell_min[1] + cell_size / 2.0
    right = points[:, 0] >= cx
    top = points[:, 1] >= cy
    quadrants = {(bool(r), bool(t)) for r, t in zip(right, top)}
    return len(quadrants) == 4


def voxelize(
    cloud: PointCloud,
    origin: tuple[float, float, float],
    cell_size: float,
    dims: tuple[int, int, int],
) -> ObservationGrid3D:
    """Bin points into a w x h x d grid anchored at ``origin``.

    Cells with at least one point take OBJECT or OTHER_OBJECT from the point
    tags; point-free cells are EMPTY. Points outside the grid are dropped.
    The returned pose is the window's center column.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    w, h, d = dims
    values = bytearray([EMPTY]) * (w * h * d)
    core = bytearray(w * h * d)
    if len(cloud) > 0:
        rel = (cloud.points - np.asarray(origin, dtype=np.float64)) / cell_size
        idx = np.floor(rel).astype(np.int64)
        ok = (
            (idx[:, 0] >= 0) & (idx[:, 0] < w)
            & (idx[:, 1] >= 0) & (idx[:, 1] < h)
            & (idx[:, 2] >= 0) & (idx[:, 2] < d)
        )
        idx = idx[ok]
        pts = cloud.points[ok]
        tags = cloud.tags[ok]
        if len(idx) > 0:
            linear = (idx[:, 2] * h + idx[:, 1]) * w + idx[:, 0]
            order = np.argsort(linear, kind="stable")
            linear = linear[order]
            pts = pts[order]
            tags = tags[order]
            starts = np.flatnonzero(np.r_[True, linear[1:] != linear[:-1]])
            bounds = np.r_[starts, len(linear)]
            for s, e in zip(bounds[:-1], bounds[1:]):
                li = int(linear[s])
                cell_tags = tags[s:e]
                values[li] = OBJECT if np.any(cell_tags == OBJECT) else OTHER_OBJECT
                gx = li % w
                gy = (li // w) % h
                cell_min = (origin[0] + gx * cell_size, origin[1] + gy * cell_size)
                core[li] = 1 if classify_core(pts[s:e], cell_min, cell_size) else 0
    return ObservationGrid3D(w, h, d, (w // 2, h // 2), bytes(values), bytes(core))


def soft_equal(a: ObservationGrid3D, b: ObservationGrid3D) -> bool:
    """Observations agree on every cell that is core in either of them;
    non-core cells are ignored. Reflexive and symmetric, not transitive."""
    if (a.width, a.height, a.depth) != (b.width, b.height, b.depth):
        raise ValueError("soft equality requires matching observation dimensions")
    for av, bv, ac, bc in zip(a.values, b.values, a.core, b.core):
        if (ac or bc) and av != bv:
            return False
    return True


def _occlude_below_tops(values: bytearray, w: int, h: int, d: int) -> None:
    """Mark point-free cells below each column's sensed surface as occluded."""
    for wy in range(h):
        for wx in range(w):
            top = -1
            for z in range(d - 1, -1, -1):
                if values[(z * h + wy) * w + wx] not in (EMPTY, CANDIDATE):
                    top = z
                    break
            for z in range(top):
                i = (z * h + wy) * w + wx
                if values[i] == EMPTY:
                    values[i] = CANDIDATE


def _sample_cloud(
    occupied: dict[Cell3, int],
    columns: list[Cell],
    cell_size: float,
    points_per_face: int,
    jitter_frac: float,
    dropout: float,
    rng: np.random.Generator,
) -> PointCloud:
    """Top-down sensing of ``occupied`` cells restricted to ``columns``.

    Only each column's topmost occupied cell emits points (everything under
    it is occluded). Points sit on a regular grid across the top face, pushed
    slightly into the voxel so depth jitter cannot change the sensed level;
    x-y jitter may still bleed edge points into neighboring columns.
    """
    tops: dict[Cell, tuple[int, int]] = {}
    for (x, y, z), tag in occupied.items():
        cur = tops.get((x, y))
        if cur is None or z > cur[0]:
            tops[(x, y)] = (z, tag)
    side = max(1, int(round(points_per_face**0.5)))
    base = (np.arange(side, dtype=np.float64) + 0.5) / side
    gx, gy = np.meshgrid(base, base)
    face = np.column_stack([gx.ravel(), gy.ravel()])
    all_pts = []
    all_tags = []
    for col in sorted(columns, key=lambda c: (c[1], c[0])):
        hit = tops.get(col)
        if hit is None:
            continue
        z, tag = hit
        n = len(face)
        pts = np.empty((n, 3), dtype=np.float64)
        pts[:, 0] = (col[0] + face[:, 0]) * cell_size
        pts[:, 1] = (col[1] + face[:, 1]) * cell_size
        pts[:, 2] = (z + 1) * cell_size - 0.15 * cell_size
        if jitter_frac > 0.0:
            pts += rng.uniform(-jitter_frac, jitter_frac, size=(n, 3)) * cell_size
        if dropout > 0.0:
            pts = pts[rng.random(n) >= dropout]
        all_pts.append(pts)
        all_tags.append(np.full(len(pts), tag, dtype=np.uint8))
    if not all_pts:
        return PointCloud(np.empty((0, 3), dtype=np.float64), np.empty(0, dtype=np.uint8))
    return PointCloud(np.concatenate(all_pts), np.concatenate(all_tags))


def _window_columns(pose: Cell, obs_w: int, obs_h: int, map_w: int, map_h: int) -> list[Cell]:
    ax, ay = pose
    rx, ry = obs_w // 2, obs_h // 2
    return [
        (x, y)
        for y in range(ay - ry, ay + ry + 1)
        for x in range(ax - rx, ax + rx + 1)
        if 0 <= x < map_w and 0 <= y < map_h
    ]


def _assemble_observation(
    cloud: PointCloud,
    pose: Cell,
    obs_w: int,
    obs_h: int,
    z_levels: int,
    cell_size: float,
    map_w: int,
    map_h: int,
) -> ObservationGrid3D:
    """Voxelize a sensed cloud into the agent-centered window and apply the
    top-down occlusion semantics; out-of-map columns are BLOCKED padding."""
    ax, ay = pose
    rx, ry = obs_w // 2, obs_h // 2
    origin = ((ax - rx) * cell_size, (ay - ry) * cell_size, 0.0)
    vox = voxelize(cloud, origin, cell_size, (obs_w, obs_h, z_levels))
    values = bytearray(vox.values)
    core = bytearray(vox.core)
    _occlude_below_tops(values, obs_w, obs_h, z_levels)
    for wy in range(obs_h):
        for wx in range(obs_w):
            x, y = ax - rx + wx, ay - ry + wy
            if not (0 <= x < map_w and 0 <= y < map_h):
                for z in range(z_levels):
                    i = (z * obs_h + wy) * obs_w + wx
                    values[i] = BLOCKED
                    core[i] = 0
    return ObservationGrid3D(obs_w, obs_h, z_levels, pose, bytes(values), bytes(core))


def render_pointcloud(
    state: SearchState3D,
    pose: Cell,
    rng: np.random.Generator,
    obs_w: int = 3,
    obs_h: int = 3,
    cell_size: float = 1.0,
    points_per_face: int = 64,
    jitter_frac: float = 0.1,
    dropout: float = 0.05,
) -> PointCloud:
    """Simulation-side cloud: the state's believed object cells plus the
    obstacles its map already knows; map OBJECT cells outside the believed
    set are deliberately not rendered, so a later view can refute them."""
    z_levels, map_h, map_w = state.grid.shape
    occupied: dict[Cell3, int] = {cell: OBJECT for cell in state.believed}
    grid = state.grid
    for x, y in _window_columns(pose, obs_w, obs_h, map_w, map_h):
        for z in range(z_levels):
            if grid[z, y, x] == OTHER_OBJECT and (x, y, z) not in occupied:
                occupied[(x, y, z)] = OTHER_OBJECT
    columns = _window_columns(pose, obs_w, obs_h, map_w, map_h)
    return _sample_cloud(occupied, columns, cell_size, points_per_face, jitter_frac, dropout, rng)


def apply_observation_3d(grid: np.ndarray, obs: ObservationGrid3D) -> np.ndarray:
    """Overwrite observed voxels; occluded (CANDIDATE) and padding (BLOCKED
    out-of-map) window cells leave the map untouched."""
    out = grid.copy()
    z_levels, map_h, map_w = grid.shape
    ax, ay = obs.pose
    rx, ry = obs.width // 2, obs.height // 2
    for wy in range(obs.height):
        y = ay - ry + wy
        if not 0 <= y < map_h:
            continue
        for wx in range(obs.width):
            x = ax - rx + wx
            if not 0 <= x < map_w:
                continue
            for z in range(min(obs.depth, z_levels)):
                v = obs.values[(z * obs.height + wy) * obs.width + wx]
                if v != CANDIDATE:
                    out[z, y, x] = v
    return out


def is_terminal_3d(state: SearchState3D) -> bool:
    """All believed cells confirmed OBJECT and no believed column still has
    unresolved CANDIDATE voxels."""
    grid = state.grid
    z_levels = grid.shape[0]
    for x, y, z in state.believed:
        if grid[z, y, x] != OBJECT:
            return False
    for x, y in {(x, y) for x, y, _ in state.believed}:
        for z in range(z_levels):
            if grid[z, y, x] == CANDIDATE:
                return False
    return True


def reward_3d(
    state: SearchState3D, action: Action, next_state: SearchState3D, cfg: RewardConfig
) -> float:
    """Action penalty, re-observation penalty when the map is unchanged,
    terminal bonus, and a refinement bonus per spurious OBJECT cell cleared."""
    prev, new = state.grid, next_state.grid
    reward = cfg.action_penalty
    if np.array_equal(prev, new):
        reward += cfg.reobserve_penalty
    else:
        refined = int(np.count_nonzero((prev == OBJECT) & (new == EMPTY)))
        reward += cfg.refinement_reward * refined
    if is_terminal_3d(next_state):
        reward += cfg.terminal_reward
    return reward


@lru_cache(maxsize=64)
def column_shapes(
    shadow: frozenset[Cell], count: int, z_levels: int
) -> tuple[frozenset[Cell3], ...]:
    """All 6-connected cell sets of ``count`` cells whose level-0 shadow is
    exactly ``shadow``."""
    cells = [(x, y, z) for (x, y) in sorted(shadow) for z in range(z_levels)]
    if count < len(shadow) or count > len(cells):
        return ()
    out = []
    for combo in combinations(cells, count):
        chosen = frozenset(combo)
        if {(x, y) for x, y, _ in chosen} != shadow:
            continue
        if _connected_6(chosen):
            out.append(chosen)
    return tuple(out)


def _connected_6(cells: frozenset[Cell3]) -> bool:
    todo = [next(iter(cells))]
    seen = {todo[0]}
    while todo:
        x, y, z = todo.pop()
        for nb in (
            (x - 1, y, z), (x + 1, y, z),
            (x, y - 1, z), (x, y + 1, z),
            (x, y, z - 1), (x, y, z + 1),
        ):
            if nb in cells and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(cells)


def lift_belief(belief: BeliefState, z_levels: int, rng: np.random.Generator) -> BeliefState:
    """Turn a finished 2D search belief into the 3D pose belief.

    Level 0 of every particle copies its 2D map bit-exactly, upper levels are
    unresolved CANDIDATE, and the believed 3D cells are drawn uniformly over
    vertical arrangements whose shadow matches the particle's 2D object cells.
    """
    if z_levels < 1:
        raise ValueError("z_levels must be >= 1")
    lifted = []
    for particle in belief.particles:
        if not isinstance(particle, SearchState2D) or not is_terminal_2d(particle):
            raise StageOrderError("2D search must be finished before lifting the belief")
        h, w = particle.grid.shape
        grid3 = np.full((z_levels, h, w), CANDIDATE, dtype=np.uint8)
        grid3[0] = particle.grid
        shadow = particle.believed
        options = column_shapes(shadow, len(shadow), z_levels)
        believed3 = options[int(rng.integers(len(options)))]
        lifted.append(SearchState3D(grid3, particle.agent, believed3))
    return BeliefState(lifted, belief.num_particles)


class SearchSim3D(GenerativeEnvironment):
    """Black-box generative simulator for the pose stage: moves the top-down
    sensor over columns and produces voxelized point-cloud observations."""

    def __init__(
        self,
        width: int,
        height: int,
        z_levels: int,
        object_cell_count: int,
        rewards: RewardConfig | None = None,
        obs_w: int = 3,
        obs_h: int = 3,
        cell_size: float = 1.0,
        points_per_face: int = 64,
        jitter_frac: float = 0.1,
        dropout: float = 0.05,
    ):
        self.width = width
        self.height = height
        self.z_levels = z_levels
        self.object_cell_count = object_cell_count
        self.rewards = rewards or RewardConfig()
        self.obs_w = obs_w
        self.obs_h = obs_h
        self.cell_size = cell_size
        self.points_per_face = points_per_face
        self.jitter_frac = jitter_frac
        self.dropout = dropout

    def legal_actions(self, state: SearchState3D) -> tuple[Action, ...]:
        return self._legal_from(state.grid, state.agent)

    def _legal_from(self, grid: np.ndarray, agent: Cell) -> tuple[Action, ...]:
        x, y = agent
        out = []
        for action in ALL_ACTIONS:
            dx, dy = action.offset
            nx, ny = x + dx, y + dy
            if 0 <= nx < self.width and 0 <= ny < self.height and not np.any(grid[:, ny, nx] == BLOCKED):
                out.append(action)
        return tuple(out)

    def is_terminal(self, state: SearchState3D) -> bool:
        return is_terminal_3d(state)

    def observations_match(self, simulated: ObservationGrid3D, real: ObservationGrid3D) -> bool:
        return soft_equal(simulated, real)

    def observe(self, state: SearchState3D, pose: Cell, rng: np.random.Generator) -> ObservationGrid3D:
        cloud = render_pointcloud(
            state, pose, rng, self.obs_w, self.obs_h, self.cell_size,
            self.points_per_face, self.jitter_frac, self.dropout,
        )
        return _assemble_observation(
            cloud, pose, self.obs_w, self.obs_h, self.z_levels,
            self.cell_size, self.width, self.height,
        )

    def step(self, state: SearchState3D, action: Action, rng: np.random.Generator) -> StepOutcome:
        x, y = state.agent
        dx, dy = action.offset
        nx, ny = x + dx, y + dy
        if not (0 <= nx < self.width and 0 <= ny < self.height) or np.any(state.grid[:, ny, nx] == BLOCKED):
            raise IllegalActionError(f"{action.name} from {state.agent} is not legal")
        pose = (nx, ny)
        obs = self.observe(state, pose, rng)
        new_grid = apply_observation_3d(state.grid, obs)
        next_state = SearchState3D(new_grid, pose, state.believed)
        reward = reward_3d(state, action, next_state, self.rewards)
        return StepOutcome(next_state, obs, reward, is_terminal_3d(next_state))

    def sample_consistent_state(
        self, known_map: np.ndarray, agent: Cell, rng: np.random.Generator
    ) -> SearchState3D:
        placements = _consistent_shapes_3d(known_map, self.object_cell_count)
        if not placements:
            raise BeliefContradictionError("no 3D object arrangement fits the observed map")
        believed = placements[int(rng.integers(len(placements)))]
        return SearchState3D(known_map.copy(), agent, believed)


def _consistent_shapes_3d(
    grid: np.ndarray, count: int, limit: int = 20000
) -> tuple[frozenset[Cell3], ...]:
    """6-connected size-``count`` cell sets over CANDIDATE/OBJECT voxels that
    cover every voxel already observed as OBJECT."""
    z_levels, h, w = grid.shape
    eligible = {
        (x, y, z)
        for z in range(z_levels)
        for y in range(h)
        for x in range(w)
        if grid[z, y, x] in (CANDIDATE, OBJECT)
    }
    must = {
        (x, y, z)
        for z in range(z_levels)
        for y in range(h)
        for x in range(w)
        if grid[z, y, x] == OBJECT
    }
    if len(must) > count:
        return ()
    seeds = sorted(must) if must else sorted(eligible)
    found: set[frozenset[Cell3]] = set()

    def grow(current: frozenset[Cell3]) -> None:
        if len(found) >= limit:
            return
        if len(current) == count:
            if must.issubset(current):
                found.add(current)
            return
        frontier = set()
        for x, y, z in current:
            for nb in (
                (x - 1, y, z), (x + 1, y, z),
                (x, y - 1, z), (x, y + 1, z),
                (x, y, z - 1), (x, y, z + 1),
            ):
                if nb in eligible and nb not in current:
                    frontier.add(nb)
        for nb in sorted(frontier):
            grow(current | {nb})

    for seed in seeds:
        grow(frozenset({seed}))
        if not must and len(found) >= limit:
            break
    return tuple(sorted(found, key=sorted))


class GroundTruthEnv3D:
    """True 3D scene for the pose stage; mirrors GroundTruthEnv2D."""

    def __init__(
        self,
        width: int,
        height: int,
        z_levels: int,
        object_cells: frozenset[Cell3],
        other_cells: frozenset[Cell3] = frozenset(),
        agent_start: Cell = (0, 0),
        obs_w: int = 3,
        obs_h: int = 3,
        cell_size: float = 1.0,
        points_per_face: int = 64,
        jitter_frac: float = 0.1,
        dropout: float = 0.05,
        max_steps: int = 200,
    ):
        self.width = width
        self.height = height
        self.z_levels = z_levels
        self.object_cells = object_cells
        self.other_cells = other_cells
        self.agent = agent_start
        self.obs_w = obs_w
        self.obs_h = obs_h
        self.cell_size = cell_size
        self.points_per_face = points_per_face
        self.jitter_frac = jitter_frac
        self.dropout = dropout
        self.max_steps = max_steps
        self.steps_taken = 0

    def observe_at(self, pose: Cell, rng: np.random.Generator) -> ObservationGrid3D:
        occupied: dict[Cell3, int] = {c: OBJECT for c in self.object_cells}
        for c in self.other_cells:
            occupied.setdefault(c, OTHER_OBJECT)
        columns = _window_columns(pose, self.obs_w, self.obs_h, self.width, self.height)
        cloud = _sample_cloud(
            occupied, columns, self.cell_size, self.points_per_face,
            self.jitter_frac, self.dropout, rng,
        )
        return _assemble_observation(
            cloud, pose, self.obs_w, self.obs_h, self.z_levels,
            self.cell_size, self.width, self.height,
        )

    def real_step(self, action: Action, rng: np.random.Generator) -> ObservationGrid3D:
        x, y = self.agent
        dx, dy = action.offset
        nx, ny = x + dx, y + dy
        if not (0 <= nx < self.width and 0 <= ny < self.height):
            raise IllegalActionError(f"{action.name} from {self.agent} is not legal")
        self.agent = (nx, ny)
        self.steps_taken += 1
        return self.observe_at(self.agent, rng)
