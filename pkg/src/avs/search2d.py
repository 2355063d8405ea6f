"""2D active-search environment: grid states, window observations with a
border-noise model, map updates, rewards, and the ground-truth episode world.

The generative simulator renders observations purely from a state's own map
and believed object cells, so planning never peeks at the true object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ALL_ACTIONS,
    Action,
    GenerativeEnvironment,
    IllegalActionError,
    StepOutcome,
)
from .gridmap import (
    BLOCKED,
    CANDIDATE,
    EMPTY,
    OBJECT,
    OTHER_OBJECT,
    Cell,
    ObjectShape,
    footprint,
    new_map,
    place_object,
)


@dataclass(eq=False, slots=True)
class SearchState2D:
    """One particle: accumulated map, agent cell, and believed object cells."""

    grid: np.ndarray
    agent: Cell
    believed: frozenset[Cell]


@dataclass(frozen=True, slots=True)
class ObservationGrid2D:
    """Agent-centered w x h window of cell values, row-major bytes.

    Window cells outside the map are BLOCKED; CANDIDATE never appears.
    """

    width: int
    height: int
    pose: Cell
    values: bytes

    def value_at(self, x: int, y: int) -> int:
        """Window-local lookup, (0, 0) = upper-left corner."""
        return self.values[y * self.width + x]

    def cells(self) -> list[tuple[Cell, int]]:
        """(map cell, value) pairs for in-window positions, row-major."""
        ax, ay = self.pose
        rx, ry = self.width // 2, self.height // 2
        out = []
        for wy in range(self.height):
            for wx in range(self.width):
                out.append(((ax - rx + wx, ay - ry + wy), self.values[wy * self.width + wx]))
        return out


@dataclass(frozen=True, slots=True)
class BinaryObservation:
    """Ablation observation: whether the whole object is in view."""

    found: bool


@dataclass(frozen=True)
class RewardConfig:
    """Reward constants; penalties must be <= 0, bonuses >= 0."""

    action_penalty: float = -1.0
    reobserve_penalty: float = -2.0
    terminal_reward: float = 100.0
    exploration_reward: float = 1.0
    discovery_reward: float = 10.0
    refinement_reward: float = 10.0

    def __post_init__(self) -> None:
        if self.action_penalty > 0 or self.reobserve_penalty > 0:
            raise ValueError("penalties must be <= 0")
        if min(self.terminal_reward, self.exploration_reward, self.discovery_reward, self.refinement_reward) < 0:
            raise ValueError("rewards must be >= 0")


def legal_actions_2d(grid: np.ndarray, agent: Cell) -> tuple[Action, ...]:
    """Moves whose destination is in bounds and not BLOCKED on ``grid``."""
    h, w = grid.shape
    x, y = agent
    out = []
    for action in ALL_ACTIONS:
        dx, dy = action.offset
        nx, ny = x + dx, y + dy
        if 0 <= nx < w and 0 <= ny < h and grid[ny, nx] != BLOCKED:
            out.append(action)
    return tuple(out)


def _window_values(grid: np.ndarray, believed: frozenset[Cell], pose: Cell, w: int, h: int) -> bytearray:
    """Render the w x h window at ``pose`` from map knowledge plus belief."""
    gh, gw = grid.shape
    ax, ay = pose
    rx, ry = w // 2, h // 2
    values = bytearray(w * h)
    i = 0
    for wy in range(h):
        y = ay - ry + wy
        for wx in range(w):
            x = ax - rx + wx
            if 0 <= x < gw and 0 <= y < gh:
                if (x, y) in believed:
                    values[i] = OBJECT
                else:
                    v = grid[y, x]
                    values[i] = v if v == OTHER_OBJECT or v == BLOCKED else EMPTY
            else:
                values[i] = BLOCKED
            i += 1
    return values


def render_observation(state: SearchState2D, pose: Cell, obs_w: int = 3, obs_h: int = 3) -> ObservationGrid2D:
    """Noise-free, simulation-side observation for a state at ``pose``.

    OBJECT where the state believes its object to be, OTHER_OBJECT/BLOCKED
    where its map says so, EMPTY elsewhere; out-of-map window cells BLOCKED.
    """
    if obs_w % 2 == 0 or obs_h % 2 == 0:
        raise ValueError("observation dimensions must be odd")
    values = _window_values(state.grid, state.believed, pose, obs_w, obs_h)
    return ObservationGrid2D(obs_w, obs_h, pose, bytes(values))


# In-window 4-neighborhood used by the border noise model.
_NEIGHBOR_OFFSETS = ((0, -1), (1, 0), (0, 1), (-1, 0))


def _apply_border_noise(
    values: bytearray, w: int, h: int, p_noise: float, rng: np.random.Generator
) -> bytearray:
    """Flip border cells to an adjacent in-window value with prob ``p_noise``.

    Emulates perspective distortion: content bleeds between neighboring image
    cells. The center cell is exact, BLOCKED cells are never corrupted and
    never used as a flip source, and flips read pre-noise values. Draw order:
    row-major over border cells, one uniform draw per eligible cell, plus one
    index draw when the flip triggers.
    """
    clean = bytes(values)
    cx, cy = w // 2, h // 2
    for wy in range(h):
        for wx in range(w):
            if wx == cx and wy == cy:
                continue
            i = wy * w + wx
            if clean[i] == BLOCKED:
                continue
            if rng.random() >= p_noise:
                continue
            sources = []
            for dx, dy in _NEIGHBOR_OFFSETS:
                nx, ny = wx + dx, wy + dy
                if 0 <= nx < w and 0 <= ny < h and clean[ny * w + nx] != BLOCKED:
                    sources.append(clean[ny * w + nx])
            if sources:
                values[i] = sources[int(rng.integers(len(sources)))]
    return values


def apply_observation(grid: np.ndarray, obs: ObservationGrid2D) -> np.ndarray:
    """Overwrite the observed window cells; everything else is untouched."""
    out = grid.copy()
    h, w = grid.shape
    for (x, y), value in obs.cells():
        if 0 <= x < w and 0 <= y < h:
            out[y, x] = value
    return out


def is_terminal_2d(state: SearchState2D) -> bool:
    """Every believed object cell has been observed as OBJECT."""
    grid = state.grid
    return all(grid[y, x] == OBJECT for x, y in state.believed)


def reward_2d(
    state: SearchState2D, action: Action, next_state: SearchState2D, cfg: RewardConfig
) -> float:
    """Per-step reward: action penalty, re-observation penalty when the map
    did not change, terminal bonus, and per-cell exploration/discovery bonuses."""
    prev, new = state.grid, next_state.grid
    reward = cfg.action_penalty
    if np.array_equal(prev, new):
        reward += cfg.reobserve_penalty
    else:
        resolved = int(np.count_nonzero((prev == CANDIDATE) & (new != CANDIDATE)))
        discovered = int(np.count_nonzero((new == OBJECT) & (prev != OBJECT)))
        reward += cfg.exploration_reward * resolved + cfg.discovery_reward * discovered
    if is_terminal_2d(next_state):
        reward += cfg.terminal_reward
    return reward


def make_binary_observation(obs: ObservationGrid2D, object_size: int) -> bool:
    """Ablation detector: true only when the full object is in view."""
    return sum(1 for v in obs.values if v == OBJECT) >= object_size


def initial_agent_map(true_grid: np.ndarray) -> np.ndarray:
    """Agent's starting map: the floor plan's BLOCKED cells are known, every
    other cell is an unobserved CANDIDATE."""
    grid = np.full_like(true_grid, CANDIDATE)
    grid[true_grid == BLOCKED] = BLOCKED
    return grid


class SearchSim2D(GenerativeEnvironment):
    """Black-box generative simulator for the 2D search stage.

    Holds scene-independent configuration only (grid size, window size,
    rewards, the searched shape); observations come from each state's own
    belief, never from the ground truth.
    """

    def __init__(
        self,
        width: int,
        height: int,
        shape: ObjectShape,
        rewards: RewardConfig | None = None,
        obs_w: int = 3,
        obs_h: int = 3,
        binary: bool = False,
    ):
        if obs_w % 2 == 0 or obs_h % 2 == 0:
            raise ValueError("observation dimensions must be odd")
        self.width = width
        self.height = height
        self.shape = shape
        self.rewards = rewards or RewardConfig()
        self.obs_w = obs_w
        self.obs_h = obs_h
        self.binary = binary

    def legal_actions(self, state: SearchState2D) -> tuple[Action, ...]:
        return legal_actions_2d(state.grid, state.agent)

    def is_terminal(self, state: SearchState2D) -> bool:
        return is_terminal_2d(state)

    def step(self, state: SearchState2D, action: Action, rng: np.random.Generator) -> StepOutcome:
        grid = state.grid
        h, w = grid.shape
        x, y = state.agent
        dx, dy = action.offset
        nx, ny = x + dx, y + dy
        if not (0 <= nx < w and 0 <= ny < h) or grid[ny, nx] == BLOCKED:
            raise IllegalActionError(f"{action.name} from {state.agent} is not legal")
        pose = (nx, ny)
        cfg = self.rewards
        if self.binary:
            return self._step_binary(state, pose, cfg)

        values = _window_values(grid, state.believed, pose, self.obs_w, self.obs_h)
        obs = ObservationGrid2D(self.obs_w, self.obs_h, pose, bytes(values))

        new_grid = grid.copy()
        rx, ry = self.obs_w // 2, self.obs_h // 2
        resolved = 0
        discovered = 0
        changed = False
        i = 0
        for wy in range(self.obs_h):
            cy = ny - ry + wy
            for wx in range(self.obs_w):
                cx = nx - rx + wx
                if 0 <= cx < w and 0 <= cy < h:
                    old = grid[cy, cx]
                    val = values[i]
                    if old != val:
                        changed = True
                        new_grid[cy, cx] = val
                        if old == CANDIDATE:
                            resolved += 1
                        if val == OBJECT:
                            discovered += 1
                i += 1

        next_state = SearchState2D(new_grid, pose, state.believed)
        terminal = is_terminal_2d(next_state)
        reward = cfg.action_penalty
        if changed:
            reward += cfg.exploration_reward * resolved + cfg.discovery_reward * discovered
        else:
            reward += cfg.reobserve_penalty
        if terminal:
            reward += cfg.terminal_reward
        return StepOutcome(next_state, obs, reward, terminal)

    def _step_binary(self, state: SearchState2D, pose: Cell, cfg: RewardConfig) -> StepOutcome:
        # Simulation-side observations are noise-free, so the detector fires
        # exactly when every believed cell falls inside the view window
        # (equivalent to binarizing the rendered grid, but without the render).
        px, py = pose
        rx, ry = self.obs_w // 2, self.obs_h // 2
        found = all(abs(bx - px) <= rx and abs(by - py) <= ry for bx, by in state.believed)
        if found:
            new_grid = state.grid.copy()
            discovered = 0
            for bx, by in state.believed:
                if new_grid[by, bx] != OBJECT:
                    new_grid[by, bx] = OBJECT
                    discovered += 1
            changed = discovered > 0
        else:
            new_grid = state.grid
            discovered = 0
            changed = False
        next_state = SearchState2D(new_grid, pose, state.believed)
        terminal = is_terminal_2d(next_state)
        reward = cfg.action_penalty
        if changed:
            reward += cfg.discovery_reward * discovered
        else:
            reward += cfg.reobserve_penalty
        if terminal:
            reward += cfg.terminal_reward
        return StepOutcome(next_state, BinaryObservation(found), reward, terminal)

    def sample_consistent_state(
        self, known_map: np.ndarray, agent: Cell, rng: np.random.Generator
    ) -> SearchState2D:
        believed = place_object(known_map, self.shape, rng)
        return SearchState2D(known_map.copy(), agent, believed)


class GroundTruthEnv2D:
    """The one true scene an episode runs against.

    Produces real observations (optionally noise-corrupted at window borders)
    and tracks the agent's true pose and the step budget. In ``binary`` mode
    real observations collapse to the full-object-in-view flag.
    """

    def __init__(
        self,
        true_grid: np.ndarray,
        agent_start: Cell,
        object_cells: frozenset[Cell],
        p_noise: float = 0.0,
        obs_w: int = 3,
        obs_h: int = 3,
        max_steps: int = 200,
        binary: bool = False,
    ):
        if not 0.0 <= p_noise <= 1.0:
            raise ValueError("p_noise must lie in [0, 1]")
        h, w = true_grid.shape
        sx, sy = agent_start
        if not (0 <= sx < w and 0 <= sy < h) or true_grid[sy, sx] == BLOCKED:
            raise ValueError("agent start must be in bounds and unblocked")
        self.true_grid = true_grid
        self.object_cells = object_cells
        self.agent = agent_start
        self.start = agent_start
        self.p_noise = p_noise
        self.obs_w = obs_w
        self.obs_h = obs_h
        self.max_steps = max_steps
        self.binary = binary
        self.steps_taken = 0

    def legal_actions(self) -> tuple[Action, ...]:
        return legal_actions_2d(self.true_grid, self.agent)

    def observe_at(self, pose: Cell, rng: np.random.Generator) -> ObservationGrid2D:
        """Ground-truth window rendering at ``pose`` plus border noise."""
        # The window renderer marks the passed cell set OBJECT; for the true
        # scene that set is the actual object.
        values = _window_values(self.true_grid, self.object_cells, pose, self.obs_w, self.obs_h)
        if self.p_noise > 0.0:
            values = _apply_border_noise(values, self.obs_w, self.obs_h, self.p_noise, rng)
        return ObservationGrid2D(self.obs_w, self.obs_h, pose, bytes(values))

    def real_step(self, action: Action, rng: np.random.Generator):
        """Move the agent for real and return the real observation."""
        x, y = self.agent
        dx, dy = action.offset
        nx, ny = x + dx, y + dy
        h, w = self.true_grid.shape
        if not (0 <= nx < w and 0 <= ny < h) or self.true_grid[ny, nx] == BLOCKED:
            raise IllegalActionError(f"{action.name} from {self.agent} is not legal")
        self.agent = (nx, ny)
        self.steps_taken += 1
        obs = self.observe_at(self.agent, rng)
        if self.binary:
            return BinaryObservation(make_binary_observation(obs, len(self.object_cells)))
        return obs

    @property
    def out_of_steps(self) -> bool:
        return self.steps_taken >= self.max_steps


def observe_true(env: GroundTruthEnv2D, pose: Cell, rng: np.random.Generator) -> ObservationGrid2D:
    """Ground-truth observation at an arbitrary pose (noise model included)."""
    return env.observe_at(pose, rng)


def build_random_scene(
    width: int,
    height: int,
    shape: ObjectShape,
    rng: np.random.Generator,
    agent_start: Cell | None = None,
    blocked: frozenset[Cell] = frozenset(),
    other_objects: frozenset[Cell] = frozenset(),
) -> tuple[np.ndarray, Cell, frozenset[Cell]]:
    """Uniformly place the true object on free floor; returns a scene triple."""
    scratch = new_map(width, height, fill=CANDIDATE)
    for x, y in blocked:
        scratch[y, x] = BLOCKED
    for x, y in other_objects:
        scratch[y, x] = OTHER_OBJECT
    cells = place_object(scratch, shape, rng)
    true_grid = new_map(width, height, fill=EMPTY)
    for x, y in blocked:
        true_grid[y, x] = BLOCKED
    for x, y in other_objects:
        true_grid[y, x] = OTHER_OBJECT
    for x, y in cells:
        true_grid[y, x] = OBJECT
    if agent_start is None:
        agent_start = (width // 2, height // 2)
    return true_grid, agent_start, cells
