"""Episode runner, random-walk baseline, seeded experiment matrix, and CSV
emission.

Every episode owns two RNG streams derived from (seed_base, episode seed):
one drives the scene (object placement, observation noise), the other the
agent (initial belief, planner simulations, belief updates). Scene draws
therefore pair up across policies and planner settings on the same seed.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    Action,
    BeliefContradictionError,
    NoLegalActionError,
    SolverConfig,
    extend_history,
)
from .gridmap import CANDIDATE, SHAPES, Cell, load_map_file, map_to_text
from .pomcp import BeliefState, POMCPPlanner, uniform_action, update_belief
from .pose3d import (
    GroundTruthEnv3D,
    SearchSim3D,
    apply_observation_3d,
    is_terminal_3d,
    lift_belief,
)
from .search2d import (
    GroundTruthEnv2D,
    RewardConfig,
    SearchSim2D,
    apply_observation,
    build_random_scene,
    initial_agent_map,
    is_terminal_2d,
    legal_actions_2d,
)

CSV_HEADER = [
    "policy",
    "obs_model",
    "stage",
    "n_sim",
    "particles",
    "episodes",
    "found",
    "mean_steps",
    "std_steps",
    "mean_time_s",
    "failures",
]

POLICY_POMCP = "pomcp"
POLICY_RANDOM = "random"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment matrix: the cross product of policies, simulation
    counts, and particle counts, all sharing the same episode seed list."""

    grid_width: int = 20
    grid_height: int = 20
    object_shape: str = "L3"
    n_sim: tuple[int, ...] = (4, 10, 25, 50, 100, 200)
    particles: tuple[int, ...] = (200,)
    episodes: int = 100
    p_noise: float = 0.0
    policy: tuple[str, ...] = (POLICY_POMCP,)
    obs_model: str = "grid"
    stage: str = "2d"
    seed_base: int = 1
    max_steps: int = 200
    obs_width: int = 3
    obs_height: int = 3
    exploration: float = 25.0
    discount: float = 0.90
    depth_epsilon: float = 0.05
    max_depth: int = 60
    z_levels: int = 5
    pose_jitter: float = 0.1
    pose_dropout: float = 0.05
    points_per_face: int = 64
    map_file: str | None = None
    agent_start: tuple[int, int] | None = None
    record_time: bool = True
    rewards: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if any(n < 1 for n in self.n_sim):
            raise ValueError("all n_sim values must be >= 1")
        if any(k < 1 for k in self.particles):
            raise ValueError("all particle counts must be >= 1")
        if self.obs_model not in ("grid", "binary"):
            raise ValueError("obs_model must be 'grid' or 'binary'")
        if self.stage not in ("2d", "2d+3d"):
            raise ValueError("stage must be '2d' or '2d+3d'")
        bad = [p for p in self.policy if p not in (POLICY_POMCP, POLICY_RANDOM)]
        if bad:
            raise ValueError(f"unknown policy {bad[0]!r}")
        if self.object_shape not in SHAPES:
            raise ValueError(f"unknown object shape {self.object_shape!r}")


@dataclass
class EpisodeResult:
    """Outcome of one episode; steps counts real environment actions."""

    found: bool
    steps: int
    wall_time: float
    seed: int
    stage: str
    contradiction: bool = False
    steps_search: int = 0
    steps_pose: int = 0
    # diagnostics, populated only when requested
    final_believed: tuple[frozenset, ...] | None = None
    true_cells: frozenset | None = None
    lift_level0_exact: bool | None = None


def random_walk_policy(grid: np.ndarray, agent: Cell, rng: np.random.Generator) -> Action:
    """Uniform draw over the moves the agent's map knowledge allows."""
    return uniform_action(legal_actions_2d(grid, agent), rng)


def _episode_rngs(cfg: ExperimentConfig, seed: int):
    env_ss, agent_ss = np.random.SeedSequence((cfg.seed_base, seed)).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(agent_ss)


def _build_scene(cfg: ExperimentConfig, env_rng: np.random.Generator):
    if cfg.map_file is not None:
        return load_map_file(cfg.map_file)
    shape = SHAPES[cfg.object_shape]
    return build_random_scene(
        cfg.grid_width, cfg.grid_height, shape, env_rng, agent_start=cfg.agent_start
    )


def run_episode(
    cfg: ExperimentConfig,
    seed: int,
    collect_diagnostics: bool = False,
    on_step: Callable[..., None] | None = None,
) -> EpisodeResult:
    """Play one full plan/act/observe/update loop until the belief terminates
    or the step budget runs out; deterministic given (cfg, seed)."""
    n_sim = cfg.n_sim[0]
    num_particles = cfg.particles[0]
    policy = cfg.policy[0]
    shape = SHAPES[cfg.object_shape]
    binary = cfg.obs_model == "binary"
    stage_label = "search" if cfg.stage == "2d" else "search+pose"

    env_rng, agent_rng = _episode_rngs(cfg, seed)
    true_grid, start, object_cells = _build_scene(cfg, env_rng)
    height, width = true_grid.shape
    truth = GroundTruthEnv2D(
        true_grid, start, object_cells,
        p_noise=cfg.p_noise, obs_w=cfg.obs_width, obs_h=cfg.obs_height,
        max_steps=cfg.max_steps, binary=binary,
    )
    sim = SearchSim2D(
        width, height, shape, cfg.rewards,
        obs_w=cfg.obs_width, obs_h=cfg.obs_height, binary=binary,
    )
    solver_cfg = SolverConfig(
        num_simulations=n_sim,
        num_particles=num_particles,
        exploration=cfg.exploration,
        discount=cfg.discount,
        depth_epsilon=cfg.depth_epsilon,
        max_depth=cfg.max_depth,
    )
    planner = POMCPPlanner(sim, solver_cfg) if policy == POLICY_POMCP else None

    known_map = initial_agent_map(true_grid)
    try:
        particles = [
            sim.sample_consistent_state(known_map, start, agent_rng)
            for _ in range(num_particles)
        ]
    except BeliefContradictionError:
        return EpisodeResult(False, 0, 0.0, seed, stage_label, contradiction=True)
    belief = BeliefState(particles, num_particles)
    history = ()

    clock = time.perf_counter()
    found_2d = False
    contradiction = False
    while truth.steps_taken < cfg.max_steps:
        legal = legal_actions_2d(known_map, truth.agent)
        if not legal:
            break
        try:
            if planner is not None:
                action = planner.search(belief, history, agent_rng)
            else:
                action = uniform_action(legal, agent_rng)
        except NoLegalActionError:
            break
        real_obs = truth.real_step(action, env_rng)
        if not binary:
            known_map = apply_observation(known_map, real_obs)
        try:
            belief = update_belief(
                sim, belief, action, real_obs, solver_cfg, agent_rng, known_map, truth.agent
            )
        except BeliefContradictionError:
            contradiction = True
            break
        history = extend_history(history, action, real_obs)
        if on_step is not None:
            on_step(
                stage="search", step=truth.steps_taken, action=action, obs=real_obs,
                belief=belief, known_map=known_map, agent=truth.agent,
            )
        if all(is_terminal_2d(p) for p in belief.particles):
            found_2d = True
            break

    result = EpisodeResult(
        found=found_2d,
        steps=truth.steps_taken,
        wall_time=0.0,
        seed=seed,
        stage=stage_label,
        contradiction=contradiction,
        steps_search=truth.steps_taken,
    )
    if collect_diagnostics:
        result.final_believed = tuple(p.believed for p in belief.particles)
        result.true_cells = object_cells

    if cfg.stage == "2d+3d" and found_2d:
        _run_pose_stage(cfg, result, belief, truth, known_map, object_cells, env_rng,
                        agent_rng, solver_cfg, collect_diagnostics, on_step)

    result.wall_time = time.perf_counter() - clock if cfg.record_time else 0.0
    return result


def _run_pose_stage(
    cfg: ExperimentConfig,
    result: EpisodeResult,
    belief2d: BeliefState,
    truth2d: GroundTruthEnv2D,
    known_map2d: np.ndarray,
    object_cells: frozenset[Cell],
    env_rng: np.random.Generator,
    agent_rng: np.random.Generator,
    solver_cfg: SolverConfig,
    collect_diagnostics: bool,
    on_step: Callable[..., None] | None,
) -> None:
    """Continue a finished search episode through the 3D pose stage in place."""
    height, width = truth2d.true_grid.shape
    belief3 = lift_belief(belief2d, cfg.z_levels, agent_rng)
    if collect_diagnostics:
        result.lift_level0_exact = all(
            np.array_equal(p3.grid[0], p2.grid)
            for p3, p2 in zip(belief3.particles, belief2d.particles)
        )
    true_cells3 = frozenset((x, y, 0) for x, y in object_cells)
    truth3 = GroundTruthEnv3D(
        width, height, cfg.z_levels, true_cells3,
        agent_start=truth2d.agent, obs_w=cfg.obs_width, obs_h=cfg.obs_height,
        points_per_face=cfg.points_per_face,
        jitter_frac=cfg.pose_jitter, dropout=cfg.pose_dropout,
        max_steps=cfg.max_steps,
    )
    sim3 = SearchSim3D(
        width, height, cfg.z_levels, len(object_cells), cfg.rewards,
        obs_w=cfg.obs_width, obs_h=cfg.obs_height,
        points_per_face=cfg.points_per_face,
        jitter_frac=cfg.pose_jitter, dropout=cfg.pose_dropout,
    )
    planner3 = POMCPPlanner(sim3, solver_cfg) if cfg.policy[0] == POLICY_POMCP else None

    # Real accumulated 3D map: level 0 inherits the real 2D map.
    known3 = np.full((cfg.z_levels, height, width), CANDIDATE, dtype=np.uint8)
    known3[0] = known_map2d
    history3 = ()
    found_3d = False
    belief = belief3
    while result.steps_search + truth3.steps_taken < cfg.max_steps:
        legal = sim3.legal_actions(belief.particles[0])
        if not legal:
            break
        try:
            if planner3 is not None:
                action = planner3.search(belief, history3, agent_rng)
            else:
                action = uniform_action(legal, agent_rng)
        except NoLegalActionError:
            break
        real_obs = truth3.real_step(action, env_rng)
        known3 = apply_observation_3d(known3, real_obs)
        try:
            belief = update_belief(
                sim3, belief, action, real_obs, solver_cfg, agent_rng, known3, truth3.agent
            )
        except BeliefContradictionError:
            result.contradiction = True
            break
        history3 = extend_history(history3, action, real_obs)
        if on_step is not None:
            on_step(
                stage="pose", step=truth3.steps_taken, action=action, obs=real_obs,
                belief=belief, known_map=known3, agent=truth3.agent,
            )
        if all(is_terminal_3d(p) for p in belief.particles):
            found_3d = True
            break

    result.steps_pose = truth3.steps_taken
    result.steps = result.steps_search + truth3.steps_taken
    result.found = found_3d
    if collect_diagnostics:
        result.final_believed = tuple(p.believed for p in belief.particles)
        result.true_cells = true_cells3


@dataclass(frozen=True)
class PointResult:
    """Aggregate row for one (policy, n_sim, particles) matrix point."""

    policy: str
    obs_model: str
    stage: str
    n_sim: int
    particles: int
    episodes: int
    found: int
    mean_steps: float
    std_steps: float
    mean_time_s: float
    failures: int


def _aggregate(
    policy: str, cfg: ExperimentConfig, n_sim: int, particles: int,
    results: list[EpisodeResult],
) -> PointResult:
    steps = [r.steps for r in results if r.found]
    if steps:
        mean_steps = float(np.mean(steps))
        std_steps = float(np.std(steps))
    else:
        mean_steps = math.nan
        std_steps = math.nan
    mean_time = float(np.mean([r.wall_time for r in results])) if cfg.record_time else 0.0
    found = sum(1 for r in results if r.found)
    return PointResult(
        policy=policy,
        obs_model=cfg.obs_model,
        stage=cfg.stage,
        n_sim=n_sim,
        particles=particles,
        episodes=len(results),
        found=found,
        mean_steps=mean_steps,
        std_steps=std_steps,
        mean_time_s=mean_time,
        failures=len(results) - found,
    )


def _point_configs(cfg: ExperimentConfig) -> list[tuple[str, int, int, ExperimentConfig]]:
    """Resolve the matrix: one resolved config per (policy, n_sim, particles).

    The random baseline ignores the planner axes; its row reports n_sim=0.
    """
    points = []
    for policy in cfg.policy:
        if policy == POLICY_RANDOM:
            k = cfg.particles[0]
            resolved = replace(cfg, policy=(policy,), n_sim=(1,), particles=(k,))
            points.append((policy, 0, k, resolved))
        else:
            for n in cfg.n_sim:
                for k in cfg.particles:
                    resolved = replace(cfg, policy=(policy,), n_sim=(n,), particles=(k,))
                    points.append((policy, n, k, resolved))
    return points


def _episode_task(args: tuple[ExperimentConfig, int, bool]) -> EpisodeResult:
    point_cfg, seed, diagnostics = args
    return run_episode(point_cfg, seed, collect_diagnostics=diagnostics)


def run_many(
    point_cfg: ExperimentConfig,
    seeds: list[int],
    jobs: int = 1,
    collect_diagnostics: bool = False,
) -> list[EpisodeResult]:
    """Run episodes for one matrix point, in order of seed regardless of
    worker count."""
    if jobs <= 1:
        results = [run_episode(point_cfg, s, collect_diagnostics) for s in seeds]
    else:
        tasks = [(point_cfg, s, collect_diagnostics) for s in seeds]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_episode_task, tasks))
    return sorted(results, key=lambda r: r.seed)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[PointResult]:
    """Run the full matrix and aggregate per point.

    Success statistics follow the reporting convention of counting steps over
    successful episodes only; failure counts keep the exclusion auditable.
    """
    seeds = list(range(cfg.episodes))
    rows = []
    for policy, n_sim, particles, point_cfg in _point_configs(cfg):
        results = run_many(point_cfg, seeds, jobs=jobs)
        rows.append(_aggregate(policy, point_cfg, n_sim, particles, results))
    return rows


def write_csv(rows: list[PointResult], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([
                r.policy,
                r.obs_model,
                r.stage,
                r.n_sim,
                r.particles,
                r.episodes,
                r.found,
                f"{r.mean_steps:.6f}",
                f"{r.std_steps:.6f}",
                f"{r.mean_time_s:.6f}",
                r.failures,
            ])


_CONFIG_LIST_KEYS = {"n_sim", "particles", "policy"}
_CONFIG_ALIASES = {"random_walk": POLICY_RANDOM}


def parse_config(text: str) -> ExperimentConfig:
    """Parse line-oriented ``key = value`` text mirroring ExperimentConfig.

    Lists are comma separated; '#' starts a comment; unknown keys are errors.
    """
    from dataclasses import fields as dc_fields

    known = {f.name: f for f in dc_fields(ExperimentConfig)}
    reward_keys = {f.name for f in dc_fields(RewardConfig)}
    values: dict = {}
    reward_values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in reward_keys:
            reward_values[key] = float(value)
            continue
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _convert_config_value(key, value)
    if reward_values:
        values["rewards"] = RewardConfig(**reward_values)
    return ExperimentConfig(**values)


def _convert_config_value(key: str, value: str):
    if key in _CONFIG_LIST_KEYS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if key == "policy":
            return tuple(_CONFIG_ALIASES.get(v, v) for v in items)
        return tuple(int(v) for v in items)
    if key in ("p_noise", "exploration", "discount", "depth_epsilon", "pose_jitter", "pose_dropout"):
        return float(value)
    if key in ("obs_model", "stage", "object_shape", "map_file"):
        return value
    if key == "record_time":
        return value.lower() in ("1", "true", "yes")
    if key == "agent_start":
        x, y = (int(v) for v in value.split(","))
        return (x, y)
    return int(value)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def belief_to_text(belief: BeliefState, width: int, height: int, agent: Cell | None = None) -> str:
    """Text dump of believed object density: one char per cell, darker means
    more particles place the object there."""
    counts = np.zeros((height, width), dtype=np.int64)
    for particle in belief.particles:
        believed = particle.believed
        for cell in believed:
            x, y = cell[0], cell[1]
            counts[y, x] += 1
    ramp = " .:-=+*#%@"
    peak = counts.max() if counts.max() > 0 else 1
    lines = []
    for y in range(height):
        row = []
        for x in range(width):
            if agent is not None and (x, y) == agent:
                row.append("A")
            else:
                row.append(ramp[int(counts[y, x] * (len(ramp) - 1) / peak)])
        lines.append("".join(row))
    return "\n".join(lines)


def map_text(grid: np.ndarray) -> str:
    """Re-export of the map debug renderer for callers of the harness."""
    return map_to_text(grid)
