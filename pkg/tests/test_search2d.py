"""2D environment tests: legality, observation rendering, the border noise
model, map updates, rewards, terminal detection, and episode soundness."""

import numpy as np
import pytest

from avs.core import Action
from avs.gridmap import BLOCKED, CANDIDATE, EMPTY, OBJECT, OTHER_OBJECT, SHAPES, new_map
from avs.search2d import (
    GroundTruthEnv2D,
    RewardConfig,
    SearchSim2D,
    SearchState2D,
    apply_observation,
    build_random_scene,
    initial_agent_map,
    is_terminal_2d,
    legal_actions_2d,
    make_binary_observation,
    observe_true,
    render_observation,
    reward_2d,
)


def open_map(w=20, h=20):
    return new_map(w, h, fill=CANDIDATE)


def test_legal_actions_corner():
    grid = open_map()
    assert legal_actions_2d(grid, (0, 0)) == (Action.EAST, Action.SOUTH)


def test_legal_actions_enclosed():
    grid = open_map(3, 3)
    for x, y in ((1, 0), (0, 1), (2, 1), (1, 2)):
        grid[y, x] = BLOCKED
    assert legal_actions_2d(grid, (1, 1)) == ()


def test_legal_actions_blocked_east():
    grid = open_map(5, 5)
    grid[2, 3] = BLOCKED
    assert legal_actions_2d(grid, (2, 2)) == (Action.NORTH, Action.SOUTH, Action.WEST)


def test_render_observation_shows_believed_object():
    believed = frozenset({(4, 4), (4, 5), (5, 5)})
    state = SearchState2D(open_map(), (4, 4), believed)
    obs = render_observation(state, (4, 4))
    values = dict(obs.cells())
    assert all(values[c] == OBJECT for c in believed)
    assert values[(3, 3)] == EMPTY


def test_render_observation_believed_outside_view():
    state = SearchState2D(open_map(), (10, 10), frozenset({(0, 0)}))
    obs = render_observation(state, (10, 10))
    assert all(v == EMPTY for _, v in obs.cells())


def test_render_observation_pads_map_edge_with_blocked():
    state = SearchState2D(open_map(), (0, 0), frozenset({(5, 5)}))
    obs = render_observation(state, (0, 0))
    assert obs.value_at(0, 0) == BLOCKED  # off-map corner
    assert obs.value_at(1, 1) == EMPTY  # the agent's own cell
    # CANDIDATE never leaks into an observation
    assert CANDIDATE not in set(obs.values)


def test_render_observation_depends_only_on_footprint():
    state = SearchState2D(open_map(), (10, 10), frozenset({(5, 5)}))
    before = render_observation(state, (10, 10))
    state.grid[0, 0] = OTHER_OBJECT  # far outside the 3x3 window
    after = render_observation(state, (10, 10))
    assert before == after


def _truth_env(true_grid, cells, start=(1, 1), p_noise=0.0):
    return GroundTruthEnv2D(true_grid, start, cells, p_noise=p_noise)


def test_observe_true_noise_free_matches_truth():
    true_grid = new_map(5, 5, fill=EMPTY)
    cells = frozenset({(2, 2), (2, 3), (3, 3)})
    for x, y in cells:
        true_grid[y, x] = OBJECT
    env = _truth_env(true_grid, cells)
    obs = observe_true(env, (2, 2), np.random.default_rng(0))
    values = dict(obs.cells())
    assert values[(2, 2)] == OBJECT and values[(2, 3)] == OBJECT and values[(3, 3)] == OBJECT
    assert values[(1, 1)] == EMPTY


def test_observe_true_certain_flip_reports_phantom_object():
    # p_noise=1 and both in-window neighbors of the upper-left window corner
    # hold object cells, so the corner must report OBJECT over empty truth.
    true_grid = new_map(5, 5, fill=EMPTY)
    cells = frozenset({(1, 0), (1, 1), (0, 1)})
    for x, y in cells:
        true_grid[y, x] = OBJECT
    env = _truth_env(true_grid, cells, p_noise=1.0)
    obs = observe_true(env, (1, 1), np.random.default_rng(0))
    assert true_grid[0, 0] == EMPTY
    assert obs.value_at(0, 0) == OBJECT


def test_observe_true_flip_rate_within_3_sigma():
    # checkerboard of EMPTY / OTHER_OBJECT: any flip is visible because all
    # neighbors differ in value from the cell itself
    true_grid = new_map(9, 9, fill=EMPTY)
    for y in range(9):
        for x in range(9):
            if (x + y) % 2 == 1:
                true_grid[y, x] = OTHER_OBJECT
    env = GroundTruthEnv2D(true_grid, (4, 4), frozenset({(0, 0)}), p_noise=0.1)
    rng = np.random.default_rng(123)
    n = 10000
    clean = observe_true(GroundTruthEnv2D(true_grid, (4, 4), frozenset({(0, 0)})), (4, 4), rng)
    flips = np.zeros(9, dtype=np.int64)
    for _ in range(n):
        noisy = observe_true(env, (4, 4), rng)
        for i in range(9):
            if noisy.values[i] != clean.values[i]:
                flips[i] += 1
    p = 0.1
    sigma = (n * p * (1 - p)) ** 0.5
    center = 4
    assert flips[center] == 0  # the center cell is never corrupted
    for i in range(9):
        if i != center:
            assert abs(flips[i] - n * p) <= 3 * sigma


def test_apply_observation_resolves_candidates():
    state = SearchState2D(open_map(5, 5), (2, 2), frozenset({(4, 4)}))
    obs = render_observation(state, (2, 2))
    updated = apply_observation(state.grid, obs)
    assert int(np.count_nonzero(updated == EMPTY)) == 9
    assert int(np.count_nonzero(updated == CANDIDATE)) == 16


def test_apply_observation_idempotent():
    state = SearchState2D(open_map(5, 5), (2, 2), frozenset({(4, 4)}))
    obs = render_observation(state, (2, 2))
    once = apply_observation(state.grid, obs)
    twice = apply_observation(once, obs)
    assert np.array_equal(once, twice)


def test_apply_observation_writes_object():
    state = SearchState2D(open_map(5, 5), (2, 2), frozenset({(2, 2)}))
    obs = render_observation(state, (2, 2))
    updated = apply_observation(state.grid, obs)
    assert updated[2, 2] == OBJECT


def _transition(grid_before, grid_after, believed, agent=(2, 2)):
    return (
        SearchState2D(grid_before, agent, believed),
        SearchState2D(grid_after, agent, believed),
    )


def test_reward_reobserve_penalty_when_map_unchanged():
    cfg = RewardConfig()
    grid = open_map(5, 5)
    s, t = _transition(grid, grid.copy(), frozenset({(4, 4)}))
    assert reward_2d(s, Action.EAST, t, cfg) == cfg.action_penalty + cfg.reobserve_penalty


def test_reward_counts_resolved_candidates():
    cfg = RewardConfig()
    before = open_map(5, 5)
    after = before.copy()
    for x in range(3):
        after[0, x] = EMPTY
    s, t = _transition(before, after, frozenset({(4, 4)}))
    assert reward_2d(s, Action.NORTH, t, cfg) == cfg.action_penalty + 3 * cfg.exploration_reward


def test_reward_terminal_step():
    cfg = RewardConfig()
    before = open_map(5, 5)
    before[4, 4] = OBJECT
    before[4, 3] = OBJECT
    after = before.copy()
    after[3, 4] = OBJECT  # completes the believed object
    believed = frozenset({(4, 4), (3, 4), (4, 3)})
    s, t = _transition(before, after, believed)
    expected = (
        cfg.action_penalty
        + cfg.terminal_reward
        + cfg.discovery_reward
        + cfg.exploration_reward  # the completed cell was a candidate before
    )
    assert reward_2d(s, Action.SOUTH, t, cfg) == expected


def test_reward_zero_config_is_zero():
    cfg = RewardConfig(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    sim = SearchSim2D(6, 6, SHAPES["L3"], rewards=cfg)
    rng = np.random.default_rng(9)
    true_grid, start, cells = build_random_scene(6, 6, SHAPES["L3"], rng)
    state = SearchState2D(initial_agent_map(true_grid), start, cells)
    for _ in range(20):
        legal = sim.legal_actions(state)
        action = legal[int(rng.integers(len(legal)))]
        out = sim.step(state, action, rng)
        assert out.reward == 0.0
        state = out.state


def test_is_terminal_cases():
    grid = open_map(5, 5)
    believed = frozenset({(1, 1), (1, 2), (2, 2)})
    state = SearchState2D(grid, (0, 0), believed)
    assert not is_terminal_2d(state)  # fresh all-candidate map
    partial = grid.copy()
    partial[1, 1] = OBJECT
    partial[2, 1] = OBJECT
    assert not is_terminal_2d(SearchState2D(partial, (0, 0), believed))
    done = partial.copy()
    done[2, 2] = OBJECT
    assert is_terminal_2d(SearchState2D(done, (0, 0), believed))


def test_binary_observation_cases():
    believed = frozenset({(4, 4), (4, 5), (5, 5)})
    state = SearchState2D(open_map(), (4, 4), believed)
    full = render_observation(state, (4, 4))
    assert make_binary_observation(full, 3)
    partial_state = SearchState2D(open_map(), (3, 4), believed)
    partial = render_observation(partial_state, (3, 4))  # window misses (5, 5)
    assert not make_binary_observation(partial, 3)
    empty = render_observation(SearchState2D(open_map(), (10, 10), believed), (10, 10))
    assert not make_binary_observation(empty, 3)


def test_noise_free_episode_soundness():
    # candidate count never grows, resolved cells match the truth, and a
    # terminal real trajectory pins the true object position
    rng = np.random.default_rng(4)
    true_grid, start, cells = build_random_scene(10, 10, SHAPES["L3"], rng, agent_start=(5, 5))
    env = GroundTruthEnv2D(true_grid, start, cells, p_noise=0.0, max_steps=500)
    known = initial_agent_map(true_grid)
    candidates = int(np.count_nonzero(known == CANDIDATE))
    for _ in range(500):
        legal = legal_actions_2d(known, env.agent)
        action = legal[int(rng.integers(len(legal)))]
        obs = env.real_step(action, rng)
        known = apply_observation(known, obs)
        now = int(np.count_nonzero(known == CANDIDATE))
        assert now <= candidates
        candidates = now
        resolved = known != CANDIDATE
        assert np.array_equal(known[resolved], true_grid[resolved])
    state = SearchState2D(known, env.agent, cells)
    if is_terminal_2d(state):
        observed_objects = {
            (int(x), int(y)) for y, x in zip(*np.nonzero(known == OBJECT))
        }
        assert observed_objects == set(cells)
