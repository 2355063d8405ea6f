"""POMCP planner: UCT search over a history-indexed tree with rollout leaf
estimates, plus the rejection-sampling particle filter for belief updates.

One tree is built per decision and discarded afterwards; nodes are keyed by
the (action, observation) suffix relative to the decision's root history.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Sequence

import numpy as np

from .core import (
    Action,
    GenerativeEnvironment,
    History,
    NoLegalActionError,
    SolverConfig,
)

_NUM_ACTIONS = len(Action)


class TreeNode:
    """Visit count N(h), per-action counts N(ha) and running means V(ha),
    and the particle pool of states that passed through this history."""

    __slots__ = ("visits", "counts", "values", "pool")

    def __init__(self) -> None:
        self.visits = 0
        self.counts = [0] * _NUM_ACTIONS
        self.values = [0.0] * _NUM_ACTIONS
        self.pool: list[Any] = []


class SearchTree:
    """History-suffix keyed node table rooted at the real history."""

    def __init__(self, root_history: History):
        self.root_history = root_history
        self.nodes: dict[tuple, TreeNode] = {}

    def ensure(self, key: tuple) -> TreeNode:
        node = self.nodes.get(key)
        if node is None:
            node = TreeNode()
            self.nodes[key] = node
        return node

    @property
    def root(self) -> TreeNode:
        return self.nodes[()]


class BeliefState:
    """Unweighted particle approximation of the belief; sampling is uniform."""

    def __init__(self, particles: Sequence[Any], num_particles: int | None = None):
        if not particles:
            raise ValueError("belief must hold at least one particle")
        self.particles = list(particles)
        self.num_particles = num_particles if num_particles is not None else len(self.particles)

    def sample(self, rng: np.random.Generator) -> Any:
        return self.particles[int(rng.integers(len(self.particles)))]

    def __len__(self) -> int:
        return len(self.particles)


def uniform_action(legal: Sequence[Action], rng: np.random.Generator) -> Action:
    """Uniform draw over the legal actions (rollout and random-walk policy)."""
    if not legal:
        raise NoLegalActionError("no legal action to choose from")
    return legal[int(rng.integers(len(legal)))]


def uct_select(node: TreeNode, exploration: float, legal: Sequence[Action]) -> Action:
    """UCB1 over legal children: V(ha) + c * sqrt(ln N(h) / N(ha)).

    Unvisited children count as +infinity and are taken first; all ties break
    on the fixed NORTH < EAST < SOUTH < WEST order.
    """
    if not legal:
        raise NoLegalActionError("UCT selection over an empty legal set")
    best: Action | None = None
    best_score = -math.inf
    log_visits = math.log(node.visits) if node.visits > 0 else 0.0
    for action in legal:
        count = node.counts[action]
        if count == 0:
            return action
        score = node.values[action]
        if exploration > 0.0:
            score += exploration * math.sqrt(log_visits / count)
        if score > best_score:
            best = action
            best_score = score
    assert best is not None
    return best


def best_action(node: TreeNode, legal: Sequence[Action]) -> Action:
    """Final decision at the root: argmax of V(ha) over legal actions,
    ties broken by the fixed action order."""
    if not legal:
        raise NoLegalActionError("no legal action at the root")
    best = legal[0]
    best_value = node.values[best]
    for action in legal[1:]:
        if node.values[action] > best_value:
            best = action
            best_value = node.values[action]
    return best


class POMCPPlanner:
    """Online planner bound to one generative environment and one config."""

    def __init__(self, env: GenerativeEnvironment, config: SolverConfig):
        self.env = env
        self.config = config
        self._rng = np.random.default_rng(config.seed)
        # discount**depth, precomputed up to the depth cutoff
        self._gamma_pow = [1.0]
        for _ in range(config.max_depth + 1):
            self._gamma_pow.append(self._gamma_pow[-1] * config.discount)
        self.last_tree: SearchTree | None = None
        self.last_root_returns: list[tuple[Action, float]] = []

    def search(
        self,
        belief: BeliefState | None,
        history: History,
        rng: np.random.Generator | None = None,
        initial_sampler: Callable[[np.random.Generator], Any] | None = None,
    ) -> Action:
        """Run num_simulations simulations from the root and return the action
        with the best mean value among the root's legal actions."""
        rng = rng if rng is not None else self._rng
        cfg = self.config
        if history == () and initial_sampler is not None:
            def draw() -> Any:
                return initial_sampler(rng)
        elif belief is not None and len(belief) > 0:
            def draw() -> Any:
                return belief.sample(rng)
        else:
            raise ValueError("search needs a non-empty belief or an initial-state sampler")

        tree = SearchTree(history)
        root = tree.ensure(())
        legal = self.env.legal_actions(draw())
        if not legal:
            raise NoLegalActionError("agent is blocked: no legal action at the root")

        self.last_root_returns = []
        for _ in range(cfg.num_simulations):
            state = draw()
            before = list(root.counts)
            value = self._simulate(state, (), 0, tree, rng)
            for a in range(_NUM_ACTIONS):
                if root.counts[a] != before[a]:
                    self.last_root_returns.append((Action(a), value))
                    break
        self.last_tree = tree
        return best_action(root, legal)

    def _simulate(
        self, state: Any, key: tuple, depth: int, tree: SearchTree, rng: np.random.Generator
    ) -> float:
        cfg = self.config
        if depth >= cfg.max_depth or self._gamma_pow[depth] < cfg.depth_epsilon:
            return 0.0
        env = self.env
        if env.is_terminal(state):
            return 0.0
        node = tree.nodes.get(key)
        if node is None:
            tree.ensure(key)
            return self._rollout(state, depth, rng)
        legal = env.legal_actions(state)
        if not legal:
            return 0.0
        action = uct_select(node, cfg.exploration, legal)
        outcome = env.step(state, action, rng)
        if outcome.terminal:
            value = outcome.reward
        else:
            child_key = key + (int(action), outcome.observation)
            value = outcome.reward + cfg.discount * self._simulate(
                outcome.state, child_key, depth + 1, tree, rng
            )
        node.pool.append(state)
        node.visits += 1
        count = node.counts[action] + 1
        node.counts[action] = count
        node.values[action] += (value - node.values[action]) / count
        return value

    def _rollout(self, state: Any, depth: int, rng: np.random.Generator) -> float:
        cfg = self.config
        env = self.env
        total = 0.0
        weight = 1.0
        while depth < cfg.max_depth and self._gamma_pow[depth] >= cfg.depth_epsilon:
            if env.is_terminal(state):
                break
            legal = env.legal_actions(state)
            if not legal:
                break
            action = legal[int(rng.integers(len(legal)))]
            outcome = env.step(state, action, rng)
            total += weight * outcome.reward
            weight *= cfg.discount
            depth += 1
            state = outcome.state
            if outcome.terminal:
                break
        return total

    def rollout(self, state: Any, depth: int, rng: np.random.Generator) -> float:
        """Uniform-random playout value from ``state`` at cutoff depth ``depth``."""
        return self._rollout(state, depth, rng)


def reinvigorate(
    env: GenerativeEnvironment,
    known_map: Any,
    agent: tuple[int, int],
    count: int,
    rng: np.random.Generator,
) -> list[Any]:
    """Fresh particles whose believed object placement is uniform over the
    placements the accumulated real map still allows."""
    return [env.sample_consistent_state(known_map, agent, rng) for _ in range(count)]


def update_belief(
    env: GenerativeEnvironment,
    belief: BeliefState,
    action: Action,
    real_obs: Any,
    cfg: SolverConfig,
    rng: np.random.Generator,
    known_map: Any,
    agent: tuple[int, int],
) -> BeliefState:
    """Monte-Carlo belief update: resample particles, simulate the taken
    action, and keep successors whose observation matches the real one.

    When the rejection budget (rejection_factor * num_particles simulator
    calls) runs out, the remaining slots are filled by reinvigoration from
    the accumulated real map, so the belief never comes back empty.
    """
    target = cfg.num_particles
    budget = cfg.rejection_factor * target
    accepted: list[Any] = []
    tries = 0
    while len(accepted) < target and tries < budget:
        tries += 1
        particle = belief.sample(rng)
        outcome = env.step(particle, action, rng)
        if env.observations_match(outcome.observation, real_obs):
            accepted.append(outcome.state)
    if len(accepted) < target:
        accepted.extend(reinvigorate(env, known_map, agent, target - len(accepted), rng))
    return BeliefState(accepted, target)
