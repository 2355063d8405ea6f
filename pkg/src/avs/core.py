"""Core POMDP contracts: actions, histories, returns, and the black-box
generative environment interface shared by the 2D search and 3D pose stages."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Iterable, Sequence

import numpy as np


class Action(IntEnum):
    """Cardinal one-cell moves. Enum order doubles as the tie-break order."""

    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    @property
    def offset(self) -> tuple[int, int]:
        return _OFFSETS[self]


# (dx, dy) per action; NORTH decreases y.
_OFFSETS = {
    Action.NORTH: (0, -1),
    Action.EAST: (1, 0),
    Action.SOUTH: (0, 1),
    Action.WEST: (-1, 0),
}

ALL_ACTIONS: tuple[Action, ...] = tuple(Action)

# A history is an append-only sequence of completed (action, observation) steps.
History = tuple[tuple[Action, Any], ...]

EMPTY_HISTORY: History = ()


def extend_history(history: History, action: Action, observation: Any) -> History:
    return history + ((action, observation),)


class IllegalActionError(ValueError):
    """An action whose destination is out of bounds or blocked was attempted."""


class NoLegalActionError(RuntimeError):
    """The agent has no legal action (fully enclosed); planning cannot proceed."""


class BeliefContradictionError(RuntimeError):
    """No object placement is consistent with everything observed so far."""


class StageOrderError(RuntimeError):
    """The pose stage was entered before the search stage finished."""


@dataclass(frozen=True, slots=True)
class StepOutcome:
    """One generative-simulator step: (s', o, r) plus the terminal flag of s'."""

    state: Any
    observation: Any
    reward: float
    terminal: bool


@dataclass(frozen=True)
class SolverConfig:
    """Planner knobs.

    ``depth_epsilon`` cuts simulations off once discount**depth falls below it;
    ``max_depth`` caps both tree descent and rollouts. ``seed`` is only used
    when the caller does not hand the planner an explicit RNG.
    """

    num_simulations: int = 50
    num_particles: int = 200
    exploration: float = 25.0
    discount: float = 0.90
    depth_epsilon: float = 0.05
    max_depth: int = 60
    rejection_factor: int = 100  # belief-update budget = factor * num_particles
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.num_simulations < 1:
            raise ValueError("num_simulations must be >= 1")
        if self.num_particles < 1:
            raise ValueError("num_particles must be >= 1")
        if self.exploration < 0:
            raise ValueError("exploration must be >= 0")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not 0.0 < self.depth_epsilon < 1.0:
            raise ValueError("depth_epsilon must lie in (0, 1)")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


def discounted_return(rewards: Sequence[float] | Iterable[float], discount: float) -> float:
    """Sum of rewards discounted from the first element: sum_k discount**k * r_k."""
    if not 0.0 <= discount < 1.0:
        raise ValueError("discount must lie in [0, 1)")
    total = 0.0
    weight = 1.0
    for r in rewards:
        total += weight * r
        weight *= discount
    return total


class GenerativeEnvironment(ABC):
    """Black-box simulator contract used by the planner and the belief filter.

    ``step`` must be a pure function of (state, action, RNG stream): the
    observation it produces may depend only on the input state's own map,
    pose, and believed object cells, never on the ground truth.
    """

    @abstractmethod
    def legal_actions(self, state: Any) -> tuple[Action, ...]:
        """Actions whose destination is in bounds and not blocked, in enum order."""

    @abstractmethod
    def step(self, state: Any, action: Action, rng: np.random.Generator) -> StepOutcome:
        """Simulate one step; raises IllegalActionError for illegal actions."""

    @abstractmethod
    def is_terminal(self, state: Any) -> bool:
        """True when the state's believed object cells are all confirmed."""

    @abstractmethod
    def sample_consistent_state(
        self, known_map: Any, agent: tuple[int, int], rng: np.random.Generator
    ) -> Any:
        """Draw a fresh particle consistent with everything the map records.

        Used for belief reinvigoration; raises BeliefContradictionError when
        no consistent object placement exists.
        """

    def observations_match(self, simulated: Any, real: Any) -> bool:
        """Observation equality used by belief updates (exact by default)."""
        return simulated == real
