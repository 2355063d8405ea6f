"""One full 2D search episode with live text rendering.

Prints the agent's accumulated map and the believed-object density every
few steps: '?' cells are unexplored, the density ramp darkens where more
particles place the object, 'A' is the agent.
"""

import numpy as np

from avs.harness import ExperimentConfig, belief_to_text, run_episode
from avs.gridmap import map_to_text

cfg = ExperimentConfig(
    grid_width=14,
    grid_height=14,
    n_sim=(50,),
    particles=(150,),
    episodes=1,
    max_steps=120,
)

frames = []


def watch(stage, step, action, obs, belief, known_map, agent, **kw):
    if step % 5 == 0 or step == 1:
        frames.append((step, action.name, map_to_text(known_map),
                       belief_to_text(belief, cfg.grid_width, cfg.grid_height, agent=agent)))


result = run_episode(cfg, seed=3, on_step=watch)

for step, action, known, density in frames:
    print(f"--- step {step} ({action}) ---")
    for map_row, belief_row in zip(known.splitlines(), density.splitlines()):
        print(f"  {map_row}   {belief_row}")
    print()

print(f"found={result.found} in {result.steps} steps")
