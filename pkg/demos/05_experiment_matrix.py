"""A miniature experiment matrix, CSV included.

The real studies use 100 episodes per point (see configs/default.cfg and
the acceptance suite); this scaled-down run finishes in about a minute and
writes the same CSV schema that `avs run` and the avs-plot package consume.
"""

from avs.harness import ExperimentConfig, run_experiment, write_csv

cfg = ExperimentConfig(
    grid_width=14,
    grid_height=14,
    n_sim=(4, 25, 100),
    particles=(100,),
    episodes=12,
    policy=("pomcp", "random"),
    max_steps=150,
)

rows = run_experiment(cfg, jobs=2)
write_csv(rows, "mini_matrix.csv")

print(f"{'policy':>8} {'n_sim':>6} {'found':>6} {'mean_steps':>11} {'mean_time_s':>12}")
for r in rows:
    steps = f"{r.mean_steps:.1f}" if r.found else "-"
    print(f"{r.policy:>8} {r.n_sim:>6} {r.found:>4}/{r.episodes} {steps:>11} {r.mean_time_s:>12.3f}")
print()
print("wrote mini_matrix.csv; render it with:")
print("  avs-plot --csv mini_matrix.csv --all --out-dir figures/")
