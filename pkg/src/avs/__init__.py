"""Active object search on grid maps with POMCP planning, a 3D pose
refinement stage, and a seeded experiment harness."""

from .core import (
    Action,
    BeliefContradictionError,
    GenerativeEnvironment,
    IllegalActionError,
    NoLegalActionError,
    SolverConfig,
    StageOrderError,
    StepOutcome,
    discounted_return,
)
from .gridmap import (
    CellValue,
    ObjectShape,
    SHAPES,
    consistent_placements,
    footprint,
    load_map_file,
    load_map_text,
    map_to_text,
    place_object,
)
from .pomcp import (
    BeliefState,
    POMCPPlanner,
    SearchTree,
    TreeNode,
    reinvigorate,
    uct_select,
    uniform_action,
    update_belief,
)
from .pose3d import (
    GroundTruthEnv3D,
    ObservationGrid3D,
    PointCloud,
    SearchSim3D,
    SearchState3D,
    classify_core,
    lift_belief,
    render_pointcloud,
    reward_3d,
    soft_equal,
    voxelize,
)
from .search2d import (
    BinaryObservation,
    GroundTruthEnv2D,
    ObservationGrid2D,
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
from .harness import (
    ExperimentConfig,
    EpisodeResult,
    PointResult,
    run_episode,
    run_experiment,
    random_walk_policy,
    write_csv,
)

__version__ = "0.1.0"
