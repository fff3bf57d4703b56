"""Control of partially observed systems so that the joint entropy of an
adversary's fixed-interval smoothed trajectory estimate is maximised.

The trajectory entropy decomposes into a sum of per-step filter-based
entropy rewards, which turns concealment into a fully observed stochastic
optimal control problem over the belief state, solved here by grid
dynamic programming (finite-state scenario) and receding-horizon Monte
Carlo rollouts (robot scenario).
"""

from .errors import (
    ConfigMismatchError,
    ConsistencyError,
    CovertCtlError,
    DegenerateMeasurementError,
    ModelValidationError,
    NumericalError,
    SizeGuardError,
)
from .hmm import (
    Belief,
    ControlledHmm,
    DiscreteEmission,
    ScalarGaussianEmission,
    conditional_entropy_of_joint,
    discrete_entropy,
    filter_update,
    hmm_from_json,
    hmm_to_json,
    measurement_likelihood,
    measurement_update,
    predict_joint,
    predict_marginal,
)
from .quadrature import (
    MeasurementQuadrature,
    exact_discrete_quadrature,
    gaussian_cell_quadrature,
    quadrature_for,
)
from .rewards import (
    SmoothedPosteriors,
    StageRewardBreakdown,
    additive_objective_realisation,
    exact_smoother_entropy_enumeration,
    exact_trajectory_entropy,
    expected_additive_objective,
    expected_stage_reward,
    expected_stage_reward_table,
    forward_backward_smoother,
    map_error_rate,
    min_info_gain_stage_reward,
    stage_reward_tilde,
    trajectory_entropy,
)
from .solver import (
    GridPolicy,
    PolicyArtifact,
    SimplexGrid,
    ValueTable,
    backward_induction,
    build_grid,
    policy_lookup,
    project,
    simplex_point_count,
)
from .cloud import CloudScenario, EpisodeRecord, evaluate_policies, run_episode, solve_scenario
from .robot import (
    GaussianBelief,
    RobotEpisode,
    RobotScenario,
    RobotState,
    ekf_predict,
    ekf_update,
    gaussian_entropy,
    range_bearing,
    receding_horizon_control,
    run_navigation,
    trajectory_stats,
    unicycle_step,
    wrap_angle,
)
from .seeding import episode_rng, episode_seed

__version__ = "0.1.0"
