"""Multi-objective RL toolkit: scalarized PPO base policies, local
parameter-space directions from brief retraining, training-free Pareto
front extension along those directions, dominance filtering,
preference-aligned fine-tuning, and front quality metrics."""

from .envs import DualGoal, EnvSpec, EnvState, SpeedEnergy, make_env, scalarize
from .extension import (
    CandidatePolicy,
    DirectionSet,
    LleConfig,
    PipelineResult,
    make_base_weights,
    run_pipeline,
    shift_weight,
)
from .pareto import (
    FrontPoint,
    ParetoArchive,
    dominates,
    expected_utility,
    hypervolume,
    non_dominated_filter,
    sparsity,
)
from .policy import (
    ActorCritic,
    GaussianPolicy,
    MlpSpec,
    ParameterVector,
    ReturnVector,
    act,
    evaluate_returns,
    flatten,
    unflatten,
)
from .ppo import PpoConfig, RolloutBuffer, compute_gae, ppo_update, train
from .distance import Matching, hungarian_distance, hungarian_solve
from .quadratic import (
    ErrorCurve,
    QuadraticObjectiveFamily,
    lipschitz_probe,
    lle_error_curve,
    ppr_delta,
)

__version__ = "0.1.0"

__all__ = [
    "ActorCritic",
    "CandidatePolicy",
    "DirectionSet",
    "DualGoal",
    "EnvSpec",
    "EnvState",
    "ErrorCurve",
    "FrontPoint",
    "GaussianPolicy",
    "LleConfig",
    "Matching",
    "MlpSpec",
    "ParameterVector",
    "ParetoArchive",
    "PipelineResult",
    "PpoConfig",
    "QuadraticObjectiveFamily",
    "ReturnVector",
    "RolloutBuffer",
    "SpeedEnergy",
    "act",
    "compute_gae",
    "dominates",
    "evaluate_returns",
    "expected_utility",
    "flatten",
    "hungarian_distance",
    "hungarian_solve",
    "hypervolume",
    "lipschitz_probe",
    "lle_error_curve",
    "make_base_weights",
    "make_env",
    "non_dominated_filter",
    "ppo_update",
    "ppr_delta",
    "run_pipeline",
    "scalarize",
    "shift_weight",
    "sparsity",
    "train",
    "unflatten",
]
