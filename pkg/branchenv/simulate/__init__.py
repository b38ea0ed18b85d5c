from branchenv.simulate.continuous import simulate_ct
from branchenv.simulate.ct_model import (
    CTAssumptionReport,
    CTModel,
    CTPiece,
    ct_model_from_dict,
    ct_model_to_dict,
    load_ct_model,
    validate_ct_model,
)
from branchenv.simulate.discrete import run_ensemble, step_population
from branchenv.simulate.ensemble import Ensemble, PopulationState
from branchenv.simulate.moment_ode import (
    MomentPath,
    moment_ode,
    inverse_mean_integral,
    skeleton_extinction,
    skeleton_mean_matrices,
)
from branchenv.simulate.rng import block_rng
from branchenv.simulate.statistics import (
    ConditionedStats,
    conditioned_stats,
    ensemble_moments,
    ks_exponential,
    martingale_check,
    type_proportions,
)

__all__ = [
    "CTAssumptionReport",
    "CTModel",
    "CTPiece",
    "ConditionedStats",
    "Ensemble",
    "MomentPath",
    "PopulationState",
    "block_rng",
    "conditioned_stats",
    "ct_model_from_dict",
    "ct_model_to_dict",
    "ensemble_moments",
    "ks_exponential",
    "load_ct_model",
    "martingale_check",
    "moment_ode",
    "inverse_mean_integral",
    "run_ensemble",
    "simulate_ct",
    "skeleton_extinction",
    "skeleton_mean_matrices",
    "step_population",
    "type_proportions",
    "validate_ct_model",
]
