from branchenv.model.assumptions import AssumptionReport, validate_model
from branchenv.model.branching_model import (
    BranchingModel,
    ScheduleEntry,
    TailPolicy,
    mean_matrices,
    mean_matrix,
)
from branchenv.model.model_io import dump_model, load_model, model_from_dict, model_to_dict
from branchenv.model.moments import covariance_sequence, mean_sequence, offspring_covariance
from branchenv.model.offspring_law import (
    OffspringLaw,
    pgf_complement,
    pgf_eval,
    pgf_gradient,
    pgf_hessian,
)
from branchenv.model.skip import SkipResult, skip_generations, skip_with_report

__all__ = [
    "AssumptionReport",
    "BranchingModel",
    "OffspringLaw",
    "ScheduleEntry",
    "SkipResult",
    "TailPolicy",
    "covariance_sequence",
    "dump_model",
    "load_model",
    "mean_matrices",
    "mean_matrix",
    "mean_sequence",
    "model_from_dict",
    "model_to_dict",
    "offspring_covariance",
    "pgf_complement",
    "pgf_eval",
    "pgf_gradient",
    "pgf_hessian",
    "skip_generations",
    "skip_with_report",
    "validate_model",
]
