"""Randomized nomination sampling: samplers, estimators, and precision studies
for proportional (reverse) hazard rate models."""

__version__ = "0.1.0"

from .errors import ConvergenceError, RnsError, VisibilityError
from .models import FAMILIES, ModelFamily, get_family
from .sampler import (
    DesignParams,
    RnsDataset,
    RnsObservation,
    Visibility,
    draw_complete,
    draw_complete_imperfect,
    draw_finite_population,
    read_dataset_csv,
    srs_design,
    write_dataset_csv,
)
from .complete import (
    EstimateReport,
    alpha_beta,
    analytic_moments,
    complete_ml,
    general_mml,
    mans_mml,
    mins_closed_form,
    select_closed_form,
    srs_ml,
    unbiased_mml,
)
from .em import (
    EmConfig,
    EmTrace,
    em_type1,
    em_type2,
    em_type3,
    loglik_type1,
    loglik_type2,
    loglik_type3,
)
from .mm import mm_correction, mm_estimate
from .montecarlo import (
    EmPolicy,
    ExperimentSpec,
    PrecisionTable,
    fixed_kp_design,
    paper_rho_presets,
    run_experiment,
)
from .casestudy import (
    PopulationTable,
    load_population_csv,
    run_case_study,
    synth_population,
)

__all__ = [
    "ConvergenceError", "RnsError", "VisibilityError",
    "FAMILIES", "ModelFamily", "get_family",
    "DesignParams", "RnsDataset", "RnsObservation", "Visibility",
    "draw_complete", "draw_complete_imperfect", "draw_finite_population",
    "read_dataset_csv", "srs_design", "write_dataset_csv",
    "EstimateReport", "alpha_beta", "analytic_moments", "complete_ml",
    "general_mml", "mans_mml", "mins_closed_form", "select_closed_form",
    "srs_ml", "unbiased_mml",
    "EmConfig", "EmTrace", "em_type1", "em_type2", "em_type3",
    "loglik_type1", "loglik_type2", "loglik_type3",
    "mm_correction", "mm_estimate",
    "EmPolicy", "ExperimentSpec", "PrecisionTable", "fixed_kp_design",
    "paper_rho_presets", "run_experiment",
    "PopulationTable", "load_population_csv", "run_case_study",
    "synth_population",
    "__version__",
]
