"""Age-structured metapopulation renewal models."""

from ._core import (
    ConfigError,
    ConsistencyError,
    DegenerateEigenvalue,
    DesignError,
    Error,
    InvalidModel,
    Model,
    MortalityLaw,
    NonConvergence,
    PreconditionError,
    RateFunction,
    ReducibleMatrix,
    StepSizeError,
    StructuralError,
    assemble_R0,
    classify,
    design_two_sink,
    maximal_solution,
    periodic_maximal_solution,
    periodic_R0,
    perturbed_sigma,
    run_cli,
    sigma_bounds,
    solve_renewal,
    theta_lower_bound,
    theta_upper_bound,
    validate,
)

__version__ = "0.1.0"
