"""Optimal market making: quote solvers and approximations, with tools to simulate and calibrate them."""

from .calibration import IntensityFit, QuoteExposure, fit_exponential_intensity
from .closed_form import (
    approx_coefficient,
    approx_quotes_multi,
    approx_quotes_single,
    comparative_statics,
    exponential_closed_form,
    gamma_matrix,
    symmetric_sqrt,
)
from .errors import (
    BracketingError,
    ConfigError,
    ContractError,
    CurvatureError,
    DomainError,
    GridSizeError,
    IdentifiabilityError,
    IntensityEvaluationError,
    MarketMakingError,
    StepSizeError,
    UnsupportedModelError,
)
from .intensity import (
    HamiltonianContext,
    IntensityModel,
    delta_star,
    hamiltonian,
    hamiltonian_second_at_zero,
    validate_intensity,
)
from .multi_asset import (
    AssetSpec,
    MultiAssetProblem,
    quotes_from_theta_multi,
    solve_theta_multi,
)
from .policies import (
    ClosedFormPolicy,
    ConstantOffsetsPolicy,
    SolvedSurfacePolicy,
    WidenedPolicy,
)
from .simulator import MarketSimConfig, compare_strategies, simulate_paths
from .single_asset import (
    Penalty,
    SingleAssetProblem,
    exponential_oracle,
    quotes_from_theta,
    solve_theta,
    value_function,
)

__version__ = "0.1.0"

__all__ = [
    "AssetSpec",
    "BracketingError",
    "ClosedFormPolicy",
    "ConfigError",
    "ConstantOffsetsPolicy",
    "ContractError",
    "CurvatureError",
    "DomainError",
    "GridSizeError",
    "HamiltonianContext",
    "IdentifiabilityError",
    "IntensityEvaluationError",
    "IntensityFit",
    "IntensityModel",
    "MarketMakingError",
    "MarketSimConfig",
    "MultiAssetProblem",
    "Penalty",
    "QuoteExposure",
    "SingleAssetProblem",
    "SolvedSurfacePolicy",
    "StepSizeError",
    "UnsupportedModelError",
    "WidenedPolicy",
    "approx_coefficient",
    "approx_quotes_multi",
    "approx_quotes_single",
    "comparative_statics",
    "compare_strategies",
    "delta_star",
    "exponential_closed_form",
    "exponential_oracle",
    "fit_exponential_intensity",
    "gamma_matrix",
    "hamiltonian",
    "hamiltonian_second_at_zero",
    "quotes_from_theta",
    "quotes_from_theta_multi",
    "simulate_paths",
    "solve_theta",
    "solve_theta_multi",
    "symmetric_sqrt",
    "validate_intensity",
    "value_function",
]
