"""Fine stage: coordinate recovery via alternating LS fits and GA search."""

from .alternate import FineConfig, FineResult, alternate_location_inference
from .ga import GaConfig, GaResult, ga_search, trajectory_log_posterior
from .pathloss import (
    IdentifiabilityReport,
    PropagationFit,
    check_identifiability,
    fit_all_propagation,
    fit_propagation,
)

__all__ = [
    "FineConfig",
    "FineResult",
    "GaConfig",
    "GaResult",
    "IdentifiabilityReport",
    "PropagationFit",
    "alternate_location_inference",
    "check_identifiability",
    "fit_all_propagation",
    "fit_propagation",
    "ga_search",
    "trajectory_log_posterior",
]
