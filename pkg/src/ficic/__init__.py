"""Full-duplex assisted inter-cell interference cancellation (fICIC) for HetNets.

A pico base station that can listen to the macro downlink re-transmits a
phase-aligned copy of it so that the macro interference cancels at its own
users. This package provides the precoder optimizers (single-user closed
form, multi-user dual algorithm, wideband FIR design), the comparison
schemes, independent verification oracles and a Monte Carlo harness.
"""

from .channel import (
    GeometryConfig,
    NarrowbandScenario,
    RfImpairmentParams,
    build_network,
    build_scenario,
    dbm_to_w,
    noise_power_dbm,
    path_loss_db,
    w_to_dbm,
)
from .errors import (
    BranchError,
    DegenerateChannel,
    FicicError,
    InfeasibleTarget,
    NonConvergence,
    NumericalFailure,
    OscillationError,
)
from .multi import FairnessSpec, feasibility_power, solve_sum_rate
from .single import FicicSolution, ficic_optimal, hd_optimal

__version__ = "0.1.0"

__all__ = [
    "GeometryConfig", "NarrowbandScenario", "RfImpairmentParams", "build_network",
    "build_scenario", "dbm_to_w", "w_to_dbm", "noise_power_dbm", "path_loss_db",
    "BranchError", "DegenerateChannel", "FicicError", "InfeasibleTarget",
    "NonConvergence", "NumericalFailure", "OscillationError",
    "FairnessSpec", "feasibility_power", "solve_sum_rate",
    "FicicSolution", "ficic_optimal", "hd_optimal",
]
