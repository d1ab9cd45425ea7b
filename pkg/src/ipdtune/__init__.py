"""PI tuning for integrating-plus-dead-time processes by spectral-abscissa minimization.

The package builds a compact semi-discrete model of the closed loop, extracts
and refines its dominant poles on the exact transcendental characteristic
function, and searches the PI gain plane for the fastest uniform exponential
decay.  Classical rules (Ziegler-Nichols, SIMC), integral performance indices
(IAE/ITAE), stability margins, and delay-approximation accuracy studies are
included for comparison.
"""

from .model import (
    NORMALIZED_PLANT,
    ComplexPole,
    PiGains,
    PlantParams,
    char_fn,
    char_fn_derivative,
    scale_gains_to_plant,
)
from .semidiscrete import (
    DISTURBANCE,
    TRACKING,
    EigensolverError,
    SemiDiscreteModel,
    SimulationTrace,
    build_model,
    decay_slope,
    dominant_discrete_poles,
    eigenvalues,
    oscillation_count,
    simulate,
    trace_to_csv,
)
from .spectral import (
    NewtonConvergenceError,
    PoleSet,
    dominant_poles,
    map_to_continuous,
    newton_refine,
    root_chain,
    spectral_abscissa,
)
from .tuner import (
    INFEASIBLE_COST,
    DeConfig,
    GainGrid,
    InfeasibleError,
    optimal_ki_sweep,
    stability_grid,
    tune,
)
from .baselines import (
    SIMC_AGGRESSIVE,
    SIMC_CONSERVATIVE,
    TuningResult,
    classical_rules,
    gain_trajectory,
    integral_error,
    integral_index_tune,
    performance_trace,
    simc,
    simc_gains,
    ziegler_nichols,
)
from .frequency import (
    CrossoverError,
    MarginGrid,
    MarginReport,
    loop_magnitude,
    loop_phase,
    loop_response,
    margin_grid,
    margins,
    stability_boundary,
)
from .pade import (
    ALL_METHODS,
    ErrorMap,
    RationalDelay,
    model_error_map,
    pade_closed_loop_poles,
    pade_coeffs,
)

__version__ = "0.1.0"
