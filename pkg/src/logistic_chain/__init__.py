"""Logistic birth-death Markov chain: analysis and exact simulation.

The package provides the chain model (rates, equilibrium, generator), its
exact stationary law in log space, degenerated hypergeometric machinery
with asymptotic regimes, analytic first-passage times with independent
linear-solve oracles, fluid/diffusion scaling limits, and reproducible
event-driven simulators for the chain and the mean-field lattice model.
"""

from .errors import ConvergenceError, DomainError, EventCapError, NotErgodicError
from .limits import (
    ExitTailResult,
    FluidState,
    GaussMoments,
    breiman_nu,
    breiman_nu_inverse,
    clt_moments,
    drift_F,
    fluid_solution,
    ou_exit_tail_check,
    ou_params,
    variance_G,
    z_star,
)
from .model import (
    ChainParams,
    RatePair,
    Variant,
    apply_generator,
    equilibrium_point,
    rate_balance_state,
    rates,
)
from .passage import (
    ExitEstimate,
    ExitInterval,
    Method,
    PassageEstimate,
    RecurrenceEstimate,
    SignedLog,
    exit_split_probability,
    exit_time_oracle,
    hitting_time_oracle,
    hitting_time_oracle_mp,
    log_S,
    log_S_table,
    mean_exit_symmetric,
    mean_passage,
    mean_passage_to_zero,
    mean_step_time,
    psi2,
    recurrence_time_estimate,
    symmetric_delta2,
    symmetric_exit_interval,
)
from .simulation import (
    FirstPassageResult,
    LatticeResult,
    LatticeState,
    LatticeTrajectory,
    StopReason,
    Trajectory,
    occupation_measure,
    read_trajectory,
    replicate_seed,
    sample_first_passage,
    simulate,
    simulate_mean_field_lattice,
    simulate_occupation,
    write_trajectory,
)
from .special import (
    HypergeomValue,
    Regime,
    RegimeTag,
    hypergeom_asymptotic,
    hypergeom_series,
    hypergeom_via_gamma,
    incomplete_gamma_lower,
    log_normal_cdf,
    normal_cdf,
)
from .stationary import (
    StationaryLaw,
    build_stationary,
    euler_maclaurin_log_product,
    ld_rate,
    local_clt_density,
    log_stationary_weight,
    total_variation,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
