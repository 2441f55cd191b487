"""Quasi-perfect state transfer in dissipative oscillator networks.

Simulates linear networks of damped harmonic oscillators exchanging
superpositions of multimode coherent states: dissipative generators and
their propagators, exact coherent-state algebra, transfer/recurrence
fidelities, perfect-transfer criteria and exchange-time scaling laws,
plus a truncated-Fock-space master-equation oracle for validation.
"""

__version__ = "0.1.0"

from .coherent import (
    CoherentSuperposition,
    EvolvedState,
    OverlapConsistencyError,
    ReducedState,
    evolve,
    initial_reduced,
    make_cat,
    multimode_overlap,
    reduce_mode,
    reduced_overlap,
)
from .fockoracle import (
    FockDensity,
    StepSizeError,
    encode_coherent,
    fock_overlap,
    lindblad_evolve,
    lindblad_scan,
    partial_trace,
)
from .phases import PHASE_BUDGET, PhasePrecisionWarning, phase_accurate_exp
from .propagator import (
    NearDefectiveError,
    Propagator,
    SpectralDecomposition,
    decompose,
    evolve_amplitudes,
    theta_at,
)
from .scenario import (
    ConfigError,
    Scenario,
    emit_plot_script,
    load_scenario,
    run_scenario,
    run_suite,
)
from .topology import (
    ChainSpec,
    DissipativeGenerator,
    NetworkTopology,
    ScaledParams,
    build_chain,
    build_general,
    build_pst_chain,
    scaled_params,
)
from .transfer import (
    ExchangeReport,
    ExtrapolationWarning,
    NoTransferInWindow,
    PermutationTarget,
    PstCheck,
    RegimeWarning,
    TransferCurve,
    analytic_tau_ex,
    check_pst_target,
    commutator_residual,
    effective_coupling,
    exchange_time_numeric,
    exchange_time_spectral,
    explicit_transfer_probability,
    network_overlap,
    peak_probability,
    perturbative_theta4,
    transfer_curve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
