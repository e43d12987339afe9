"""nesslab: a finite-chain laboratory for current-carrying steady states.

Builds 1-d lattice models with finite-range translation-invariant
interactions, constructs stationary translation-invariant states with
nonvanishing current on periodic chains, and verifies at desk scale the
operator identities, locality bounds, sum rules and the energy-momentum
spectral singularity they imply.
"""

from .errors import ConfigError, GeometryError, NumericalCheckError, PreconditionError
from .operators import (
    ChainConfig,
    LocalOperator,
    MatrixUnitBasis,
    arc_sites,
    comm_norm,
    commutator,
    embed,
    embed_sparse,
    extract_local,
    kron_le,
    operator_norm,
    product_operator,
    shift_unitary,
    translate,
    translate_global,
)
from .models import (
    ChargeSpec,
    CurrentGeometry,
    Interaction,
    boundary_complements,
    build_fermion_model,
    build_random_interaction,
    build_xx_model,
    build_xxz_model,
    charge_operator,
    check_conservation,
    current_local,
    current_operator,
    energy_current_operators,
    energy_density,
    hamiltonian,
    interaction_from_json,
    interaction_to_json,
    local_hamiltonian,
    lr_velocity,
    total_current,
)
from .dynamics import (
    EvolutionContext,
    LRBoundParams,
    deviation_bound_Z,
    evolve,
    lr_bound,
    lr_scan,
    lr_scan_csv,
    z_norms,
)
from .spectral import (
    CommutatorKernel,
    JointBasis,
    SpectralFunction,
    WindowFunction,
    boundary_commutator_integral,
    correlation_C,
    correlation_kernel,
    joint_spectrum,
    momentum_derivative_check,
    singularity_diagnostic,
    spectral_function_rho,
    sum_rule_check,
    wrap_horizon,
)
from .steady_state import (
    BiasSpec,
    NessReport,
    StationaryState,
    build_biased_gibbs,
    expectation,
    state_summary,
    verify_ness,
)

__version__ = "0.1.0"
