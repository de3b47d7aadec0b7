"""Spectral Galerkin simulator and measure laboratory for the stochastic
damped cubic wave equation on the 2-torus."""

__version__ = "0.1.0"

from .besov import (
    besov_norm,
    commutator_ratio,
    commutator_residual,
    dyadic_decomposition,
    holder_norm,
    paraproduct,
    paraproduct_parts,
    state_holder_norm,
)
from .dynamics import (
    FlowConfig,
    NoiseKernel,
    decaying_norm_X,
    evolve,
    evolve_ensemble,
    propagate_linear,
    remainder_w,
)
from .errors import NumericalError
from .functionals import (
    FunctionalReport,
    bracket_h_energy,
    evaluate_functionals,
    gaussian_energy,
    grad_energy,
    grad_hamiltonian,
    hamiltonian,
    interaction_energy,
    script_energy,
    sigma_renorm,
    total_energy,
    wick_square,
)
from .gaussian import (
    MeasureSpec,
    RngStream,
    sample_mu,
    sample_mu_position,
    sample_mu_states,
    split_low_high,
)
from .lab import (
    OBSERVABLES,
    EstimatorReport,
    InvarianceResult,
    KRadiusCheck,
    bd_bound,
    density_derivative_check,
    kr_ensemble,
    kr_membership,
    linear_invariance_test,
    partition_estimate,
    quasi_invariance_scan,
)
from .spectral import (
    PhaseState,
    SpectralField,
    field_from_modes,
    inner_product,
    lp_norm,
    mode_grid,
    read_field_snapshot,
    read_state_snapshot,
    sobolev_norm,
    write_field_snapshot,
    write_state_snapshot,
    zero_field,
)

__all__ = [
    "__version__",
    "NumericalError",
    # spectral
    "SpectralField", "PhaseState", "mode_grid", "zero_field",
    "field_from_modes", "inner_product", "sobolev_norm", "lp_norm",
    "write_field_snapshot", "read_field_snapshot",
    "write_state_snapshot", "read_state_snapshot",
    # gaussian
    "MeasureSpec", "RngStream", "sample_mu", "sample_mu_position",
    "sample_mu_states", "split_low_high",
    # dynamics
    "FlowConfig", "NoiseKernel", "propagate_linear", "evolve",
    "evolve_ensemble", "remainder_w", "decaying_norm_X",
    # functionals
    "FunctionalReport", "evaluate_functionals", "sigma_renorm", "wick_square",
    "hamiltonian", "gaussian_energy", "interaction_energy", "script_energy",
    "total_energy", "grad_hamiltonian", "grad_energy", "bracket_h_energy",
    # besov
    "dyadic_decomposition", "besov_norm", "holder_norm", "state_holder_norm",
    "paraproduct", "paraproduct_parts", "commutator_residual",
    "commutator_ratio",
    # lab
    "EstimatorReport", "KRadiusCheck", "InvarianceResult", "OBSERVABLES",
    "linear_invariance_test", "partition_estimate", "bd_bound",
    "density_derivative_check", "kr_membership", "kr_ensemble",
    "quasi_invariance_scan",
]
