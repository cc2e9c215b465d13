"""Radial ground states of the 3D p-Choquard equation.

Two independent solvers (ODE shooting on the Newton-potential system and
scale-invariant gradient descent on the Weinstein quotient) produce the same
normalized profile, and a verification layer checks every structural
identity the solution is supposed to satisfy: Pohozaev balances, decay
rates, the Coulomb-tail asymptote, interpolation-constant optimality, and
symmetric-rearrangement inequalities.
"""

__version__ = "0.1.0"

from .checks import (
    GroundState,
    decay_fit,
    gn_sampling,
    load_ground_state,
    make_ground_state,
    phi_metric,
    pohozaev_report,
    riesz_tail_check,
    strauss_check,
    uniqueness_probe,
    verification_document,
)
from .descent import FlowConfig, flow_ground_state, minimize_weinstein, perturbed_restarts
from .energy import el_residual, hamiltonian_p, normalize_to_EL, weinstein
from .errors import (
    DataFormatError,
    NonConvergence,
    PchoquardError,
    SolverFailure,
    UndefinedFunctional,
    VerificationFailure,
)
from .potential import PotentialProfile, coulomb_form, newton_potential, tail_ratio
from .radial import (
    RadialGrid,
    RadialProfile,
    h1_seminorm,
    integrate,
    lp_norm,
    make_grid,
    resample,
    volume_integral,
)
from .rearrange import rearrangement_report, schwarz_rearrange
from .shooting import ShootingConfig, find_separatrix, solve_ground_state

__all__ = [
    "DataFormatError",
    "FlowConfig",
    "GroundState",
    "NonConvergence",
    "PchoquardError",
    "PotentialProfile",
    "RadialGrid",
    "RadialProfile",
    "ShootingConfig",
    "SolverFailure",
    "UndefinedFunctional",
    "VerificationFailure",
    "__version__",
    "coulomb_form",
    "decay_fit",
    "el_residual",
    "find_separatrix",
    "flow_ground_state",
    "gn_sampling",
    "h1_seminorm",
    "hamiltonian_p",
    "integrate",
    "load_ground_state",
    "lp_norm",
    "make_grid",
    "make_ground_state",
    "minimize_weinstein",
    "newton_potential",
    "normalize_to_EL",
    "perturbed_restarts",
    "phi_metric",
    "pohozaev_report",
    "rearrangement_report",
    "resample",
    "riesz_tail_check",
    "schwarz_rearrange",
    "solve_ground_state",
    "strauss_check",
    "tail_ratio",
    "uniqueness_probe",
    "verification_document",
    "volume_integral",
    "weinstein",
]
