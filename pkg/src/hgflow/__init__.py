"""Numerical solvers for the hyperbolic gradient flow of graphs.

The flow transports the tangent (slope) field of a graph by the pressureless
Burgers system. This package provides the exact characteristic solution for
convex initial data, a conservative entropy solver for plane curves, the
eigenvalue existence criterion with blow-up estimates, graph reconstruction
with a pinned integration gauge, and long-time decay diagnostics, all behind
a scenario-driven CLI.
"""

from .characteristics import (
    CharacteristicTube,
    CharMap,
    evaluate_solution,
    forward_map,
    invert,
    jacobian,
    sample_field,
)
from .convexity import (
    ConvexityReport,
    Verdict,
    blowup_time_estimate,
    build_v0,
    existence_verdict,
    jacobi_eigenvalues,
)
from .entropy1d import (
    Boundary,
    EntropyState1D,
    FlowTrace,
    ShockRecord,
    ShockTracker,
    decay_profile,
    detect_shocks,
    godunov_flux,
    lax_oleinik,
    step,
    total_variation,
)
from .errors import (
    ContractViolation,
    DomainTooSmallError,
    FlowError,
    NoConvergenceError,
    NonFiniteInputError,
    NonIntegrableFieldError,
    NotCertifiedConvexError,
    ScenarioError,
    SingularMapError,
)
from .grids import (
    GradientFieldSample,
    GraphSample,
    GridN,
    curl_residual,
    fd_gradient,
    line_integrate,
    max_curl_residual,
    mean_value,
)
from .potentials import PotentialFn, fd_hessian, make_builtin
from .reconstruct import (
    FlatteningReport,
    PotentialEvolution,
    evolve_potential,
    flattening_report,
    reconstruct_curve,
    straightening_report,
)

__version__ = "0.1.0"
