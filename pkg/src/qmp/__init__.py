"""Two-qubit time-dependent quantum marginal problems.

Kinematics: assemble and classify joint density-matrix trajectories
compatible with prescribed single-qubit marginal trajectories.
Dynamics: reconstruct the unitary (Hamiltonian) or dissipative (GKSL)
generator realizing a given joint trajectory, certify complete
positivity, and verify round trips by re-integration.
"""

from .qcore import (
    SIGMA,
    DensityMatrix,
    Trajectory,
    cholesky_psd,
    finite_diff,
    partial_trace,
    rk4_integrate,
    spectrum,
    tensor,
    trace_power,
    validate_state,
)
from .bloch import (
    CoherenceVector,
    bloch_invariants,
    correlation_tensor,
    from_coherence,
    invariants_series,
    pauli_decompose,
    to_coherence,
    x_form,
)
from .kinematics import (
    MarginalPair,
    assemble_joint,
    isospectral_test,
    scenario_example1,
    scenario_example2,
    scenario_example3,
    unitarity_test,
    unitary_window,
)
from .unitary_recon import (
    EvolutionSequence,
    eigenframe_decompose,
    hamiltonian_from_evolution,
    iwasawa_decompose,
    orbit_rep,
    reconstruct_evolution,
)
from .dissipative_recon import (
    AffineGenerator,
    KossakowskiMatrix,
    candidate_diagonals,
    cp_check,
    d_from_k,
    fit_diagonal_unital,
    gksl_apply,
    hamiltonian_action,
    integrated_cp_check,
    k_from_d,
    rotate_dissipator,
    roundtrip_verify,
)
from .measures import negativity, partial_transpose, purity

__version__ = "0.1.0"
