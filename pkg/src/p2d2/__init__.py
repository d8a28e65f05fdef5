"""Proximal primal-dual diffusion (P2D2) for decentralized composite optimization."""

from .analysis import (
    FixedPointReport,
    RateCertificate,
    certificate_for_steps,
    certify,
    fit_linear_rate,
    fixed_point_residual,
    lyapunov_value,
    max_rho,
    nu_rho,
    optimize_nu_rho,
    rate_certificate,
    step_size_defaults,
)
from .model import (
    CostConstants,
    Dataset,
    LogisticCost,
    QuadraticCost,
    estimate_constants,
    gradient,
    partition,
    read_libsvm,
    synthesize_logistic,
    synthesize_quadratic,
)
from .prox import RegularizerSpec, prox, subgradient_witness
from .solver import (
    IterationTrace,
    Problem,
    SolverConfig,
    SolverState,
    extra_solver,
    initial_state,
    ista_oracle,
    p2d2_agent_step,
    p2d2_reference_step,
    p2d2_stacked_step,
    run,
)
from .topology import (
    CombinationMatrix,
    ConsensusMatrix,
    Graph,
    SpectralBounds,
    complete_graph,
    consensus_matrix,
    metropolis_weights,
    path_graph,
    random_connected_graph,
    ring_graph,
    spectral_bounds,
)

__version__ = "0.1.0"
