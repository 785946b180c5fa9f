"""Heisenberg-scaling parameter estimation with multi-channel homodyne detection.

Simulates a single-mode squeezed-coherent probe scattered by a
parameterized passive linear network, with homodyne detection on every
output channel.  Provides exact and asymptotic Fisher information for
the encoded parameter, phase schedules that realize Heisenberg scaling,
and maximum-likelihood Monte-Carlo experiments that verify saturation
of the Cramer-Rao bound.
"""

from .exceptions import (
    ConfigError,
    EstimationFailureError,
    ExperimentFailureError,
    InvalidArgumentError,
    MultihomodyneError,
    SingularMatrixError,
)
from .estimator import (
    CrbExperimentResult,
    EstimationResult,
    OutcomeBatch,
    VarianceSweepResult,
    crb_experiment,
    heisenberg_variance_sweep,
    mle_estimate,
    mle_score,
    mle_score_covariance_only,
    sample_outcomes,
)
from .fisher import (
    AsymptoticCoefficients,
    FisherBreakdown,
    PhaseSchedule,
    ScalingResult,
    asymptotic_fisher,
    determinant_expansion,
    fisher_information,
    fixed_gamma_phases,
    heisenberg_schedule,
    mc_fisher_oracle,
    rho,
    slope_experiment,
    zeta,
)
from .gaussian import (
    GaussianModel,
    ProbeSpec,
    build_model,
    cofactor_matrix,
    covariance_determinant,
    log_pdf,
    model_at,
    model_with_derivatives,
    output_covariance,
    output_mean,
    phase_space_oracle,
)
from .linalg import (
    LowRankDecomposition,
    cholesky_factor,
    cofactor_by_minors,
    lowrank_determinant,
    lu_determinant,
    numerical_rank,
    random_haar_unitary,
    stream_rng,
    wrap_angle,
)
from .network import (
    ChannelDecomposition,
    GeneratorNetwork,
    MachZehnderNetwork,
    ParametrizedNetwork,
    PhaseInMeshNetwork,
    TableNetwork,
    channel_derivatives,
    diagonal_phase_network,
    first_row_decomposition,
    load_network,
    network_from_dict,
    random_generator_network,
    random_phase_network,
)

__version__ = "0.1.0"
