"""Domain-sparsified sampling for k-homogeneous distributions."""

from .core import (
    DomainError,
    EmptySupportError,
    EnumerationSizeError,
    ExplicitDistribution,
    ExternalField,
    SubdivisionMap,
    WeightContractError,
    WeightedFamily,
    apply_external_field,
    complement,
    reindex,
    restrict,
    subdivide,
)
from .rng import RngStream
from .analysis import (
    correlation_matrix,
    enumerate_family,
    exact_marginals,
    exact_transition_matrix,
    ei_tangent_check,
    flc_certificate,
    tv_distance,
)
from .samplers import ChainConfig, choose_t, find_initial_state, intermediate_step, run_chain
from .pipeline import (
    MarginalEstimates,
    SparsifiedSampler,
    count_partition_function,
    estimate_marginals,
    isotropic_transform,
    sparsified_sample,
)

__version__ = "0.1.0"
