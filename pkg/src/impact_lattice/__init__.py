"""Multi-opinion social impact model on a square lattice."""

__version__ = "0.1.0"

from .cluster import (
    ClusterLabeling,
    cluster_size_histogram,
    count_small_clusters,
    label_clusters,
    largest_cluster_fraction,
)
from .core import (
    Agent,
    Configuration,
    ModelParams,
    ParameterError,
    RunResult,
    distance,
    impact,
    impact_matrix,
    init_configuration,
    opinion_probabilities,
    run,
    scaling,
    step,
)
from .kernel import InteractionKernel, KernelMismatchError, build_kernel, impact_field
from .observables import (
    EnsembleStats,
    SustainField,
    ensemble_run,
    empirical_sustain_field,
    sustain_probability_field,
    trend_check,
)
