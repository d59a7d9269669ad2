"""Dirichlet-process mixtures of Gaussian DAG models.

Fits an infinite mixture whose components are Gaussian models Markov
w.r.t. their own DAGs, yielding posterior clusterings, subject-specific
graph estimates and model-averaged causal effects, plus a simulation
and evaluation harness.
"""

__version__ = "0.1.0"

from .causal import (
    CausalEffectMatrix,
    bma_causal_effects,
    causal_effect,
    post_intervention_mean,
)
from .dags import (
    Dag,
    DagOperator,
    apply_operator,
    enumerate_operators,
    is_acyclic,
    log_dag_prior,
    read_dag_text,
    sample_dag_prior,
    write_dag_text,
)
from .errors import InvalidMoveError, NumericalError, StickLimitError
from .pas import PasMove, pas_dag_step, refresh_params
from .simulate import GroundTruth, Scenario, generate
from .slice_sampler import (
    ChainConfig,
    ChainState,
    Trace,
    run_chain,
    run_chain_streaming,
    stick_weights,
    update_allocations,
    update_alpha0,
    update_cluster_params,
    update_slices_and_sticks,
)
from .summaries import (
    DagEstimate,
    Partition,
    SimilarityMatrix,
    binder_loss,
    edge_probabilities,
    estimate_dag,
    estimate_partition,
    partition_from_labels,
    posterior_similarity,
    shd,
    variation_of_information,
)
from .wishart import (
    ClusterParams,
    Hyperparams,
    NodeParams,
    SuffStats,
    assemble_precision,
    block_hyperparams,
    cluster_from_moments,
    log_likelihood,
    log_marginal_dag,
    log_marginal_node,
    posterior_hyperparams,
    reparameterize,
    row_log_likelihoods,
    sample_node_params,
    suff_stats,
)

__all__ = [name for name in dir() if not name.startswith("_")]
