"""Structure move with partially analytic acceptance, plus parameter refresh.

One step proposes a single-edge move uniformly among the valid moves of
the current DAG and accepts it with a Metropolis-Hastings ratio in which
the parameters of the affected nodes are integrated out analytically:
only the changed node-conditionals contribute marginal-likelihood terms
(one node for insert/delete, both endpoints for a reversal), multiplied
by the structure-prior ratio and the move-count proposal correction.
After the structure move, all node parameters are redrawn exactly from
their conjugate full conditionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dags import (
    DELETE,
    INSERT,
    REVERSE,
    Dag,
    DagOperator,
    _apply_move,
    log_dag_prior,
)
from .errors import NumericalError
from .wishart import (
    ClusterParams,
    Hyperparams,
    log_marginal_node_for,
    posterior_hyperparams,
    sample_node_params,
    suff_stats,
)

_KIND_FROM_CODE = (INSERT, DELETE, REVERSE)


@dataclass(frozen=True)
class PasMove:
    """Outcome of one structure step."""

    proposed_dag: Dag
    operator: DagOperator
    log_accept_ratio: float
    accepted: bool
    error: str | None = None


def pas_dag_step(
    current: Dag,
    X_k,
    h: Hyperparams,
    a_pi: float,
    b_pi: float,
    rng: np.random.Generator,
    exact_proposal_ratio: bool = True,
    score_cache: dict | None = None,
) -> PasMove:
    """One Metropolis-Hastings step on the DAG given cluster data X_k.

    The acceptance ratio multiplies the marginal-likelihood ratio of the
    changed node-conditionals, the structure-prior ratio and, when
    exact_proposal_ratio is set, |moves(current)| / |moves(proposed)|.
    A numerical failure in a marginal term rejects the move and flags it
    in the returned PasMove.

    score_cache memoizes node marginals by (node, parent set); it is
    only valid while X_k and h stay fixed, so pass a fresh dict per
    data-and-prior combination.
    """
    X_k = np.asarray(X_k, dtype=float)
    kinds, us, vs = current.moves()
    if len(kinds) == 0:
        raise ValueError("current DAG admits no valid moves")
    i = int(rng.integers(len(kinds)))
    code, u0, v0 = int(kinds[i]), int(us[i]), int(vs[i])
    op = DagOperator(_KIND_FROM_CODE[code], (u0 + 1, v0 + 1))
    proposed = _apply_move(current, code, u0, v0)

    def node_term(dag, j):
        if score_cache is None:
            return log_marginal_node_for(X_k, dag, j, h)
        key = (j, tuple(dag.parent_indices(j - 1)))
        val = score_cache.get(key)
        if val is None:
            val = log_marginal_node_for(X_k, dag, j, h)
            score_cache[key] = val
        return val

    changed = (v0 + 1,) if code != 2 else (v0 + 1, u0 + 1)
    try:
        delta = 0.0
        for j in changed:
            if X_k.shape[0] > 0:
                delta += node_term(proposed, j)
                delta -= node_term(current, j)
    except NumericalError as exc:
        return PasMove(
            proposed_dag=proposed,
            operator=op,
            log_accept_ratio=-math.inf,
            accepted=False,
            error=str(exc),
        )

    log_r = delta + log_dag_prior(proposed, a_pi, b_pi) - log_dag_prior(
        current, a_pi, b_pi
    )
    if exact_proposal_ratio:
        log_r += math.log(len(kinds)) - math.log(len(proposed.moves()[0]))
    accepted = log_r >= 0 or math.log(max(rng.random(), 1e-300)) < log_r
    return PasMove(
        proposed_dag=proposed,
        operator=op,
        log_accept_ratio=float(log_r),
        accepted=bool(accepted),
    )


def refresh_params(
    dag: Dag, X_k, h: Hyperparams, rng: np.random.Generator
) -> ClusterParams:
    """Exact conjugate redraw of all node parameters given dag and data.

    Empty data yields a draw from the prior.  The returned cluster
    carries the derived mean and precision.
    """
    X_k = np.asarray(X_k, dtype=float)
    if X_k.shape[0] == 0:
        h_post = h
    else:
        h_post = posterior_hyperparams(h, suff_stats(X_k, h.m))
    nodes = [
        sample_node_params(dag, j, h_post, rng) for j in range(1, dag.q + 1)
    ]
    return ClusterParams(dag, nodes)
