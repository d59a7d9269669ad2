"""Shared test oracles: exhaustive DAG enumeration and random DAG draws."""

import itertools

import numpy as np

from dagmix.dags import Dag


def enumerate_all_dags(q):
    """Every labeled DAG on q nodes (25 for q=3, 543 for q=4)."""
    pairs = list(itertools.combinations(range(1, q + 1), 2))
    dags = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (u, v), state in zip(pairs, choice):
            if state == 1:
                edges.append((u, v))
            elif state == 2:
                edges.append((v, u))
        try:
            dags.append(Dag(q, edges))
        except ValueError:
            continue
    return dags


def markov_class_key(dag):
    """Equivalence key: same skeleton and same v-structures."""
    return (dag.skeleton(), dag.vstructures())


def random_dag(q, rng, edge_prob=0.4):
    """Random DAG via a random topological order and iid edge slots."""
    order = rng.permutation(q)
    edges = []
    for a in range(q):
        for b in range(a + 1, q):
            if rng.random() < edge_prob:
                edges.append((int(order[a]) + 1, int(order[b]) + 1))
    return Dag(q, edges)


def random_cluster(dag, rng, b=2.0):
    """Random ClusterParams with nonzero coefficients and unit-free scales."""
    from dagmix.wishart import ClusterParams, NodeParams

    nodes = []
    for j0 in range(dag.q):
        p = dag.parent_indices(j0).size
        mags = rng.uniform(0.1, 1.0, size=p)
        signs = np.where(rng.random(p) < 0.5, -1.0, 1.0)
        nodes.append(
            NodeParams(
                eta=float(rng.uniform(-b, b)),
                l_col=mags * signs,
                d_jj=float(rng.uniform(0.3, 2.0)),
            )
        )
    return ClusterParams(dag, nodes)
