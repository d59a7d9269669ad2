"""Synthetic two-or-more-cluster Gaussian DAG data for end-to-end checks.

Each cluster gets a sparse random DAG (a uniform random topological
order, then independent edge inclusion), unit conditional variances,
parent coefficients drawn uniformly from [-1, -0.1] union [0.1, 1] and
intercepts uniform on [-b, b].  Larger b separates the cluster means.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import fileio
from .dags import Dag, read_dag_text, write_dag_text
from .wishart import ClusterParams, NodeParams

EQUAL_DAGS = "equal"
DIFFERENT_DAGS = "different"


@dataclass(frozen=True)
class Scenario:
    q: int
    n_k: int
    b: float
    k: int = 2
    edge_prob: float = 0.1
    mode: str = DIFFERENT_DAGS

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if self.n_k < 1:
            raise ValueError("n_k must be at least 1")
        if self.b <= 0:
            raise ValueError("b must be positive")
        if not 0.0 < self.edge_prob < 1.0:
            raise ValueError("edge_prob must lie in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.mode not in (EQUAL_DAGS, DIFFERENT_DAGS):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class GroundTruth:
    scenario: Scenario
    clusters: tuple
    labels: np.ndarray
    X: np.ndarray

    @property
    def dags(self) -> tuple:
        return tuple(cl.dag for cl in self.clusters)


def random_dag(q: int, edge_prob: float, rng) -> Dag:
    """Sparse DAG from a uniform topological order and iid edge slots."""
    order = rng.permutation(q)
    edges = []
    for a in range(q):
        for bpos in range(a + 1, q):
            if rng.random() < edge_prob:
                edges.append((int(order[a]) + 1, int(order[bpos]) + 1))
    return Dag(q, edges)


def _random_cluster(dag: Dag, b: float, rng) -> ClusterParams:
    nodes = []
    for j0 in range(dag.q):
        p = dag.parent_indices(j0).size
        mags = rng.uniform(0.1, 1.0, size=p)
        signs = np.where(rng.random(p) < 0.5, -1.0, 1.0)
        nodes.append(
            NodeParams(
                eta=float(rng.uniform(-b, b)),
                l_col=mags * signs,
                d_jj=1.0,
            )
        )
    return ClusterParams(dag, nodes)


def _sample_rows(cluster: ClusterParams, n: int, rng) -> np.ndarray:
    """Draw rows through the structural equations along a topological order."""
    q = cluster.q
    X = np.empty((n, q))
    eps = rng.standard_normal((n, q)) * np.sqrt(cluster.D)
    for j in cluster.dag.topological_order():
        j0 = j - 1
        pa = cluster.dag.parent_indices(j0)
        X[:, j0] = cluster.eta[j0] - X[:, pa] @ cluster.L[pa, j0] + eps[:, j0]
    return X


def generate(scenario: Scenario, rng) -> GroundTruth:
    """Ground truth draw: DAGs, parameters, labeled and shuffled rows."""
    q = scenario.q
    if scenario.mode == EQUAL_DAGS:
        shared = random_dag(q, scenario.edge_prob, rng)
        dags = [shared] * scenario.k
    else:
        dags = [random_dag(q, scenario.edge_prob, rng) for _ in range(scenario.k)]
    clusters = tuple(_random_cluster(d, scenario.b, rng) for d in dags)
    blocks = [_sample_rows(cl, scenario.n_k, rng) for cl in clusters]
    X = np.vstack(blocks)
    labels = np.repeat(np.arange(1, scenario.k + 1), scenario.n_k)
    perm = rng.permutation(X.shape[0])
    return GroundTruth(
        scenario=scenario, clusters=clusters, labels=labels[perm], X=X[perm]
    )


def save_ground_truth(gt: GroundTruth, outdir) -> None:
    """Write data.csv, labels.csv and a truth/ directory of DAGs and moments."""
    os.makedirs(outdir, exist_ok=True)
    header = ",".join(f"X{j}" for j in range(1, gt.scenario.q + 1))
    fileio.write_matrix(os.path.join(outdir, "data.csv"), gt.X, header=header)
    fileio.write_vector(os.path.join(outdir, "labels.csv"), gt.labels, "%d")
    truth = os.path.join(outdir, "truth")
    os.makedirs(truth, exist_ok=True)
    for k, cl in enumerate(gt.clusters, start=1):
        write_dag_text(cl.dag, os.path.join(truth, f"dag_{k}.txt"))
        fileio.write_matrix(os.path.join(truth, f"omega_{k}.csv"), cl.omega)
        fileio.write_matrix(os.path.join(truth, f"mu_{k}.csv"), cl.mu)
    meta = {
        "q": gt.scenario.q,
        "n_k": gt.scenario.n_k,
        "k": gt.scenario.k,
        "b": gt.scenario.b,
        "edge_prob": gt.scenario.edge_prob,
        "mode": gt.scenario.mode,
    }
    with open(os.path.join(truth, "scenario.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class LoadedTruth:
    dags: tuple
    omegas: tuple
    mus: tuple
    labels: np.ndarray
    meta: dict


def load_ground_truth(outdir) -> LoadedTruth:
    truth = os.path.join(outdir, "truth")
    with open(os.path.join(truth, "scenario.json")) as fh:
        meta = json.load(fh)
    labels = fileio.read_vector(os.path.join(outdir, "labels.csv"), dtype=int)
    dags, omegas, mus = [], [], []
    for k in range(1, meta["k"] + 1):
        dags.append(read_dag_text(os.path.join(truth, f"dag_{k}.txt")))
        omegas.append(fileio.read_matrix(os.path.join(truth, f"omega_{k}.csv")))
        mus.append(fileio.read_matrix(os.path.join(truth, f"mu_{k}.csv")).ravel())
    return LoadedTruth(
        dags=tuple(dags), omegas=tuple(omegas), mus=tuple(mus), labels=labels, meta=meta
    )
