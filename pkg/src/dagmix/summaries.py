"""Label-invariant posterior summaries and evaluation metrics.

Everything here depends on the trace only through co-clustering
indicators and per-subject cluster DAGs, so relabeling clusters within
any iteration leaves all outputs unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dags import Dag


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise posterior co-clustering probabilities, unit diagonal."""

    values: np.ndarray


@dataclass(frozen=True)
class Partition:
    """Cluster labels, contiguous from 1."""

    labels: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max())


@dataclass(frozen=True)
class DagEstimate:
    """Thresholded edge-probability estimate; dag is None on a cyclic result."""

    dag: Dag | None
    cyclic: bool
    cycle: tuple | None = None
    repaired: bool = False


def partition_from_labels(labels) -> Partition:
    """Wrap arbitrary labels, renumbering by first appearance from 1."""
    labels = np.asarray(labels).ravel()
    out = np.empty(labels.shape[0], dtype=np.int64)
    seen = {}
    for i, lab in enumerate(labels):
        key = lab.item() if hasattr(lab, "item") else lab
        if key not in seen:
            seen[key] = len(seen) + 1
        out[i] = seen[key]
    return Partition(labels=out)


class SimilarityAccumulator:
    """Streaming co-clustering counts over trace records."""

    def __init__(self, n: int):
        self.n = n
        self.count = 0
        self._allocs = []

    def consume(self, rec) -> None:
        self._allocs.append(np.asarray(rec.xi, dtype=np.int64))
        self.count += 1

    def result(self) -> SimilarityMatrix:
        if self.count == 0:
            raise ValueError("no records to summarize")
        counts = _kernels.cocluster_counts(np.stack(self._allocs))
        return SimilarityMatrix(values=counts / self.count)


class EdgeProbabilityAccumulator:
    """Streaming per-subject edge-inclusion counts."""

    def __init__(self, n: int, q: int):
        self.n = n
        self.q = q
        self.count = 0
        self.sums = np.zeros((n, q, q))

    def consume(self, rec) -> None:
        adjs = np.stack([d.adjacency for d in rec.dags]).astype(float)
        self.sums += adjs[np.asarray(rec.xi) - 1]
        self.count += 1

    def result(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no records to summarize")
        return self.sums / self.count


def posterior_similarity(trace) -> SimilarityMatrix:
    """Empirical co-clustering frequency of every subject pair."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    acc = SimilarityAccumulator(trace.n)
    for rec in trace:
        acc.consume(rec)
    return acc.result()


def estimate_partition(sim: SimilarityMatrix, threshold: float = 0.5) -> Partition:
    """Connected components of the thresholded similarity graph.

    Pairs with similarity strictly above the threshold are linked;
    components become clusters labeled by order of first appearance.
    Components are the minimal transitively consistent completion of the
    pairwise rule.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    vals = sim.values
    n = vals.shape[0]
    adj = vals > threshold
    labels = np.zeros(n, dtype=np.int64)
    next_label = 0
    for i in range(n):
        if labels[i]:
            continue
        next_label += 1
        stack = [i]
        labels[i] = next_label
        while stack:
            node = stack.pop()
            for j in np.flatnonzero(adj[node]):
                if not labels[j]:
                    labels[j] = next_label
                    stack.append(int(j))
    return Partition(labels=labels)


def edge_probabilities(trace, subject: int) -> np.ndarray:
    """Posterior edge-inclusion probabilities for one subject (1-based)."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    if not 1 <= subject <= trace.n:
        raise ValueError(f"subject {subject} out of range for n={trace.n}")
    q = trace.q
    sums = np.zeros((q, q))
    for rec in trace:
        sums += rec.dags[int(rec.xi[subject - 1]) - 1].adjacency
    return sums / len(trace)


def _find_cycle(adj) -> tuple:
    """Some directed cycle of a cyclic 0/1 matrix, as 1-based nodes."""
    q = adj.shape[0]
    color = np.zeros(q, dtype=np.int8)
    stack_path = []

    def dfs(node):
        color[node] = 1
        stack_path.append(node)
        for w in np.flatnonzero(adj[node]):
            if color[w] == 1:
                k = stack_path.index(int(w))
                return tuple(x + 1 for x in stack_path[k:])
            if color[w] == 0:
                found = dfs(int(w))
                if found:
                    return found
        color[node] = 2
        stack_path.pop()
        return None

    for start in range(q):
        if color[start] == 0:
            found = dfs(start)
            if found:
                return found
    return ()


def estimate_dag(probs, w: float = 0.5, repair: bool = False) -> DagEstimate:
    """Edge set with inclusion probability strictly above w.

    If the thresholded graph is cyclic the estimate fails and the
    offending cycle is reported.  With repair=True a greedy fallback
    (an extension of the thresholding rule, not part of it) adds edges
    in decreasing probability order, skipping any that would close a
    cycle, and the result is marked repaired.
    """
    probs = np.asarray(probs, dtype=float)
    q = probs.shape[0]
    adj = (probs > w).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    order = _topo_exists(adj)
    if order:
        us, vs = np.nonzero(adj)
        return DagEstimate(
            dag=Dag(q, zip(us + 1, vs + 1)), cyclic=False, cycle=None
        )
    cycle = _find_cycle(adj)
    if not repair:
        return DagEstimate(dag=None, cyclic=True, cycle=cycle)
    picked = np.zeros((q, q), dtype=np.uint8)
    candidates = [(float(probs[u, v]), u, v) for u, v in zip(*np.nonzero(adj))]
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    for _, u, v in candidates:
        picked[u, v] = 1
        if not _topo_exists(picked):
            picked[u, v] = 0
    us, vs = np.nonzero(picked)
    return DagEstimate(
        dag=Dag(q, zip(us + 1, vs + 1)), cyclic=True, cycle=cycle, repaired=True
    )


def _topo_exists(adj) -> bool:
    q = adj.shape[0]
    indeg = adj.sum(axis=0).astype(np.int64)
    removed = np.zeros(q, dtype=bool)
    for _ in range(q):
        ready = np.flatnonzero((indeg == 0) & ~removed)
        if ready.size == 0:
            return False
        j = int(ready[0])
        removed[j] = True
        indeg -= adj[j]
    return True


def _as_labels(c) -> np.ndarray:
    if isinstance(c, Partition):
        return c.labels
    return np.asarray(c).ravel()


def binder_loss(c, c_hat) -> float:
    """Fraction of subject pairs on which the two partitions disagree."""
    a = _as_labels(c)
    b = _as_labels(c_hat)
    if a.shape[0] != b.shape[0]:
        raise ValueError("partitions must have equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two subjects")
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    iu = np.triu_indices(n, k=1)
    disagree = same_a[iu] != same_b[iu]
    return float(disagree.mean())


def variation_of_information(c, c_hat) -> float:
    """Normalized variation of information between two partitions.

    Plug-in entropies with natural logarithms, scaled by log(n) so the
    all-singletons versus all-together contrast scores 1.
    """
    a = _as_labels(c)
    b = _as_labels(c_hat)
    if a.shape[0] != b.shape[0]:
        raise ValueError("partitions must have equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two subjects")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)

    def ent(p):
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())

    nz = joint > 0
    mi = float(
        (joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])).sum()
    )
    return (ent(pa) + ent(pb) - 2.0 * mi) / math.log(n)


def shd(d1: Dag, d2: Dag) -> int:
    """Structural Hamming distance: per-pair insert/delete/flip edits."""
    if d1.q != d2.q:
        raise ValueError("DAGs must have the same number of nodes")
    a1 = d1.adjacency
    a2 = d2.adjacency
    dist = 0
    for u in range(d1.q):
        for v in range(u + 1, d1.q):
            s1 = (int(a1[u, v]), int(a1[v, u]))
            s2 = (int(a2[u, v]), int(a2[v, u]))
            if s1 != s2:
                dist += 1
    return dist
