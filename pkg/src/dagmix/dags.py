"""Directed acyclic graphs, single-edge move operators and the structure prior.

Nodes are labeled 1..q in the public API (node 1 is the conventional
response for causal queries).  Internally graphs are stored as 0-indexed
uint8 adjacency matrices so they can be handed to the numeric kernels
directly.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import InvalidMoveError

INSERT = "insert"
DELETE = "delete"
REVERSE = "reverse"

_KIND_FROM_CODE = (INSERT, DELETE, REVERSE)
_CODE_FROM_KIND = {INSERT: 0, DELETE: 1, REVERSE: 2}


class DagOperator(NamedTuple):
    """A single-edge move: kind is one of "insert", "delete", "reverse"."""

    kind: str
    edge: tuple[int, int]


def is_acyclic(adjacency) -> bool:
    """True iff the 0/1 adjacency matrix admits a topological order.

    Uses iterative elimination of zero-in-degree nodes.  Raises
    ValueError for a non-square, non-binary or nonzero-diagonal input.
    """
    mat = np.asarray(adjacency)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("adjacency matrix must be square")
    if not np.isin(mat, (0, 1)).all():
        raise ValueError("adjacency matrix must be binary")
    if np.diagonal(mat).any():
        raise ValueError("adjacency matrix must have a zero diagonal")
    return _topological_order(mat.astype(np.uint8)) is not None


def _topological_order(adj):
    """0-based topological order, or None if the graph has a cycle."""
    q = adj.shape[0]
    indeg = adj.sum(axis=0).astype(np.int64)
    removed = np.zeros(q, dtype=bool)
    order = []
    for _ in range(q):
        ready = np.flatnonzero((indeg == 0) & ~removed)
        if ready.size == 0:
            return None
        j = int(ready[0])
        order.append(j)
        removed[j] = True
        indeg -= adj[j]
    return order


class Dag:
    """Immutable DAG on nodes 1..q."""

    __slots__ = ("q", "_adj", "_edges", "_parents0", "_moves")

    def __init__(self, q: int, edges: Iterable[tuple[int, int]] = ()):
        if q < 1:
            raise ValueError("q must be at least 1")
        adj = np.zeros((q, q), dtype=np.uint8)
        for u, v in edges:
            if not (1 <= u <= q and 1 <= v <= q):
                raise ValueError(f"edge ({u}, {v}) out of range for q={q}")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if adj[v - 1, u - 1]:
                raise ValueError(f"edges ({u}, {v}) and ({v}, {u}) both present")
            adj[u - 1, v - 1] = 1
        if _topological_order(adj) is None:
            raise ValueError("edge set contains a directed cycle")
        self.q = q
        self._adj = adj
        self._adj.setflags(write=False)
        self._edges = frozenset(
            (int(u) + 1, int(v) + 1) for u, v in zip(*np.nonzero(adj))
        )
        self._parents0 = tuple(
            np.flatnonzero(adj[:, j]).astype(np.int64) for j in range(q)
        )
        self._moves = None

    @classmethod
    def empty(cls, q: int) -> "Dag":
        return cls(q)

    @classmethod
    def from_adjacency(cls, adjacency) -> "Dag":
        mat = np.asarray(adjacency)
        if not is_acyclic(mat):
            raise ValueError("adjacency matrix contains a directed cycle")
        us, vs = np.nonzero(mat)
        return cls(mat.shape[0], zip(us + 1, vs + 1))

    @property
    def edges(self) -> frozenset:
        return self._edges

    @property
    def adjacency(self) -> np.ndarray:
        """Read-only 0-indexed uint8 adjacency matrix."""
        return self._adj

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self._adj[u - 1, v - 1])

    def parents(self, j: int) -> frozenset:
        """Set of parents of node j (1-indexed)."""
        if not 1 <= j <= self.q:
            raise ValueError(f"node {j} out of range for q={self.q}")
        return frozenset(int(u) + 1 for u in self._parents0[j - 1])

    def parent_indices(self, j0: int) -> np.ndarray:
        """0-based parent index array of 0-based node j0 (sorted)."""
        return self._parents0[j0]

    def topological_order(self) -> tuple:
        """One topological order of the nodes, 1-indexed."""
        return tuple(j + 1 for j in _topological_order(self._adj))

    def skeleton(self) -> frozenset:
        """Undirected edge set as sorted node pairs."""
        return frozenset(tuple(sorted(e)) for e in self._edges)

    def vstructures(self) -> frozenset:
        """Colliders u -> w <- v with u, v non-adjacent, as (u, v, w), u < v."""
        out = set()
        for w0 in range(self.q):
            pa = self._parents0[w0]
            for a in range(len(pa)):
                for b in range(a + 1, len(pa)):
                    u0, v0 = int(pa[a]), int(pa[b])
                    if not (self._adj[u0, v0] or self._adj[v0, u0]):
                        out.add((u0 + 1, v0 + 1, w0 + 1))
        return frozenset(out)

    def moves(self):
        """Cached (kinds, us, vs) arrays of all valid moves (0-based nodes)."""
        if self._moves is None:
            self._moves = _kernels.enumerate_moves(self._adj)
        return self._moves

    def __eq__(self, other):
        return (
            isinstance(other, Dag) and self.q == other.q and self._edges == other._edges
        )

    def __hash__(self):
        return hash((self.q, self._edges))

    def __repr__(self):
        edges = ", ".join(f"{u}->{v}" for u, v in sorted(self._edges))
        return f"Dag(q={self.q}, [{edges}])"


def enumerate_operators(dag: Dag) -> list[DagOperator]:
    """All valid insert, delete and reverse operators for a DAG.

    Validity means the resulting graph is again a DAG with no duplicate
    or reciprocal edges.  Each operator appears exactly once.
    """
    kinds, us, vs = dag.moves()
    return [
        DagOperator(_KIND_FROM_CODE[k], (int(u) + 1, int(v) + 1))
        for k, u, v in zip(kinds, us, vs)
    ]


def _apply_move(dag: Dag, code: int, u0: int, v0: int) -> Dag:
    """Apply a move known to be valid, skipping re-validation."""
    adj = dag._adj.copy()
    if code == 0:
        adj[u0, v0] = 1
    elif code == 1:
        adj[u0, v0] = 0
    else:
        adj[u0, v0] = 0
        adj[v0, u0] = 1
    return _dag_from_valid_adjacency(adj)


def apply_operator(dag: Dag, op: DagOperator) -> Dag:
    """Return the DAG obtained by applying op; the input is unchanged.

    Raises InvalidMoveError if the operator is not valid for this DAG
    (edge missing or present, or the move would create a cycle).
    """
    u, v = op.edge
    if not (1 <= u <= dag.q and 1 <= v <= dag.q) or u == v:
        raise InvalidMoveError(f"edge {op.edge} out of range for q={dag.q}")
    u0, v0 = u - 1, v - 1
    adj = dag._adj
    if op.kind == INSERT:
        if adj[u0, v0] or adj[v0, u0]:
            raise InvalidMoveError(f"cannot insert {u}->{v}: pair already linked")
        if _kernels.transitive_closure(adj)[v0, u0]:
            raise InvalidMoveError(f"inserting {u}->{v} would create a cycle")
    elif op.kind == DELETE:
        if not adj[u0, v0]:
            raise InvalidMoveError(f"cannot delete missing edge {u}->{v}")
    elif op.kind == REVERSE:
        if not adj[u0, v0]:
            raise InvalidMoveError(f"cannot reverse missing edge {u}->{v}")
        stripped = adj.copy()
        stripped[u0, v0] = 0
        if _kernels.transitive_closure(stripped)[u0, v0]:
            raise InvalidMoveError(f"reversing {u}->{v} would create a cycle")
    else:
        raise InvalidMoveError(f"unknown operator kind {op.kind!r}")
    return _apply_move(dag, _CODE_FROM_KIND[op.kind], u0, v0)


def log_dag_prior(dag: Dag, a_pi: float, b_pi: float) -> float:
    """Log prior of a DAG under a beta-binomial prior on its skeleton.

    Each of the q(q-1)/2 undirected slots is included with probability
    pi, pi ~ Beta(a_pi, b_pi) integrated out.  The value depends on the
    edge count only.  The normalizing constant over the DAG space is
    unknown and omitted; it cancels in every ratio the samplers use.
    """
    if a_pi <= 0 or b_pi <= 0:
        raise ValueError("a_pi and b_pi must be positive")
    return log_edge_count_prior(dag.edge_count, dag.q, a_pi, b_pi)


def log_edge_count_prior(n_edges: int, q: int, a_pi: float, b_pi: float) -> float:
    slots = q * (q - 1) / 2.0
    return (
        gammaln(n_edges + a_pi)
        + gammaln(slots - n_edges + b_pi)
        - gammaln(slots + a_pi + b_pi)
        + gammaln(a_pi + b_pi)
        - gammaln(a_pi)
        - gammaln(b_pi)
    )


def _dag_from_valid_adjacency(adj) -> Dag:
    """Build a Dag from an adjacency known to be acyclic, skipping checks."""
    q = adj.shape[0]
    new = Dag.__new__(Dag)
    new.q = q
    new._adj = adj
    adj.setflags(write=False)
    new._edges = frozenset(
        (int(a) + 1, int(b) + 1) for a, b in zip(*np.nonzero(adj))
    )
    new._parents0 = tuple(
        np.flatnonzero(adj[:, j]).astype(np.int64) for j in range(q)
    )
    new._moves = None
    return new


_PRIOR_TABLE_CACHE: dict = {}


def _edge_count_prior_table(q: int, a_pi: float, b_pi: float) -> np.ndarray:
    key = (q, float(a_pi), float(b_pi))
    table = _PRIOR_TABLE_CACHE.get(key)
    if table is None:
        slots = q * (q - 1) // 2
        table = np.array(
            [log_edge_count_prior(s, q, a_pi, b_pi) for s in range(slots + 1)]
        )
        if len(_PRIOR_TABLE_CACHE) > 64:
            _PRIOR_TABLE_CACHE.clear()
        _PRIOR_TABLE_CACHE[key] = table
    return table


def sample_dag_prior(
    q: int,
    steps: int,
    rng: np.random.Generator,
    a_pi: float = 1.0,
    b_pi: float = 1.0,
    exact_proposal_ratio: bool = True,
    start: Dag | None = None,
) -> Dag:
    """Metropolis-Hastings draw from the structure prior over DAGs on q nodes.

    Proposals are uniform over the valid single-edge moves of the
    current graph.  With exact_proposal_ratio the acceptance ratio
    carries the |moves(current)| / |moves(proposed)| correction; without
    it the ratio is approximated by 1.  Returns the state after `steps`
    proposals, starting from `start` (default: the empty DAG).
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if start is not None and start.q != q:
        raise ValueError("start DAG has wrong number of nodes")
    if q == 1:
        return start if start is not None else Dag.empty(q)
    if a_pi <= 0 or b_pi <= 0:
        raise ValueError("a_pi and b_pi must be positive")
    # the walk runs on raw adjacency matrices; the prior depends on the
    # edge count only, so its values come from a precomputed table
    adj = (
        start.adjacency
        if start is not None
        else np.zeros((q, q), dtype=np.uint8)
    )
    out = _kernels.prior_walk(
        adj,
        steps,
        _edge_count_prior_table(q, a_pi, b_pi),
        bool(exact_proposal_ratio),
        rng.random(steps),
        rng.random(steps),
    )
    return _dag_from_valid_adjacency(out)


def write_dag_text(dag: Dag, path) -> None:
    """Write a DAG as a header line "q=<n>" plus one "u v" line per edge."""
    with open(path, "w") as fh:
        fh.write(f"q={dag.q}\n")
        for u, v in sorted(dag.edges):
            fh.write(f"{u} {v}\n")


def read_dag_text(path) -> Dag:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("q="):
            raise ValueError(f"{path}: expected header line 'q=<n>'")
        q = int(header[2:])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    return Dag(q, edges)
