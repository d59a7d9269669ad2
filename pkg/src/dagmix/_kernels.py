"""Hot numeric kernels.

Each kernel has a numba @njit implementation and a pure-numpy fallback.
The numpy path is selected when numba is unavailable or when the
environment variable DAGMIX_NO_NUMBA is set to a non-empty value other
than "0".  Both implementations produce identical outputs (same values,
same ordering), which tests/test_kernels.py checks directly, and
benchmarks/kernel_benchmark.py compares their speed.

Adjacency matrices are (q, q) uint8 arrays, entry [u, v] = 1 for an edge
u -> v.  Move kinds are encoded as 0 = insert, 1 = delete, 2 = reverse.
"""

from __future__ import annotations

import math
import os

import numpy as np

_env = os.environ.get("DAGMIX_NO_NUMBA", "").strip()
_DISABLED = _env not in ("", "0")

try:
    if _DISABLED:
        raise ImportError("numba disabled via DAGMIX_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def transitive_closure_numpy(adj):
    """Reachability by directed paths of length >= 1, as a uint8 matrix."""
    reach = adj.astype(bool)
    while True:
        nxt = reach | (reach.astype(np.uint8) @ reach.astype(np.uint8) > 0)
        if (nxt == reach).all():
            return nxt.astype(np.uint8)
        reach = nxt


def _path_exists_numpy(adj, src, dst):
    reach = transitive_closure_numpy(adj)
    return bool(reach[src, dst])


def enumerate_moves_numpy(adj):
    """All valid single-edge moves on a DAG adjacency matrix.

    Returns (kinds, us, vs) int64 arrays listing, in order, every valid
    insert, then every delete, then every reverse, each scanned in
    lexicographic (u, v) order.
    """
    q = adj.shape[0]
    reach = transitive_closure_numpy(adj)
    kinds, us, vs = [], [], []
    for u in range(q):
        for v in range(q):
            if u == v or adj[u, v] or adj[v, u]:
                continue
            # u -> v closes a cycle iff v already reaches u
            if not reach[v, u]:
                kinds.append(0)
                us.append(u)
                vs.append(v)
    for u in range(q):
        for v in range(q):
            if adj[u, v]:
                kinds.append(1)
                us.append(u)
                vs.append(v)
    for u in range(q):
        for v in range(q):
            if not adj[u, v]:
                continue
            # reversal is valid iff no alternative path u ~> v survives
            # once the direct edge is removed
            stripped = adj.copy()
            stripped[u, v] = 0
            if not _path_exists_numpy(stripped, u, v):
                kinds.append(2)
                us.append(u)
                vs.append(v)
    return (
        np.asarray(kinds, dtype=np.int64),
        np.asarray(us, dtype=np.int64),
        np.asarray(vs, dtype=np.int64),
    )


def rows_loglik_numpy(X, eta, L, D):
    """Per-row Gaussian log-density under the structural form.

    Residuals are X @ L - eta with independent N(0, D_j) coordinates.
    """
    E = X @ L - eta
    const = np.sum(np.log(2.0 * np.pi * D))
    return -0.5 * (const + (E * E / D).sum(axis=1))


def cocluster_counts_numpy(allocs):
    """Count, for each pair (i, j), iterations with equal labels."""
    T, n = allocs.shape
    counts = np.zeros((n, n), dtype=np.int64)
    for t in range(T):
        row = allocs[t]
        counts += row[:, None] == row[None, :]
    return counts


def prior_walk_numpy(adj, steps, logp_by_count, exact, u_choice, u_accept):
    """Metropolis walk over DAGs whose log prior depends on edge count.

    Proposals are uniform over valid moves; u_choice and u_accept supply
    the randomness so both implementations trace identical chains.
    Returns the final adjacency matrix.
    """
    adj = adj.copy()
    n_edges = int(adj.sum())
    kinds, us, vs = enumerate_moves_numpy(adj)
    for t in range(steps):
        m = kinds.shape[0]
        i = min(int(u_choice[t] * m), m - 1)
        code, u0, v0 = int(kinds[i]), int(us[i]), int(vs[i])
        prop = adj.copy()
        if code == 0:
            prop[u0, v0] = 1
        elif code == 1:
            prop[u0, v0] = 0
        else:
            prop[u0, v0] = 0
            prop[v0, u0] = 1
        prop_edges = n_edges + (1 if code == 0 else (-1 if code == 1 else 0))
        pk, pu, pv = enumerate_moves_numpy(prop)
        log_r = logp_by_count[prop_edges] - logp_by_count[n_edges]
        if exact:
            log_r += math.log(m) - math.log(pk.shape[0])
        if log_r >= 0 or math.log(max(u_accept[t], 1e-300)) < log_r:
            adj, n_edges = prop, prop_edges
            kinds, us, vs = pk, pu, pv
    return adj


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _closure_nb(adj):
        q = adj.shape[0]
        reach = adj.copy()
        for k in range(q):
            for i in range(q):
                if reach[i, k]:
                    for j in range(q):
                        if reach[k, j]:
                            reach[i, j] = 1
        return reach

    @njit(cache=True)
    def _path_exists_nb(adj, src, dst, skip_u, skip_v):
        q = adj.shape[0]
        visited = np.zeros(q, dtype=np.uint8)
        stack = np.empty(q, dtype=np.int64)
        stack[0] = src
        top = 1
        visited[src] = 1
        while top > 0:
            top -= 1
            node = stack[top]
            for w in range(q):
                if adj[node, w] == 0 or visited[w]:
                    continue
                if node == skip_u and w == skip_v:
                    continue
                if w == dst:
                    return True
                visited[w] = 1
                stack[top] = w
                top += 1
        return False

    @njit(cache=True)
    def _enumerate_moves_nb(adj):
        q = adj.shape[0]
        cap = 2 * q * q
        kinds = np.empty(cap, dtype=np.int64)
        us = np.empty(cap, dtype=np.int64)
        vs = np.empty(cap, dtype=np.int64)
        m = 0
        for u in range(q):
            for v in range(q):
                if u == v or adj[u, v] or adj[v, u]:
                    continue
                if not _path_exists_nb(adj, v, u, -1, -1):
                    kinds[m] = 0
                    us[m] = u
                    vs[m] = v
                    m += 1
        for u in range(q):
            for v in range(q):
                if adj[u, v]:
                    kinds[m] = 1
                    us[m] = u
                    vs[m] = v
                    m += 1
        for u in range(q):
            for v in range(q):
                if adj[u, v] and not _path_exists_nb(adj, u, v, u, v):
                    kinds[m] = 2
                    us[m] = u
                    vs[m] = v
                    m += 1
        return kinds[:m].copy(), us[:m].copy(), vs[:m].copy()

    @njit(cache=True)
    def _rows_loglik_nb(X, eta, L, D):
        n, q = X.shape
        out = np.empty(n)
        const = 0.0
        for j in range(q):
            const += math.log(2.0 * math.pi * D[j])
        for i in range(n):
            acc = 0.0
            for j in range(q):
                e = -eta[j]
                for u in range(q):
                    luj = L[u, j]
                    if luj != 0.0:
                        e += luj * X[i, u]
                acc += e * e / D[j]
            out[i] = -0.5 * (const + acc)
        return out

    @njit(cache=True)
    def _prior_walk_nb(adj, steps, logp_by_count, exact, u_choice, u_accept):
        adj = adj.copy()
        n_edges = 0
        q = adj.shape[0]
        for a in range(q):
            for b in range(q):
                n_edges += adj[a, b]
        kinds, us, vs = _enumerate_moves_nb(adj)
        for t in range(steps):
            m = kinds.shape[0]
            i = int(u_choice[t] * m)
            if i >= m:
                i = m - 1
            code, u0, v0 = kinds[i], us[i], vs[i]
            prop = adj.copy()
            if code == 0:
                prop[u0, v0] = 1
                prop_edges = n_edges + 1
            elif code == 1:
                prop[u0, v0] = 0
                prop_edges = n_edges - 1
            else:
                prop[u0, v0] = 0
                prop[v0, u0] = 1
                prop_edges = n_edges
            pk, pu, pv = _enumerate_moves_nb(prop)
            log_r = logp_by_count[prop_edges] - logp_by_count[n_edges]
            if exact:
                log_r += math.log(m) - math.log(pk.shape[0])
            ua = u_accept[t]
            if ua < 1e-300:
                ua = 1e-300
            if log_r >= 0 or math.log(ua) < log_r:
                adj = prop
                n_edges = prop_edges
                kinds, us, vs = pk, pu, pv
        return adj

    @njit(cache=True)
    def _cocluster_nb(allocs):
        T, n = allocs.shape
        counts = np.zeros((n, n), dtype=np.int64)
        for t in range(T):
            for i in range(n):
                counts[i, i] += 1
                for j in range(i + 1, n):
                    if allocs[t, i] == allocs[t, j]:
                        counts[i, j] += 1
                        counts[j, i] += 1
        return counts

    def transitive_closure_numba(adj):
        return _closure_nb(np.ascontiguousarray(adj, dtype=np.uint8))

    def enumerate_moves_numba(adj):
        return _enumerate_moves_nb(np.ascontiguousarray(adj, dtype=np.uint8))

    def rows_loglik_numba(X, eta, L, D):
        return _rows_loglik_nb(
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(eta, dtype=np.float64),
            np.ascontiguousarray(L, dtype=np.float64),
            np.ascontiguousarray(D, dtype=np.float64),
        )

    def cocluster_counts_numba(allocs):
        return _cocluster_nb(np.ascontiguousarray(allocs, dtype=np.int64))

    def prior_walk_numba(adj, steps, logp_by_count, exact, u_choice, u_accept):
        return _prior_walk_nb(
            np.ascontiguousarray(adj, dtype=np.uint8),
            steps,
            np.ascontiguousarray(logp_by_count, dtype=np.float64),
            exact,
            np.ascontiguousarray(u_choice, dtype=np.float64),
            np.ascontiguousarray(u_accept, dtype=np.float64),
        )


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    IMPL = "numba"
    transitive_closure = transitive_closure_numba
    enumerate_moves = enumerate_moves_numba
    rows_loglik = rows_loglik_numba
    cocluster_counts = cocluster_counts_numba
    prior_walk = prior_walk_numba
else:
    IMPL = "numpy"
    transitive_closure = transitive_closure_numpy
    enumerate_moves = enumerate_moves_numpy
    rows_loglik = rows_loglik_numpy
    cocluster_counts = cocluster_counts_numpy
    prior_walk = prior_walk_numpy
