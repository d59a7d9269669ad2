"""Timing comparison of the numba kernels against their numpy fallbacks.

Run with

    python3 benchmarks/kernel_benchmark.py

Setting DAGMIX_NO_NUMBA=1 would disable the numba side entirely, so this
script imports both implementations explicitly and reports per-call
times after a warmup pass.
"""

import time

import numpy as np

from dagmix import _kernels


def _time(fn, *args, repeat=200, warmup=3):
    for _ in range(warmup):
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def _random_adj(q, rng, edge_prob=0.25):
    order = rng.permutation(q)
    adj = np.zeros((q, q), dtype=np.uint8)
    for a in range(q):
        for b in range(a + 1, q):
            if rng.random() < edge_prob:
                adj[order[a], order[b]] = 1
    return adj


def main():
    if not _kernels.HAVE_NUMBA:
        print("numba is unavailable (or disabled); nothing to compare")
        return
    rng = np.random.default_rng(0)
    rows = []

    for q in (10, 20, 40):
        adj = _random_adj(q, rng)
        a = _time(_kernels.enumerate_moves_numpy, adj, repeat=50)
        b = _time(_kernels.enumerate_moves_numba, adj)
        rows.append((f"enumerate_moves q={q}", a, b))

    for n, q in ((200, 10), (1000, 20)):
        X = rng.standard_normal((n, q))
        eta = rng.standard_normal(q)
        L = np.eye(q)
        L[0, 1] = 0.5
        D = rng.uniform(0.5, 2.0, size=q)
        a = _time(_kernels.rows_loglik_numpy, X, eta, L, D)
        b = _time(_kernels.rows_loglik_numba, X, eta, L, D)
        rows.append((f"rows_loglik n={n} q={q}", a, b))

    for t, n in ((500, 100), (2000, 200)):
        allocs = rng.integers(1, 4, size=(t, n)).astype(np.int64)
        a = _time(_kernels.cocluster_counts_numpy, allocs, repeat=5)
        b = _time(_kernels.cocluster_counts_numba, allocs, repeat=5)
        rows.append((f"cocluster T={t} n={n}", a, b))

    q = 10
    adj = np.zeros((q, q), dtype=np.uint8)
    slots = q * (q - 1) // 2
    logp = -0.1 * np.arange(slots + 1.0)
    steps = 60
    u1, u2 = rng.random(steps), rng.random(steps)
    a = _time(_kernels.prior_walk_numpy, adj, steps, logp, True, u1, u2, repeat=20)
    b = _time(_kernels.prior_walk_numba, adj, steps, logp, True, u1, u2)
    rows.append((f"prior_walk q={q} steps={steps}", a, b))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, a, b in rows:
        print(f"{name:<{width}}  {a * 1e6:>8.1f}us  {b * 1e6:>8.1f}us  {a / b:>7.1f}x")


if __name__ == "__main__":
    main()
