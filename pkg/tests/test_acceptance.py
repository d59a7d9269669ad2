"""Acceptance suite.

Each test covers one numbered criterion and prints a PASS line with the
measured quantities (visible with pytest -s; pytest -v shows one line
per criterion either way).  The heavier criteria share a module-scoped
grid of sampler runs.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.special import gammaln, logsumexp
from scipy.stats import chisquare

from dagmix.cli import main
from dagmix.dags import Dag, log_dag_prior
from dagmix.pas import pas_dag_step
from dagmix.scoring import SummaryAccumulator, score_fit
from dagmix.seeding import spawn_rng
from dagmix.simulate import Scenario, generate
from dagmix.slice_sampler import ChainConfig, ChainState, run_chain_streaming, update_alpha0
from dagmix.summaries import (
    SimilarityAccumulator,
    binder_loss,
    estimate_partition,
    partition_from_labels,
    shd,
    variation_of_information,
)
from dagmix.wishart import (
    Hyperparams,
    cluster_from_moments,
    log_likelihood,
    log_marginal_node_for,
)

from helpers import enumerate_all_dags, markov_class_key, random_cluster, random_dag


def _report(num, message):
    print(f"\nACCEPTANCE {num}: PASS - {message}")


# ---------------------------------------------------------------------------
# 1. score equivalence
# ---------------------------------------------------------------------------

def test_criterion_01_score_equivalence():
    rng = np.random.default_rng(101)
    t0 = time.monotonic()
    all_dags = {q: enumerate_all_dags(q) for q in (2, 3, 4)}
    worst = 0.0
    for rep in range(50):
        q = (2, 3, 4)[rep % 3]
        mix = rng.standard_normal((q, q)) * 0.4 + np.eye(q)
        X = rng.standard_normal((20, q)) @ mix
        h = Hyperparams.default(q)
        cache = {}

        def node_score(dag, j):
            key = (j, tuple(dag.parent_indices(j - 1)))
            if key not in cache:
                cache[key] = log_marginal_node_for(X, dag, j, h)
            return cache[key]

        classes = {}
        for dag in all_dags[q]:
            score = sum(node_score(dag, j) for j in range(1, q + 1))
            classes.setdefault(markov_class_key(dag), []).append(score)
        for scores in classes.values():
            worst = max(worst, max(scores) - min(scores))
    elapsed = time.monotonic() - t0
    assert worst < 1e-8
    assert elapsed < 10.0
    _report(1, f"max within-class score spread {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. marginal-likelihood Monte-Carlo oracle
# ---------------------------------------------------------------------------

def _mc_log_marginal(ll_draws):
    lmax = ll_draws.max()
    w = np.exp(ll_draws - lmax)
    se_log = w.std() / math.sqrt(w.size) / w.mean()
    return lmax + math.log(w.mean()), se_log


def test_criterion_02_marginal_likelihood_oracle():
    t0 = time.monotonic()
    n_draw = 10**6
    rng = np.random.default_rng(202)

    # q = 1
    h1 = Hyperparams.default(1)
    X1 = rng.standard_normal((5, 1)) * 1.2 + 0.5
    from dagmix.wishart import log_marginal_dag

    exact1 = log_marginal_dag(X1, Dag(1), h1)
    d = 1.0 / rng.gamma(h1.a_omega / 2.0, 2.0 / h1.U[0, 0], size=n_draw)
    eta = rng.normal(h1.m[0], np.sqrt(d / h1.a_mu))
    x = X1[:, 0]
    ll = (
        -0.5 * 5 * np.log(2 * np.pi * d)
        - 0.5 * ((x[:, None] - eta[None, :]) ** 2).sum(axis=0) / d
    )
    mc1, se1 = _mc_log_marginal(ll)
    z1 = abs(exact1 - mc1) / se1
    assert z1 < 3.0

    # q = 2 with edge 2 -> 1
    q = 2
    h2 = Hyperparams.default(q)
    X2 = rng.standard_normal((5, 2)) @ (np.eye(2) + 0.3)
    exact2 = log_marginal_dag(X2, Dag(2, [(2, 1)]), h2)
    a_child = h2.a_omega + 1 - q + 1
    d1 = 1.0 / rng.gamma(a_child / 2.0, 2.0 / 1.0, size=n_draw)
    l1 = rng.normal(0.0, np.sqrt(d1))
    e1 = rng.normal(0.0, np.sqrt(d1 / h2.a_mu))
    a_orphan = h2.a_omega + 0 - q + 1
    d2 = 1.0 / rng.gamma(a_orphan / 2.0, 2.0 / 1.0, size=n_draw)
    e2 = rng.normal(0.0, np.sqrt(d2 / h2.a_mu))
    r1 = X2[:, 0][:, None] - (e1[None, :] - np.outer(X2[:, 1], l1))
    r2 = X2[:, 1][:, None] - e2[None, :]
    ll2 = (
        -0.5 * 5 * np.log(2 * np.pi * d1)
        - 0.5 * (r1**2).sum(axis=0) / d1
        - 0.5 * 5 * np.log(2 * np.pi * d2)
        - 0.5 * (r2**2).sum(axis=0) / d2
    )
    mc2, se2 = _mc_log_marginal(ll2)
    z2 = abs(exact2 - mc2) / se2
    elapsed = time.monotonic() - t0
    assert z2 < 3.0
    assert elapsed < 60.0
    _report(2, f"q=1 z={z1:.2f}, q=2 z={z2:.2f} (1e6 draws, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 3. PAS stationarity against the enumerated posterior
# ---------------------------------------------------------------------------

def test_criterion_03_pas_stationarity():
    t0 = time.monotonic()
    rng = np.random.default_rng(303)
    n = 30
    x3 = rng.standard_normal(n)
    x2 = 0.7 * x3 + rng.standard_normal(n)
    x1 = -0.6 * x2 + rng.standard_normal(n)
    X = np.column_stack([x1, x2, x3])
    h = Hyperparams.default(3)
    a_pi, b_pi = 1.0, (2 * 3 - 2) / 3.0

    from dagmix.wishart import log_marginal_dag

    dags = enumerate_all_dags(3)
    logp = np.array(
        [log_marginal_dag(X, d, h) + log_dag_prior(d, a_pi, b_pi) for d in dags]
    )
    probs = np.exp(logp - logsumexp(logp))
    index = {d: i for i, d in enumerate(dags)}

    steps = 200_000
    thin = 20
    counts = np.zeros(25)
    state = Dag(3)
    cache = {}
    for step in range(steps):
        move = pas_dag_step(state, X, h, a_pi, b_pi, rng, score_cache=cache)
        if move.accepted:
            state = move.proposed_dag
        if step % thin == thin - 1:
            counts[index[state]] += 1
    total = counts.sum()

    # lump cells whose expected count is too small for the chi-square
    expected = probs * total
    order = np.argsort(expected)
    keep, lump_obs, lump_exp = [], 0.0, 0.0
    for i in order:
        if expected[i] < 5.0:
            lump_obs += counts[i]
            lump_exp += expected[i]
        else:
            keep.append(i)
    obs = [counts[i] for i in keep]
    exp = [expected[i] for i in keep]
    if lump_exp > 0:
        obs.append(lump_obs)
        exp.append(lump_exp)
    obs, exp = np.asarray(obs), np.asarray(exp)
    exp *= obs.sum() / exp.sum()
    stat, p = chisquare(obs, exp)
    elapsed = time.monotonic() - t0
    assert p > 0.01
    assert elapsed < 60.0
    _report(3, f"chi-square p={p:.3f} over {len(obs)} bins, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 4. clustering recovery at desk scale
# ---------------------------------------------------------------------------

def test_criterion_04_clustering_recovery():
    t0 = time.monotonic()
    hits = 0
    results = []
    for rep in range(10):
        gt = generate(
            Scenario(q=10, n_k=100, b=5.0, mode="different"),
            spawn_rng(404, "sim", rep),
        )
        acc = SimilarityAccumulator(gt.X.shape[0])
        cfg = ChainConfig(iterations=10_000, burn_in=2_000)
        run_chain_streaming(gt.X, cfg, spawn_rng(404, "fit", rep), consumers=(acc,))
        est = estimate_partition(acc.result())
        truth = partition_from_labels(gt.labels)
        vi = variation_of_information(truth, est)
        bl = binder_loss(truth, est)
        results.append((vi, bl))
        if vi < 0.1 and bl < 0.05:
            hits += 1
    elapsed = time.monotonic() - t0
    assert hits >= 9, f"only {hits}/10 replicates recovered: {results}"
    _report(
        4,
        f"{hits}/10 replicates with VI<0.1 and BL<0.05 "
        f"(max VI {max(v for v, _ in results):.3f}, {elapsed:.0f}s)",
    )


# ---------------------------------------------------------------------------
# 5 and 6 share a grid of runs
# ---------------------------------------------------------------------------

GRID_B = (1.0, 5.0)
GRID_NK = (50, 100)
GRID_REPS = 3
GRID_MODES = ("dp", "k_group_oracle", "one_group_naive")


@pytest.fixture(scope="module")
def grid_metrics():
    out = {}
    for b, nk, rep in itertools.product(GRID_B, GRID_NK, range(GRID_REPS)):
        gt = generate(
            Scenario(q=10, n_k=nk, b=b, mode="different"),
            spawn_rng(505, "sim", b, nk, rep),
        )
        from dagmix.cli import _truth_in_memory

        truth = _truth_in_memory(gt)
        n = gt.X.shape[0]
        for mode in GRID_MODES:
            pinned = None
            if mode == "one_group_naive":
                pinned = np.ones(n, dtype=np.int64)
            elif mode == "k_group_oracle":
                pinned = truth.labels
            cfg = ChainConfig(iterations=4_000, burn_in=1_000, pinned_labels=pinned)
            acc = SummaryAccumulator(n, 10, response=1)
            run_chain_streaming(
                gt.X, cfg, spawn_rng(505, "fit", b, nk, rep, mode), consumers=(acc,)
            )
            out[(b, nk, rep, mode)] = score_fit(acc.result(), truth)
    return out


def test_criterion_05_structural_learning_ordering(grid_metrics):
    def mean_shd(mode, b=None):
        vals = [
            m["mean_shd"]
            for key, m in grid_metrics.items()
            if key[3] == mode and (b is None or key[0] == b)
        ]
        return float(np.mean(vals))

    oracle = mean_shd("k_group_oracle")
    dp = mean_shd("dp")
    naive = mean_shd("one_group_naive")
    assert oracle <= dp <= naive, (oracle, dp, naive)
    dp_b5 = mean_shd("dp", b=5.0)
    naive_b5 = mean_shd("one_group_naive", b=5.0)
    assert naive_b5 > dp_b5, (dp_b5, naive_b5)
    _report(
        5,
        f"mean SHD oracle {oracle:.2f} <= dp {dp:.2f} <= naive {naive:.2f}; "
        f"at b=5: dp {dp_b5:.2f} < naive {naive_b5:.2f}",
    )


def test_criterion_06_causal_distance_band(grid_metrics):
    def dist(nk):
        vals = [
            m["causal_abs_distance_x100"]
            for key, m in grid_metrics.items()
            if key[3] == "dp" and key[0] == 5.0 and key[1] == nk
        ]
        return float(np.mean(vals))

    d50 = dist(50)
    d100 = dist(100)
    assert math.isfinite(d50) and math.isfinite(d100)
    assert d100 < d50, (d50, d100)
    assert d50 < 10.0 and d100 < 10.0
    _report(6, f"avg |effect error| x100 at b=5: nk=50 -> {d50:.2f}, nk=100 -> {d100:.2f}")


# ---------------------------------------------------------------------------
# 7. concentration-parameter update
# ---------------------------------------------------------------------------

def test_criterion_07_alpha0_update_distribution():
    c, d, K, n = 3.0, 1.0, 2, 100
    rng = np.random.default_rng(707)
    xi = np.concatenate([np.ones(60, dtype=np.int64), np.full(40, 2, dtype=np.int64)])
    clusters = [cluster_from_moments(np.zeros(1), np.eye(1), Dag(1)) for _ in range(2)]
    state = ChainState(
        xi=xi,
        v=np.array([0.5, 0.5]),
        omega_w=np.array([0.5, 0.25]),
        u=np.array([0.1] * 100),
        clusters=clusters,
        alpha0=c / d,
    )
    assert state.k_occupied == K
    draws = np.empty(100_000)
    for i in range(1_000):
        update_alpha0(state, c, d, rng)
    for i in range(draws.size):
        update_alpha0(state, c, d, rng)
        draws[i] = state.alpha0

    # stationary density of the two-step update, by quadrature
    grid = np.linspace(1e-8, 40.0, 200_001)
    log_dens = (
        (c - 1.0) * np.log(grid)
        - d * grid
        + K * np.log(grid)
        + gammaln(grid)
        - gammaln(grid + n)
    )
    dens = np.exp(log_dens - log_dens.max())
    cdf = np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(grid))
    cdf = np.concatenate([[0.0], cdf])
    cdf /= cdf[-1]
    sorted_draws = np.sort(draws)
    theo = np.interp(sorted_draws, grid, cdf)
    emp_hi = np.arange(1, draws.size + 1) / draws.size
    emp_lo = np.arange(0, draws.size) / draws.size
    ks = max(np.abs(emp_hi - theo).max(), np.abs(theo - emp_lo).max())
    assert ks < 0.01
    _report(7, f"KS distance {ks:.4f} over 1e5 draws (K={K}, n={n}, c={c}, d={d})")


# ---------------------------------------------------------------------------
# 8. metric unit values
# ---------------------------------------------------------------------------

def test_criterion_08_metric_unit_values():
    bl = binder_loss([1, 1, 2, 2], [1, 2, 1, 2])
    assert bl == pytest.approx(2 / 3, abs=1e-15)
    vi = variation_of_information([1, 2, 3, 4], [1, 1, 1, 1])
    assert vi == pytest.approx(1.0, abs=1e-12)
    dist = shd(Dag(2, [(1, 2)]), Dag(2, [(2, 1)]))
    assert dist == 1
    _report(8, f"BL=2/3, VI=1, SHD=1 exactly")


# ---------------------------------------------------------------------------
# 9. bench determinism
# ---------------------------------------------------------------------------

def test_criterion_09_bench_determinism(tmp_path):
    import hashlib
    import os

    def digest(root):
        h = hashlib.sha256()
        for base, dirs, files in sorted(os.walk(root)):
            dirs.sort()
            for name in sorted(files):
                path = os.path.join(base, name)
                h.update(os.path.relpath(path, root).encode())
                with open(path, "rb") as fh:
                    h.update(fh.read())
        return h.hexdigest()

    args = [
        "bench",
        "--seed",
        "9",
        "--q",
        "4",
        "--nk-grid",
        "8",
        "--b-grid",
        "5",
        "--replicates",
        "1",
        "--iterations",
        "80",
        "--burn-in",
        "30",
    ]
    main(args + ["--out", str(tmp_path / "run1")])
    main(args + ["--out", str(tmp_path / "run2")])
    d1 = digest(tmp_path / "run1")
    d2 = digest(tmp_path / "run2")
    assert d1 == d2
    _report(9, f"two bench runs byte-identical (tree digest {d1[:12]}...)")


# ---------------------------------------------------------------------------
# 10. likelihood identity
# ---------------------------------------------------------------------------

def test_criterion_10_likelihood_identity():
    rng = np.random.default_rng(1010)
    worst = 0.0
    for _ in range(1000):
        q = int(rng.integers(2, 7))
        dag = random_dag(q, rng)
        cl = random_cluster(dag, rng)
        X = rng.standard_normal((3, q)) + cl.mu
        got = log_likelihood(X, cl)
        sign, logdet = np.linalg.slogdet(cl.omega)
        resid = X - cl.mu
        dense = (
            0.5 * X.shape[0] * logdet
            - 0.5 * X.shape[0] * q * math.log(2 * math.pi)
            - 0.5 * np.einsum("ij,jk,ik->", resid, cl.omega, resid)
        )
        worst = max(worst, abs(got - dense))
    assert worst < 1e-10
    _report(10, f"max |factorized - dense| = {worst:.2e} over 1000 draws")
