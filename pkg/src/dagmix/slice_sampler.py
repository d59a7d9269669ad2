"""Slice sampler for the Dirichlet-process mixture of Gaussian DAG models.

Each sweep updates, in order, the slice variables and stick-breaking
weights, the cluster allocations, the per-cluster DAGs and parameters,
and the concentration parameter alpha0.  Uniform slice variables make
the infinite mixture conditionally finite: sticks are extended with
fresh Beta(1, alpha0) draws, each paired with a baseline draw of a DAG
and its parameters, until the leftover stick mass falls below the
smallest slice variable, so every allocation candidate is represented.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import fileio
from .dags import Dag, read_dag_text, sample_dag_prior, write_dag_text
from .errors import NumericalError, StickLimitError
from .pas import pas_dag_step, refresh_params
from .wishart import ClusterParams, Hyperparams, row_log_likelihoods


@dataclass
class ChainConfig:
    """Sampler settings; hyper and b_pi default from q when left unset."""

    iterations: int
    burn_in: int = 0
    thin: int = 1
    hyper: Hyperparams | None = None
    a_pi: float = 1.0
    b_pi: float | None = None
    c: float = 3.0
    d: float = 1.0
    exact_proposal_ratio: bool = True
    dag_moves_per_sweep: int = 1
    prior_dag_steps: int = 60
    stick_cap: int | None = None
    init: str = "singletons"
    pinned_labels: np.ndarray | None = None

    def validate(self):
        if self.init not in ("singletons", "single"):
            raise ValueError("init must be 'singletons' or 'single'")
        # iterations == burn_in is allowed and records nothing
        if self.burn_in < 0 or self.iterations < self.burn_in:
            raise ValueError("need iterations >= burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.c <= 0 or self.d <= 0:
            raise ValueError("c and d must be positive")
        if self.a_pi <= 0 or (self.b_pi is not None and self.b_pi <= 0):
            raise ValueError("structure-prior hyperparameters must be positive")
        if self.dag_moves_per_sweep < 0:
            raise ValueError("dag_moves_per_sweep must be nonnegative")
        if self.prior_dag_steps < 1:
            raise ValueError("prior_dag_steps must be at least 1")

    def resolved(self, q: int) -> "ChainConfig":
        """Concrete copy with q-dependent defaults filled in."""
        self.validate()
        hyper = self.hyper if self.hyper is not None else Hyperparams.default(q)
        if hyper.q != q:
            raise ValueError(f"hyperparameters are {hyper.q}-dimensional, data has q={q}")
        b_pi = self.b_pi if self.b_pi is not None else (2.0 * q - 2.0) / 3.0
        pinned = self.pinned_labels
        if pinned is not None:
            pinned = np.asarray(pinned, dtype=np.int64)
        return replace(self, hyper=hyper, b_pi=b_pi, pinned_labels=pinned)


@dataclass
class ChainState:
    """Mutable sampler state.

    xi holds 1-based cluster labels; v, omega_w and clusters stay
    aligned and cover at least k_active = max(xi) entries; u are the
    slice variables with 0 < u_i < omega_w[xi_i].
    """

    xi: np.ndarray
    v: np.ndarray
    omega_w: np.ndarray
    u: np.ndarray
    clusters: list
    alpha0: float
    baseline_flags: list | None = None
    failed_moves: int = 0
    failed_refreshes: int = 0

    def __post_init__(self):
        if self.baseline_flags is None:
            self.baseline_flags = [False] * len(self.clusters)

    @property
    def k_active(self) -> int:
        return int(self.xi.max())

    @property
    def k_occupied(self) -> int:
        return int(np.unique(self.xi).size)


@dataclass(frozen=True)
class TraceRecord:
    xi: np.ndarray
    dags: tuple
    omegas: tuple
    mus: tuple
    alpha0: float
    k_active: int


class Trace:
    """Recorded post-burn-in, thinned sampler output."""

    def __init__(self, records, n, q, burn_in, thin, stats=None):
        self.records = list(records)
        self.n = n
        self.q = q
        self.burn_in = burn_in
        self.thin = thin
        self.stats = dict(stats or {})

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def save(self, outdir) -> None:
        """Persist as a directory of CSV files plus DAG text files.

        alloc.csv has one row of labels per record; alpha0.csv and k.csv
        one value per record; per record t and cluster k the files
        omega_<t>_<k>.csv, mu_<t>_<k>.csv and dag_<t>_<k>.txt hold the
        cluster precision, mean and DAG (t and k are 1-based).
        """
        os.makedirs(outdir, exist_ok=True)
        alloc = np.array([rec.xi for rec in self.records], dtype=np.int64)
        fileio.write_matrix(
            os.path.join(outdir, "alloc.csv"), alloc.reshape(len(self), self.n), "%d"
        )
        fileio.write_vector(
            os.path.join(outdir, "alpha0.csv"), [rec.alpha0 for rec in self.records]
        )
        fileio.write_vector(
            os.path.join(outdir, "k.csv"), [rec.k_active for rec in self.records], "%d"
        )
        for t, rec in enumerate(self.records, start=1):
            for k in range(1, rec.k_active + 1):
                fileio.write_matrix(
                    os.path.join(outdir, f"omega_{t}_{k}.csv"), rec.omegas[k - 1]
                )
                fileio.write_matrix(
                    os.path.join(outdir, f"mu_{t}_{k}.csv"), rec.mus[k - 1]
                )
                write_dag_text(
                    rec.dags[k - 1], os.path.join(outdir, f"dag_{t}_{k}.txt")
                )
        meta = {
            "n": self.n,
            "q": self.q,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "records": len(self),
            "stats": self.stats,
        }
        with open(os.path.join(outdir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, tracedir) -> "Trace":
        with open(os.path.join(tracedir, "meta.json")) as fh:
            meta = json.load(fh)
        alloc = fileio.read_matrix(os.path.join(tracedir, "alloc.csv")).astype(np.int64)
        alphas = fileio.read_vector(os.path.join(tracedir, "alpha0.csv"))
        ks = fileio.read_vector(os.path.join(tracedir, "k.csv"), dtype=int)
        records = []
        for t in range(1, alloc.shape[0] + 1):
            k_active = int(ks[t - 1])
            dags, omegas, mus = [], [], []
            for k in range(1, k_active + 1):
                omegas.append(fileio.read_matrix(os.path.join(tracedir, f"omega_{t}_{k}.csv")))
                mus.append(fileio.read_matrix(os.path.join(tracedir, f"mu_{t}_{k}.csv")).ravel())
                dags.append(read_dag_text(os.path.join(tracedir, f"dag_{t}_{k}.txt")))
            records.append(
                TraceRecord(
                    xi=alloc[t - 1],
                    dags=tuple(dags),
                    omegas=tuple(omegas),
                    mus=tuple(mus),
                    alpha0=float(alphas[t - 1]),
                    k_active=k_active,
                )
            )
        return cls(
            records,
            n=meta["n"],
            q=meta["q"],
            burn_in=meta["burn_in"],
            thin=meta["thin"],
            stats=meta.get("stats"),
        )


def stick_weights(v) -> np.ndarray:
    """Weights omega_k = v_k prod_{h<k} (1 - v_h) of a stick sequence."""
    v = np.asarray(v, dtype=float)
    if v.size and (v.min() <= 0.0 or v.max() >= 1.0):
        raise ValueError("stick values must lie strictly inside (0, 1)")
    omega = v.copy()
    if v.size > 1:
        omega[1:] *= np.cumprod(1.0 - v)[:-1]
    return omega


def draw_baseline_cluster(q: int, cfg: ChainConfig, rng) -> ClusterParams:
    """Fresh draw of a DAG and its parameters from the baseline measure."""
    dag = sample_dag_prior(
        q,
        cfg.prior_dag_steps,
        rng,
        a_pi=cfg.a_pi,
        b_pi=cfg.b_pi,
        exact_proposal_ratio=cfg.exact_proposal_ratio,
    )
    return refresh_params(dag, np.empty((0, q)), cfg.hyper, rng)


def update_slices_and_sticks(state: ChainState, cfg: ChainConfig, rng) -> ChainState:
    """Redraw sticks and slice variables, extending the representation.

    Sticks up to k_active get their Beta(n_k + 1, alpha0 + sum_{h>k} n_h)
    full-conditional draws; beyond-k_active sticks are regenerated as
    Beta(1, alpha0) together with baseline cluster draws until the
    leftover mass drops below the smallest slice variable.  Hitting the
    hard cap raises StickLimitError rather than truncating.
    """
    n = state.xi.shape[0]
    q = state.clusters[0].q
    K = state.k_active
    counts = np.bincount(state.xi, minlength=K + 1)[1:].astype(float)
    above = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
    v = rng.beta(counts + 1.0, state.alpha0 + above)
    v = np.clip(v, 1e-12, 1.0 - 1e-12)
    clusters = state.clusters[:K]
    flags = state.baseline_flags[:K]
    omega = stick_weights(v)
    u = np.maximum(rng.random(n) * omega[state.xi - 1], 1e-300)
    u_min = float(u.min())
    cap = cfg.stick_cap
    if cap is None:
        # headroom beyond the occupied range; hitting it is an error,
        # never a silent truncation
        cap = K + int(10 * math.ceil(state.alpha0 * math.log(max(n, 2)))) + 50
    vs = list(v)
    tail = float(np.prod(1.0 - v))
    while tail >= u_min:
        if len(vs) >= cap:
            raise StickLimitError(
                f"stick representation exceeded the cap of {cap} components"
            )
        vk = float(np.clip(rng.beta(1.0, state.alpha0), 1e-12, 1.0 - 1e-12))
        vs.append(vk)
        clusters.append(draw_baseline_cluster(q, cfg, rng))
        flags.append(True)
        tail *= 1.0 - vk
    state.v = np.asarray(vs)
    state.omega_w = stick_weights(state.v)
    state.u = u
    state.clusters = clusters
    state.baseline_flags = flags
    return state


def update_allocations(state: ChainState, X, rng) -> ChainState:
    """Redraw each allocation from its slice-restricted categorical.

    Candidates for subject i are the represented clusters with
    omega_k > u_i; among them the probability is proportional to the
    row likelihood.  Sampling uses the Gumbel-max trick.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    k_rep = state.v.shape[0]
    loglik = np.empty((n, k_rep))
    for k0, cl in enumerate(state.clusters):
        loglik[:, k0] = row_log_likelihoods(X, cl)
    mask = state.omega_w[None, :] > state.u[:, None]
    if not mask.any(axis=1).all():
        raise RuntimeError("empty allocation candidate set; sticks not extended")
    scores = np.where(mask, loglik + rng.gumbel(size=(n, k_rep)), -np.inf)
    state.xi = (scores.argmax(axis=1) + 1).astype(np.int64)
    return state


def update_cluster_params(state: ChainState, X, cfg: ChainConfig, rng) -> ChainState:
    """Per-cluster DAG moves and exact parameter refresh.

    Occupied clusters get dag_moves_per_sweep structure steps followed
    by a conjugate parameter redraw from their data; a represented but
    empty cluster gets one fresh baseline draw when it empties and is
    then left untouched while it stays empty (the identity update
    preserves its baseline full conditional).  A numerical failure
    leaves the previous cluster parameters in place and is counted.
    Clusters beyond k_active are dropped (they are regenerated on
    demand by the next stick extension).
    """
    X = np.asarray(X, dtype=float)
    q = X.shape[1]
    K = state.k_active
    for k in range(1, K + 1):
        rows = X[state.xi == k]
        if rows.shape[0] == 0:
            if not state.baseline_flags[k - 1]:
                state.clusters[k - 1] = draw_baseline_cluster(q, cfg, rng)
                state.baseline_flags[k - 1] = True
            continue
        dag = state.clusters[k - 1].dag
        if q > 1:
            cache = {} if cfg.dag_moves_per_sweep > 1 else None
            for _ in range(cfg.dag_moves_per_sweep):
                move = pas_dag_step(
                    dag,
                    rows,
                    cfg.hyper,
                    cfg.a_pi,
                    cfg.b_pi,
                    rng,
                    exact_proposal_ratio=cfg.exact_proposal_ratio,
                    score_cache=cache,
                )
                if move.error is not None:
                    state.failed_moves += 1
                elif move.accepted:
                    dag = move.proposed_dag
        try:
            state.clusters[k - 1] = refresh_params(dag, rows, cfg.hyper, rng)
            state.baseline_flags[k - 1] = False
        except NumericalError:
            state.failed_refreshes += 1
    del state.clusters[K:]
    del state.baseline_flags[K:]
    state.v = state.v[:K]
    state.omega_w = state.omega_w[:K]
    return state


def alpha0_mixture_weight(c: float, d: float, K: int, n: int, eta: float) -> float:
    """Weight of the larger-shape gamma component in the alpha0 update."""
    ratio = (c + K - 1.0) / (n * (d - math.log(eta)))
    return ratio / (1.0 + ratio)


def update_alpha0(state: ChainState, c: float, d: float, rng) -> ChainState:
    """Concentration update via the auxiliary-beta two-gamma mixture.

    Draws eta ~ Beta(alpha0 + 1, n), then alpha0 from a mixture of
    Gamma(c + K, d - log eta) and Gamma(c + K - 1, d - log eta) where K
    is the number of occupied clusters and the mixture odds are
    (c + K - 1) / (n (d - log eta)).
    """
    n = state.xi.shape[0]
    K = state.k_occupied
    eta = float(np.clip(rng.beta(state.alpha0 + 1.0, n), 1e-15, 1.0 - 1e-15))
    rate = d - math.log(eta)
    g = alpha0_mixture_weight(c, d, K, n, eta)
    shape = c + K if rng.random() < g else c + K - 1.0
    state.alpha0 = float(rng.gamma(shape, 1.0 / rate))
    return state


def _relabel_contiguous(labels) -> np.ndarray:
    labels = np.asarray(labels).ravel()
    out = np.empty(labels.shape[0], dtype=np.int64)
    seen = {}
    for i, lab in enumerate(labels):
        key = lab.item() if hasattr(lab, "item") else lab
        if key not in seen:
            seen[key] = len(seen) + 1
        out[i] = seen[key]
    return out


def init_state(X, cfg: ChainConfig, rng) -> ChainState:
    """Initial state with alpha0 at its prior mean c/d.

    The default start is one cluster per subject, each with parameters
    drawn from the posterior of its own row under the empty DAG; the
    sampler consolidates these quickly.  init="single" starts instead
    from one all-inclusive cluster (a collapsed start escapes it very
    slowly when clusters are well separated).  Pinned labels fix the
    partition outright (benchmark modes).
    """
    X = np.asarray(X, dtype=float)
    n, q = X.shape
    empty = Dag.empty(q)
    if cfg.pinned_labels is not None:
        if cfg.pinned_labels.shape[0] != n:
            raise ValueError("pinned labels length must match the data")
        xi = _relabel_contiguous(cfg.pinned_labels)
    elif cfg.init == "single":
        xi = np.ones(n, dtype=np.int64)
    else:
        xi = np.arange(1, n + 1, dtype=np.int64)
    K = int(xi.max())
    clusters = [
        refresh_params(empty, X[xi == k], cfg.hyper, rng) for k in range(1, K + 1)
    ]
    v = np.full(K, 0.5)
    omega = stick_weights(v)
    u = np.maximum(omega[xi - 1] / 2.0, 1e-300)
    return ChainState(
        xi=xi, v=v, omega_w=omega, u=u, clusters=clusters, alpha0=cfg.c / cfg.d
    )


def run_chain_streaming(X, config: ChainConfig, rng, consumers=()) -> dict:
    """Run the sweep loop, passing each retained record to the consumers.

    Returns run statistics.  Used directly when full traces would be too
    large to keep; run_chain wraps it with a collector.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("X must be a nonempty (n, q) matrix")
    if not np.isfinite(X).all():
        raise ValueError("X must be finite")
    cfg = config.resolved(X.shape[1])
    state = init_state(X, cfg, rng)
    pinned = cfg.pinned_labels is not None
    recorded = 0
    for t in range(1, cfg.iterations + 1):
        if not pinned:
            update_slices_and_sticks(state, cfg, rng)
            update_allocations(state, X, rng)
        update_cluster_params(state, X, cfg, rng)
        if not pinned:
            update_alpha0(state, cfg.c, cfg.d, rng)
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            rec = TraceRecord(
                xi=state.xi.copy(),
                dags=tuple(cl.dag for cl in state.clusters),
                omegas=tuple(cl.omega for cl in state.clusters),
                mus=tuple(cl.mu for cl in state.clusters),
                alpha0=state.alpha0,
                k_active=state.k_active,
            )
            for consumer in consumers:
                consumer.consume(rec)
            recorded += 1
    return {
        "recorded": recorded,
        "failed_moves": state.failed_moves,
        "failed_refreshes": state.failed_refreshes,
        "final_alpha0": state.alpha0,
        "final_k": state.k_occupied,
    }


class TraceCollector:
    def __init__(self):
        self.records = []

    def consume(self, rec: TraceRecord) -> None:
        self.records.append(rec)


def run_chain(X, config: ChainConfig, rng) -> Trace:
    """Run the sampler and return the recorded trace.

    The sweep order is slices and sticks, allocations, cluster DAGs and
    parameters, then alpha0; records are kept after burn-in at the
    thinning stride.  Deterministic given the rng.
    """
    X = np.asarray(X, dtype=float)
    collector = TraceCollector()
    stats = run_chain_streaming(X, config, rng, consumers=(collector,))
    return Trace(
        collector.records,
        n=X.shape[0],
        q=X.shape[1],
        burn_in=config.burn_in,
        thin=config.thin,
        stats=stats,
    )
