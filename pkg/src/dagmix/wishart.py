"""Gaussian DAG models with a conjugate Normal-DAG-Wishart prior.

A q-variate Gaussian N(mu, Omega^-1) whose precision Omega is Markov
w.r.t. a DAG is reparameterized node by node into (eta_j, L_col_j, D_jj)
with

    D_jj   = Sigma_jj - Sigma_{j,pa} Sigma_{pa,pa}^-1 Sigma_{pa,j}
    L_col  = -Sigma_{pa,pa}^-1 Sigma_{pa,j}
    eta_j  = mu_j + L_col^T mu_pa

so that the density factorizes into univariate regressions
x_j ~ N(eta_j - L_col^T x_pa, D_jj) and Omega = L D^-1 L^T, where L is
the identity plus the L_col entries in column j, parent rows.

A single Normal-Wishart prior on an unconstrained (mu, Omega) induces,
for every DAG, independent node-wise priors on (eta_j, L_col_j, D_jj)
whose closed-form marginal likelihood scores Markov-equivalent DAGs
identically.  Conjugate updating reduces to a hyperparameter map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import gammaln

from . import _kernels
from .dags import Dag
from .errors import NumericalError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperparams:
    """Normal-Wishart hyperparameters (a_mu, m, a_omega, U).

    mu | Omega ~ N(m, (a_mu Omega)^-1) and Omega ~ Wishart(a_omega, U)
    with density proportional to |Omega|^((a_omega - q - 1)/2)
    exp(-tr(Omega U)/2).  Requires a_mu > 0, a_omega > q - 1 and U
    symmetric positive definite.
    """

    a_mu: float
    m: np.ndarray
    a_omega: float
    U: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        U = np.asarray(self.U, dtype=float)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "U", U)
        q = m.shape[0]
        if self.a_mu <= 0:
            raise ValueError("a_mu must be positive")
        if U.shape != (q, q):
            raise ValueError("U must be (q, q) matching m")
        if not np.allclose(U, U.T, atol=1e-10):
            raise ValueError("U must be symmetric")
        if self.a_omega <= q - 1:
            raise ValueError("a_omega must exceed q - 1")
        try:
            np.linalg.cholesky(U)
        except np.linalg.LinAlgError:
            raise ValueError("U must be positive definite") from None

    @property
    def q(self) -> int:
        return self.m.shape[0]

    @classmethod
    def default(cls, q: int) -> "Hyperparams":
        """Weakly informative default: U = I, a_mu = 1, m = 0, a_omega = q."""
        return cls(a_mu=1.0, m=np.zeros(q), a_omega=float(q), U=np.eye(q))

    @classmethod
    def _trusted(cls, a_mu, m, a_omega, U) -> "Hyperparams":
        """Skip validation for values derived from already-valid inputs."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "a_mu", a_mu)
        object.__setattr__(obj, "m", m)
        object.__setattr__(obj, "a_omega", a_omega)
        object.__setattr__(obj, "U", U)
        return obj


@dataclass(frozen=True)
class NodeParams:
    """One node's intercept, parent coefficients and conditional variance."""

    eta: float
    l_col: np.ndarray
    d_jj: float

    def __post_init__(self):
        object.__setattr__(
            self, "l_col", np.atleast_1d(np.asarray(self.l_col, dtype=float))
        )
        if self.d_jj <= 0:
            raise ValueError("d_jj must be positive")


@dataclass(frozen=True)
class SuffStats:
    """Sample size, mean, centered scatter S and mean-shift scatter S0."""

    n: int
    xbar: np.ndarray
    s_mat: np.ndarray
    s0_mat: np.ndarray


class ClusterParams:
    """A DAG plus its node parameters, with dense derived quantities.

    Stores eta (q,), the unit-diagonal coefficient matrix L with column
    j carrying l_col in the parent rows, the conditional variances D,
    the mean mu recovered by back-substitution along a topological
    order, and the precision Omega = L D^-1 L^T.
    """

    __slots__ = ("dag", "nodes", "eta", "L", "D", "mu", "omega", "_loglik_cache")

    def __init__(self, dag: Dag, nodes):
        nodes = tuple(nodes)
        if len(nodes) != dag.q:
            raise ValueError("need one NodeParams per node")
        q = dag.q
        eta = np.empty(q)
        D = np.empty(q)
        L = np.eye(q)
        for j0 in range(q):
            np_j = nodes[j0]
            pa = dag.parent_indices(j0)
            if np_j.l_col.shape[0] != pa.shape[0]:
                raise ValueError(f"node {j0 + 1}: l_col length != parent count")
            eta[j0] = np_j.eta
            D[j0] = np_j.d_jj
            L[pa, j0] = np_j.l_col
        # back-substitution along a topological order solves L^T mu = eta
        mu = np.linalg.solve(L.T, eta)
        self.dag = dag
        self.nodes = nodes
        self.eta = eta
        self.L = L
        self.D = D
        self.mu = mu
        self.omega = (L / D) @ L.T
        self._loglik_cache = None

    @property
    def q(self) -> int:
        return self.dag.q


def reparameterize(mu, sigma, dag: Dag):
    """Map (mu, Sigma) to node-wise (eta, parent coefficients, D).

    Returns (eta, l_cols, d) with eta and d as (q,) arrays and l_cols a
    list of per-node coefficient arrays ordered like the sorted parent
    indices.  Raises NumericalError naming the node whose parent block
    of Sigma is singular.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    q = dag.q
    eta = np.empty(q)
    d = np.empty(q)
    l_cols = []
    for j0 in range(q):
        pa = dag.parent_indices(j0)
        if pa.size == 0:
            d[j0] = sigma[j0, j0]
            eta[j0] = mu[j0]
            l_cols.append(np.empty(0))
            continue
        block = sigma[np.ix_(pa, pa)]
        try:
            chol = cho_factor(block, lower=True)
        except np.linalg.LinAlgError:
            raise NumericalError("singular parent block of Sigma", node=j0 + 1)
        sol = cho_solve(chol, sigma[pa, j0])
        l = -sol
        d[j0] = sigma[j0, j0] - sigma[j0, pa] @ sol
        eta[j0] = mu[j0] + l @ mu[pa]
        l_cols.append(l)
    return eta, l_cols, d


def cluster_from_moments(mu, sigma, dag: Dag) -> ClusterParams:
    """Build ClusterParams from a mean and covariance Markov w.r.t. dag."""
    eta, l_cols, d = reparameterize(mu, sigma, dag)
    nodes = [
        NodeParams(float(eta[j0]), l_cols[j0], float(d[j0])) for j0 in range(dag.q)
    ]
    return ClusterParams(dag, nodes)


def assemble_precision(cluster: ClusterParams) -> np.ndarray:
    """Precision matrix L D^-1 L^T of a parameterized cluster."""
    if np.any(cluster.D <= 0):
        raise ValueError("conditional variances must be positive")
    return (cluster.L / cluster.D) @ cluster.L.T


def suff_stats(X, m) -> SuffStats:
    """Sample mean, centered scatter and mean-shift scatter of X rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a nonempty (n, q) matrix")
    if not np.isfinite(X).all():
        raise ValueError("X must be finite")
    m = np.asarray(m, dtype=float)
    n = X.shape[0]
    xbar = X.mean(axis=0)
    centered = X - xbar
    s_mat = centered.T @ centered
    shift = xbar - m
    s0_mat = np.outer(shift, shift)
    return SuffStats(n=n, xbar=xbar, s_mat=s_mat, s0_mat=s0_mat)


def posterior_hyperparams(h: Hyperparams, stats: SuffStats) -> Hyperparams:
    """Conjugate hyperparameter update given sufficient statistics.

    a_mu and a_omega grow by n, m moves to the precision-weighted mean
    and U absorbs S plus the shrunk mean-shift scatter.  With n = 0 the
    prior is returned unchanged.
    """
    if stats.n == 0:
        return h
    n = stats.n
    a_mu_new = h.a_mu + n
    m_new = (h.a_mu * h.m + n * stats.xbar) / a_mu_new
    u_new = h.U + stats.s_mat + (h.a_mu * n / a_mu_new) * stats.s0_mat
    # positive definiteness is preserved exactly, so skip re-validation
    return Hyperparams._trusted(a_mu_new, m_new, h.a_omega + n, u_new)


def block_hyperparams(h: Hyperparams, j: int, parents) -> Hyperparams:
    """Restrict hyperparameters to the block [j] + parents (node j first).

    Conjugate updating commutes with this restriction, so node-level
    marginals can be computed from block statistics alone.
    """
    idx = np.concatenate(([j - 1], np.asarray(sorted(parents), dtype=np.int64) - 1))
    return Hyperparams._trusted(
        h.a_mu, h.m[idx], h.a_omega, h.U[np.ix_(idx, idx)]
    )


def _conditional_block(U):
    """(log det of parent block, conditional variance scalar) for a block
    matrix ordered with the node first."""
    p = U.shape[0] - 1
    if p == 0:
        return 0.0, float(U[0, 0])
    A = U[1:, 1:]
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NumericalError("parent block not positive definite")
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(chol))))
    y = solve_triangular(chol, U[1:, 0], lower=True, check_finite=False)
    cond = float(U[0, 0] - y @ y)
    return logdet, cond


def sample_node_params(
    dag: Dag, j: int, h: Hyperparams, rng: np.random.Generator
) -> NodeParams:
    """Draw (eta_j, l_col, d_jj) for node j from its conditional chain.

    d_jj is inverse-gamma with shape a_j/2 and rate U_{jj|pa}/2 where
    a_j = a_omega + |pa| - q + 1; l_col | d_jj is Gaussian with mean
    -U_pa^-1 U_{pa,j} and covariance d_jj U_pa^-1; eta_j | l_col, d_jj
    is Gaussian with mean m_j + l_col^T m_pa and variance d_jj / a_mu.
    Works with prior or posterior hyperparameters.
    """
    q = dag.q
    j0 = j - 1
    pa = dag.parent_indices(j0)
    p = pa.size
    a_j = h.a_omega + p - q + 1
    if a_j <= 0:
        raise ValueError("shape parameter must be positive; check a_omega")
    if p == 0:
        u_cond = float(h.U[j0, j0])
        d_jj = 1.0 / rng.gamma(a_j / 2.0, 2.0 / u_cond)
        l_col = np.empty(0)
        mean_eta = h.m[j0]
    else:
        A = h.U[np.ix_(pa, pa)]
        b = h.U[pa, j0]
        try:
            cl = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise NumericalError("parent block of U not positive definite", node=j)
        sol = cho_solve((cl, True), b, check_finite=False)
        u_cond = float(h.U[j0, j0] - b @ sol)
        if u_cond <= 0:
            raise NumericalError("nonpositive conditional variance block", node=j)
        d_jj = 1.0 / rng.gamma(a_j / 2.0, 2.0 / u_cond)
        z = rng.standard_normal(p)
        # covariance d * A^-1, sampled through the Cholesky factor of A
        l_col = -sol + math.sqrt(d_jj) * solve_triangular(
            cl.T, z, lower=False, check_finite=False
        )
        mean_eta = h.m[j0] + l_col @ h.m[pa]
    eta = rng.normal(mean_eta, math.sqrt(d_jj / h.a_mu))
    return NodeParams(eta=float(eta), l_col=l_col, d_jj=float(d_jj))


def log_marginal_node(x_j, x_pa, h: Hyperparams, pa_size: int, q: int) -> float:
    """Closed-form log marginal likelihood of one node-conditional.

    h must already be restricted to the block [j] + parents with the
    node first (see block_hyperparams); x_pa columns follow the same
    parent order.  q is the dimension of the full model, which sets the
    degrees of freedom a_j = a_omega + pa_size - q + 1.  The value is
    the ratio of prior to posterior normalizing constants; n = 0 gives
    0.  An empty parent set uses determinant 1 for the empty block.
    """
    x_j = np.asarray(x_j, dtype=float)
    n = x_j.shape[0]
    if n == 0:
        return 0.0
    x_pa = np.asarray(x_pa, dtype=float).reshape(n, pa_size)
    Xb = np.column_stack([x_j, x_pa]) if pa_size else x_j[:, None]
    h_post = posterior_hyperparams(h, suff_stats(Xb, h.m))
    a_j = h.a_omega + pa_size - q + 1
    a_j_post = a_j + n
    logdet_prior, cond_prior = _conditional_block(h.U)
    logdet_post, cond_post = _conditional_block(h_post.U)
    if cond_prior <= 0 or cond_post <= 0:
        raise NumericalError("nonpositive conditional variance block")
    return (
        -0.5 * n * LOG_2PI
        + 0.5 * (math.log(h.a_mu) - math.log(h_post.a_mu))
        + 0.5 * (logdet_prior - logdet_post)
        + gammaln(a_j_post / 2.0)
        - gammaln(a_j / 2.0)
        + (a_j / 2.0) * math.log(cond_prior / 2.0)
        - (a_j_post / 2.0) * math.log(cond_post / 2.0)
    )


def log_marginal_node_for(X, dag: Dag, j: int, h: Hyperparams) -> float:
    """log_marginal_node for node j of a DAG, restricting h internally."""
    X = np.asarray(X, dtype=float)
    pa = dag.parent_indices(j - 1)
    hb = block_hyperparams(h, j, pa + 1)
    return log_marginal_node(X[:, j - 1], X[:, pa], hb, pa.size, dag.q)


def log_marginal_dag(X, dag: Dag, h: Hyperparams) -> float:
    """Log marginal likelihood of a DAG: sum of its node marginals."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return 0.0
    return float(
        sum(log_marginal_node_for(X, dag, j, h) for j in range(1, dag.q + 1))
    )


def row_log_likelihoods(X, cluster: ClusterParams) -> np.ndarray:
    """Log density of each row of X under the cluster's Gaussian DAG model.

    Values for one fixed data matrix are memoized on the cluster, which
    is immutable; the allocation sweep re-scores unchanged clusters for
    free.
    """
    cached = cluster._loglik_cache
    if cached is not None and cached[0] is X:
        return cached[1]
    X = np.asarray(X, dtype=float)
    values = _kernels.rows_loglik(X, cluster.eta, cluster.L, cluster.D)
    cluster._loglik_cache = (X, values)
    return values


def log_likelihood(X, cluster: ClusterParams) -> float:
    """Total log likelihood of X; equals the dense N(mu, Omega^-1) value."""
    if np.any(cluster.D <= 0):
        raise ValueError("conditional variances must be positive")
    return float(row_log_likelihoods(X, cluster).sum())
