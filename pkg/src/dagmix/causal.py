"""Interventional quantities for Gaussian DAG models.

The total causal effect of setting X_s on a response Y is the X_s
coefficient in the regression of Y on {s} union parents(s), read off
the model covariance.  When Y is itself a parent of s the intervention
leaves the distribution of Y unchanged and the effect is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dags import Dag
from .errors import NumericalError


def _fa_coefficients(sigma, dag: Dag, s: int, y: int) -> np.ndarray:
    """Regression coefficients of Y on [s] + parents(s), s first."""
    s0, y0 = s - 1, y - 1
    fa = np.concatenate(([s0], dag.parent_indices(s0)))
    block = sigma[np.ix_(fa, fa)]
    try:
        return np.linalg.solve(block, sigma[fa, y0]), fa
    except np.linalg.LinAlgError:
        raise NumericalError("singular block of Sigma over {s} + parents(s)") from None


def causal_effect(sigma, dag: Dag, s: int, y: int) -> float:
    """Total effect on node y of intervening on node s (both 1-based)."""
    if s == y:
        raise ValueError("intervention node must differ from the response")
    sigma = np.asarray(sigma, dtype=float)
    if y in dag.parents(s):
        return 0.0
    coef, _ = _fa_coefficients(sigma, dag, s, y)
    return float(coef[0])


def post_intervention_mean(mu, sigma, dag: Dag, s: int, x_tilde: float, y: int) -> float:
    """Expected response after fixing X_s to x_tilde.

    The full regression of Y on [s] + parents(s) gives intercept and
    coefficients; the intervened node contributes x_tilde and each
    parent its marginal mean.
    """
    if s == y:
        raise ValueError("intervention node must differ from the response")
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if y in dag.parents(s):
        return float(mu[y - 1])
    coef, fa = _fa_coefficients(sigma, dag, s, y)
    intercept = mu[y - 1] - coef @ mu[fa]
    return float(intercept + coef[0] * x_tilde + coef[1:] @ mu[fa[1:]])


@dataclass(frozen=True)
class CausalEffectMatrix:
    """Per-subject effects, one column per intervened node.

    The response column carries NaN and is masked invalid.
    """

    values: np.ndarray
    response: int
    valid_mask: np.ndarray


class CausalEffectAccumulator:
    """Streaming per-subject averages of per-draw causal effects."""

    def __init__(self, n: int, q: int, response: int = 1):
        if not 1 <= response <= q:
            raise ValueError("response node out of range")
        self.n = n
        self.q = q
        self.response = response
        self.count = 0
        self.sums = np.zeros((n, q))

    def consume(self, rec) -> None:
        y = self.response
        effects = np.empty((len(rec.dags), self.q))
        for k0, (dag, omega) in enumerate(zip(rec.dags, rec.omegas)):
            sigma = np.linalg.inv(omega)
            for s in range(1, self.q + 1):
                effects[k0, s - 1] = (
                    np.nan if s == y else causal_effect(sigma, dag, s, y)
                )
        self.sums += effects[np.asarray(rec.xi) - 1]
        self.count += 1

    def result(self) -> CausalEffectMatrix:
        if self.count == 0:
            raise ValueError("no records to summarize")
        values = self.sums / self.count
        mask = np.ones_like(values, dtype=bool)
        mask[:, self.response - 1] = False
        return CausalEffectMatrix(
            values=values, response=self.response, valid_mask=mask
        )


def bma_causal_effects(trace, y: int = 1) -> CausalEffectMatrix:
    """Model-averaged effect of every intervention for every subject.

    For each retained draw, each subject inherits its cluster's DAG and
    covariance; effects are averaged across draws.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    acc = CausalEffectAccumulator(trace.n, trace.q, response=y)
    for rec in trace:
        acc.consume(rec)
    return acc.result()


def write_causal_csv(matrix: CausalEffectMatrix, path) -> None:
    """CSV with one row per subject; the response column is left empty."""
    y0 = matrix.response - 1
    with open(path, "w") as fh:
        for row in matrix.values:
            cells = [
                "" if j == y0 else "%.17g" % row[j] for j in range(row.shape[0])
            ]
            fh.write(",".join(cells) + "\n")
