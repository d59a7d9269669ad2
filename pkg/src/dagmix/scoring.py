"""Bundled summaries of one fit and metrics against simulated truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .causal import CausalEffectAccumulator, CausalEffectMatrix, causal_effect
from .simulate import LoadedTruth
from .summaries import (
    EdgeProbabilityAccumulator,
    SimilarityAccumulator,
    SimilarityMatrix,
    binder_loss,
    estimate_dag,
    estimate_partition,
    partition_from_labels,
    shd,
    variation_of_information,
)


@dataclass
class FitSummaries:
    similarity: SimilarityMatrix
    edge_probs: np.ndarray
    causal: CausalEffectMatrix
    alpha0s: np.ndarray
    ks: np.ndarray
    n_records: int


class SummaryAccumulator:
    """Consumes trace records and keeps only summary accumulators."""

    def __init__(self, n: int, q: int, response: int = 1):
        self.similarity = SimilarityAccumulator(n)
        self.edges = EdgeProbabilityAccumulator(n, q)
        self.causal = CausalEffectAccumulator(n, q, response=response)
        self.alpha0s = []
        self.ks = []

    def consume(self, rec) -> None:
        self.similarity.consume(rec)
        self.edges.consume(rec)
        self.causal.consume(rec)
        self.alpha0s.append(rec.alpha0)
        self.ks.append(rec.k_active)

    def result(self) -> FitSummaries:
        return FitSummaries(
            similarity=self.similarity.result(),
            edge_probs=self.edges.result(),
            causal=self.causal.result(),
            alpha0s=np.asarray(self.alpha0s),
            ks=np.asarray(self.ks, dtype=np.int64),
            n_records=self.similarity.count,
        )


def summarize_trace(trace, response: int = 1) -> FitSummaries:
    acc = SummaryAccumulator(trace.n, trace.q, response=response)
    for rec in trace:
        acc.consume(rec)
    return acc.result()


def true_effect_matrix(truth: LoadedTruth, response: int = 1) -> np.ndarray:
    """Per-subject true effects from each subject's true cluster."""
    q = truth.meta["q"]
    n = truth.labels.shape[0]
    per_cluster = np.empty((len(truth.dags), q))
    for k0, (dag, omega) in enumerate(zip(truth.dags, truth.omegas)):
        sigma = np.linalg.inv(omega)
        for s in range(1, q + 1):
            per_cluster[k0, s - 1] = (
                np.nan if s == response else causal_effect(sigma, dag, s, response)
            )
    labels = partition_from_labels(truth.labels).labels
    return per_cluster[labels - 1].reshape(n, q)


def score_fit(
    summaries: FitSummaries,
    truth: LoadedTruth,
    threshold: float = 0.5,
    edge_threshold: float = 0.5,
) -> dict:
    """Clustering, structure and causal metrics of one fit against truth.

    Subject-level DAG estimates that come out cyclic are scored with the
    greedy acyclic repair and counted in cyclic_estimates.
    """
    est = estimate_partition(summaries.similarity, threshold=threshold)
    true_part = partition_from_labels(truth.labels)
    vi = variation_of_information(true_part, est)
    bl = binder_loss(true_part, est)

    labels = true_part.labels
    n = labels.shape[0]
    shds = np.empty(n)
    cyclic = 0
    cache = {}
    for i in range(n):
        key = summaries.edge_probs[i].tobytes()
        if key not in cache:
            result = estimate_dag(summaries.edge_probs[i], w=edge_threshold, repair=True)
            cache[key] = result
        result = cache[key]
        if result.cyclic:
            cyclic += 1
        shds[i] = shd(result.dag, truth.dags[labels[i] - 1])

    true_fx = true_effect_matrix(truth, response=summaries.causal.response)
    mask = summaries.causal.valid_mask
    causal_dist = float(
        np.abs(summaries.causal.values[mask] - true_fx[mask]).mean()
    )
    return {
        "vi": float(vi),
        "bl": float(bl),
        "mean_shd": float(shds.mean()),
        "causal_abs_distance_x100": 100.0 * causal_dist,
        "cyclic_estimates": int(cyclic),
        "n_records": summaries.n_records,
    }
