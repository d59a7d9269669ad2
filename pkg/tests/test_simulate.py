import numpy as np
import pytest

from dagmix.simulate import (
    Scenario,
    generate,
    load_ground_truth,
    random_dag,
    save_ground_truth,
)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(q=1, n_k=10, b=1.0)
    with pytest.raises(ValueError):
        Scenario(q=5, n_k=0, b=1.0)
    with pytest.raises(ValueError):
        Scenario(q=5, n_k=10, b=0.0)
    with pytest.raises(ValueError):
        Scenario(q=5, n_k=10, b=1.0, edge_prob=1.5)
    with pytest.raises(ValueError):
        Scenario(q=5, n_k=10, b=1.0, mode="weird")


def test_tiny_edge_probability_gives_empty_dags():
    rng = np.random.default_rng(0)
    gt = generate(Scenario(q=6, n_k=5, b=1.0, edge_prob=1e-9), rng)
    assert all(d.edge_count == 0 for d in gt.dags)
    # coordinates are then independent unit-variance draws
    assert np.allclose(gt.clusters[0].omega, np.eye(6))


def test_generate_shapes_and_labels():
    rng = np.random.default_rng(1)
    gt = generate(Scenario(q=4, n_k=7, b=2.0, k=3), rng)
    assert gt.X.shape == (21, 4)
    assert sorted(np.unique(gt.labels)) == [1, 2, 3]
    assert np.bincount(gt.labels)[1:].tolist() == [7, 7, 7]


def test_equal_mode_shares_structure_not_parameters():
    rng = np.random.default_rng(2)
    gt = generate(Scenario(q=8, n_k=3, b=1.0, mode="equal", edge_prob=0.4), rng)
    assert gt.dags[0] == gt.dags[1]
    assert not np.allclose(gt.clusters[0].eta, gt.clusters[1].eta)


def test_different_mode_draws_independent_dags():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(10):
        gt = generate(Scenario(q=8, n_k=2, b=1.0, mode="different", edge_prob=0.3), rng)
        hits += gt.dags[0] != gt.dags[1]
    assert hits >= 8


def test_coefficient_magnitudes_in_band():
    rng = np.random.default_rng(4)
    gt = generate(Scenario(q=10, n_k=2, b=5.0, edge_prob=0.4), rng)
    found = 0
    for cl in gt.clusters:
        assert np.allclose(cl.D, 1.0)
        assert np.all(np.abs(cl.eta) <= 5.0)
        for node in cl.nodes:
            for val in node.l_col:
                found += 1
                assert 0.1 <= abs(val) <= 1.0
    assert found > 0


def test_precision_markov_and_spd():
    rng = np.random.default_rng(5)
    gt = generate(Scenario(q=7, n_k=2, b=1.0, edge_prob=0.3), rng)
    for cl in gt.clusters:
        np.linalg.cholesky(cl.omega)
        adj = cl.dag.adjacency
        for u in range(7):
            for v in range(u + 1, 7):
                linked = adj[u, v] or adj[v, u] or (adj[u] & adj[v]).any()
                if not linked:
                    assert abs(cl.omega[u, v]) < 1e-12


def test_sample_covariance_converges_to_truth():
    rng = np.random.default_rng(6)
    gt = generate(Scenario(q=5, n_k=10_000, b=1.0, edge_prob=0.3, k=1), rng)
    emp = np.cov(gt.X.T)
    target = np.linalg.inv(gt.clusters[0].omega)
    err = np.linalg.norm(emp - target) / np.linalg.norm(target)
    assert err < 0.05


def test_random_dag_respects_edge_probability():
    rng = np.random.default_rng(7)
    q = 8
    slots = q * (q - 1) / 2
    counts = [random_dag(q, 0.1, rng).edge_count for _ in range(400)]
    assert np.mean(counts) == pytest.approx(0.1 * slots, abs=0.25)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    gt = generate(Scenario(q=4, n_k=5, b=2.0), rng)
    save_ground_truth(gt, tmp_path)
    loaded = load_ground_truth(tmp_path)
    assert loaded.meta["q"] == 4
    assert (loaded.labels == gt.labels).all()
    for dag, cl in zip(loaded.dags, gt.clusters):
        assert dag == cl.dag
    for omega, cl in zip(loaded.omegas, gt.clusters):
        assert np.allclose(omega, cl.omega)
    header = (tmp_path / "data.csv").read_text().splitlines()[0]
    assert header == "X1,X2,X3,X4"
