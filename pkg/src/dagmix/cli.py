"""Command-line interface: simulate, fit, summarize and bench.

Configuration comes from an optional JSON file plus flags (flags win);
the effective configuration is echoed into every output directory next
to a manifest recording the seed, a hash of the configuration and the
library versions, so a run is reproducible from its outputs alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, fileio
from .causal import write_causal_csv
from .dags import write_dag_text
from .scoring import SummaryAccumulator, score_fit, summarize_trace
from .seeding import spawn_rng
from .simulate import (
    DIFFERENT_DAGS,
    EQUAL_DAGS,
    LoadedTruth,
    Scenario,
    generate,
    load_ground_truth,
    save_ground_truth,
)
from .slice_sampler import (
    ChainConfig,
    Trace,
    run_chain,
    run_chain_streaming,
)
from .summaries import estimate_dag, estimate_partition, partition_from_labels
from .wishart import Hyperparams

MODES = ("dp", "one_group_naive", "k_group_oracle")


def _versions() -> dict:
    import scipy

    return {
        "dagmix": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": "%d.%d" % sys.version_info[:2],
    }


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(outdir, seed, config: dict) -> None:
    payload = json.dumps(config, sort_keys=True).encode()
    _write_json(
        os.path.join(outdir, "manifest.json"),
        {
            "seed": seed,
            "config_sha256": hashlib.sha256(payload).hexdigest(),
            "versions": _versions(),
        },
    )


def _merge_config(args, keys) -> dict:
    """File config overridden by any explicitly provided flags."""
    config = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            config.update(json.load(fh))
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    return config


_FIT_KEYS = (
    "iterations",
    "burn_in",
    "thin",
    "seed",
    "mode",
    "labels",
    "response",
    "a_mu",
    "a_omega",
    "u_scale",
    "m_const",
    "a_pi",
    "b_pi",
    "c",
    "d",
    "dag_moves_per_sweep",
    "prior_dag_steps",
    "stick_cap",
    "exact_proposal_ratio",
    "light_trace",
)

_FIT_DEFAULTS = {
    "iterations": 25000,
    "burn_in": 5000,
    "thin": 1,
    "seed": 0,
    "mode": "dp",
    "labels": None,
    "response": 1,
    "a_mu": 1.0,
    "a_omega": None,
    "u_scale": 1.0,
    "m_const": 0.0,
    "a_pi": 1.0,
    "b_pi": None,
    "c": 3.0,
    "d": 1.0,
    "dag_moves_per_sweep": 1,
    "prior_dag_steps": 60,
    "stick_cap": None,
    "exact_proposal_ratio": True,
    "light_trace": False,
}


def _chain_config(config: dict, q: int, pinned) -> ChainConfig:
    a_omega = config["a_omega"] if config["a_omega"] is not None else float(q)
    hyper = Hyperparams(
        a_mu=config["a_mu"],
        m=np.full(q, config["m_const"]),
        a_omega=a_omega,
        U=np.eye(q) * config["u_scale"],
    )
    return ChainConfig(
        iterations=config["iterations"],
        burn_in=config["burn_in"],
        thin=config["thin"],
        hyper=hyper,
        a_pi=config["a_pi"],
        b_pi=config["b_pi"],
        c=config["c"],
        d=config["d"],
        exact_proposal_ratio=config["exact_proposal_ratio"],
        dag_moves_per_sweep=config["dag_moves_per_sweep"],
        prior_dag_steps=config["prior_dag_steps"],
        stick_cap=config["stick_cap"],
        pinned_labels=pinned,
    )


def _pinned_labels(mode: str, labels_path, n: int):
    if mode == "dp":
        return None
    if mode == "one_group_naive":
        return np.ones(n, dtype=np.int64)
    if mode == "k_group_oracle":
        if not labels_path:
            raise ValueError("k_group_oracle mode needs --labels")
        labels = fileio.read_vector(labels_path, dtype=int)
        if labels.shape[0] != n:
            raise ValueError("labels length does not match the data")
        return labels
    raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")


def _write_summaries(outdir, summaries, subjects=None):
    fileio.write_matrix(
        os.path.join(outdir, "similarity.csv"), summaries.similarity.values
    )
    part = estimate_partition(summaries.similarity)
    fileio.write_vector(os.path.join(outdir, "partition.csv"), part.labels, "%d")
    edgedir = os.path.join(outdir, "edge_probs")
    os.makedirs(edgedir, exist_ok=True)
    n = summaries.edge_probs.shape[0]
    chosen = subjects if subjects is not None else range(1, n + 1)
    for i in chosen:
        fileio.write_matrix(
            os.path.join(edgedir, f"subject_{i}.csv"), summaries.edge_probs[i - 1]
        )
    write_causal_csv(summaries.causal, os.path.join(outdir, "causal_bma.csv"))
    fileio.write_vector(os.path.join(outdir, "alpha0.csv"), summaries.alpha0s)
    fileio.write_vector(os.path.join(outdir, "k.csv"), summaries.ks, "%d")
    return part


def cmd_simulate(args) -> None:
    scenario = Scenario(
        q=args.q,
        n_k=args.nk,
        b=args.b,
        k=args.k,
        edge_prob=args.edge_prob,
        mode=args.mode,
    )
    rng = spawn_rng(args.seed, "simulate")
    gt = generate(scenario, rng)
    os.makedirs(args.out, exist_ok=True)
    save_ground_truth(gt, args.out)
    config = {
        "q": args.q,
        "nk": args.nk,
        "b": args.b,
        "k": args.k,
        "edge_prob": args.edge_prob,
        "mode": args.mode,
        "seed": args.seed,
    }
    _write_json(os.path.join(args.out, "effective_config.json"), config)
    _write_manifest(args.out, args.seed, config)
    print(
        f"simulated {gt.X.shape[0]} x {gt.X.shape[1]} data (seed {args.seed}, "
        f"edge_prob {args.edge_prob}) -> {args.out}"
    )


def cmd_fit(args) -> None:
    config = dict(_FIT_DEFAULTS)
    config.update(_merge_config(args, _FIT_KEYS))
    X = fileio.read_matrix(args.data)
    n, q = X.shape
    pinned = _pinned_labels(config["mode"], config["labels"], n)
    chain_cfg = _chain_config(config, q, pinned)
    rng = spawn_rng(config["seed"], "fit", config["mode"])
    os.makedirs(args.out, exist_ok=True)

    if config["light_trace"]:
        acc = SummaryAccumulator(n, q, response=config["response"])
        stats = run_chain_streaming(X, chain_cfg, rng, consumers=(acc,))
        _write_summaries(args.out, acc.result())
    else:
        trace = run_chain(X, chain_cfg, rng)
        trace.save(os.path.join(args.out, "trace"))
        stats = trace.stats
    _write_json(os.path.join(args.out, "run_stats.json"), stats)
    echo = {k: config[k] for k in sorted(config)}
    # record the q-dependent defaults actually used
    echo["a_omega"] = chain_cfg.hyper.a_omega
    echo["b_pi"] = config["b_pi"] if config["b_pi"] is not None else (2.0 * q - 2.0) / 3.0
    _write_json(os.path.join(args.out, "effective_config.json"), echo)
    _write_manifest(args.out, config["seed"], echo)
    print(f"fit ({config['mode']}) of {n} x {q} data -> {args.out}")


def _parse_subjects(raw: str | None):
    if not raw:
        return None
    return [int(tok) for tok in raw.split(",") if tok.strip()]


def cmd_summarize(args) -> None:
    trace = Trace.load(args.trace)
    summaries = summarize_trace(trace, response=args.response)
    os.makedirs(args.out, exist_ok=True)
    subjects = _parse_subjects(args.subjects)
    part = _write_summaries(args.out, summaries, subjects=subjects)

    dagdir = os.path.join(args.out, "dag_estimates")
    os.makedirs(dagdir, exist_ok=True)
    failures = {}
    for i in subjects if subjects is not None else range(1, trace.n + 1):
        est = estimate_dag(
            summaries.edge_probs[i - 1],
            w=args.edge_threshold,
            repair=args.repair_cyclic,
        )
        if est.dag is not None:
            write_dag_text(est.dag, os.path.join(dagdir, f"subject_{i}.txt"))
        if est.cyclic:
            failures[str(i)] = list(est.cycle or ())
    _write_json(os.path.join(args.out, "cyclic_failures.json"), failures)

    lines = [
        f"records: {summaries.n_records}",
        f"estimated clusters: {part.n_clusters}",
        f"cyclic DAG estimates: {len(failures)}",
    ]
    if args.truth:
        truth = load_ground_truth(args.truth)
        metrics = score_fit(
            summaries,
            truth,
            threshold=args.threshold,
            edge_threshold=args.edge_threshold,
        )
        _write_json(os.path.join(args.out, "metrics.json"), metrics)
        lines += [f"{key}: {metrics[key]}" for key in sorted(metrics)]
    with open(os.path.join(args.out, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))


def _truth_in_memory(gt) -> LoadedTruth:
    return LoadedTruth(
        dags=gt.dags,
        omegas=tuple(cl.omega for cl in gt.clusters),
        mus=tuple(cl.mu for cl in gt.clusters),
        labels=partition_from_labels(gt.labels).labels,
        meta={
            "q": gt.scenario.q,
            "k": gt.scenario.k,
            "n_k": gt.scenario.n_k,
            "b": gt.scenario.b,
            "mode": gt.scenario.mode,
            "edge_prob": gt.scenario.edge_prob,
        },
    )


def _grid(raw: str, cast=float):
    return [cast(tok) for tok in raw.split(",") if tok.strip()]


def _write_table(path, rows_b, cols_nk, values) -> None:
    """Matrix of metric means: one row per b, one column per n_k."""
    with open(path, "w") as fh:
        fh.write("b," + ",".join(str(nk) for nk in cols_nk) + "\n")
        for bi, b in enumerate(rows_b):
            cells = ["%.17g" % values[bi, ci] for ci in range(len(cols_nk))]
            fh.write(f"{b}," + ",".join(cells) + "\n")


def cmd_bench(args) -> None:
    b_grid = _grid(args.b_grid, float)
    nk_grid = _grid(args.nk_grid, int)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    os.makedirs(args.out, exist_ok=True)

    rows = []
    for b in b_grid:
        for nk in nk_grid:
            for rep in range(args.replicates):
                scenario = Scenario(
                    q=args.q,
                    n_k=nk,
                    b=b,
                    k=2,
                    edge_prob=args.edge_prob,
                    mode=args.scenario,
                )
                gt = generate(scenario, spawn_rng(args.seed, "sim", b, nk, rep))
                truth = _truth_in_memory(gt)
                n = gt.X.shape[0]
                for mode in modes:
                    pinned = None
                    if mode == "one_group_naive":
                        pinned = np.ones(n, dtype=np.int64)
                    elif mode == "k_group_oracle":
                        pinned = truth.labels
                    cfg = ChainConfig(
                        iterations=args.iterations,
                        burn_in=args.burn_in,
                        thin=args.thin,
                        pinned_labels=pinned,
                    )
                    acc = SummaryAccumulator(n, args.q, response=args.response)
                    run_chain_streaming(
                        gt.X,
                        cfg,
                        spawn_rng(args.seed, "fit", b, nk, rep, mode),
                        consumers=(acc,),
                    )
                    metrics = score_fit(acc.result(), truth)
                    rows.append(
                        {
                            "b": b,
                            "nk": nk,
                            "rep": rep,
                            "mode": mode,
                            **metrics,
                        }
                    )

    metric_keys = ["vi", "bl", "mean_shd", "causal_abs_distance_x100", "cyclic_estimates"]
    with open(os.path.join(args.out, "metrics_raw.csv"), "w") as fh:
        fh.write("b,nk,rep,mode," + ",".join(metric_keys) + "\n")
        for row in rows:
            fh.write(
                f"{row['b']},{row['nk']},{row['rep']},{row['mode']},"
                + ",".join("%.17g" % row[k] for k in metric_keys)
                + "\n"
            )

    report = ["bench grid: b in %s, n_k in %s, %d replicate(s)" % (b_grid, nk_grid, args.replicates)]
    for mode in modes:
        for key in ("causal_abs_distance_x100", "mean_shd", "vi", "bl"):
            table = np.empty((len(b_grid), len(nk_grid)))
            for bi, b in enumerate(b_grid):
                for ci, nk in enumerate(nk_grid):
                    vals = [
                        row[key]
                        for row in rows
                        if row["mode"] == mode and row["b"] == b and row["nk"] == nk
                    ]
                    table[bi, ci] = float(np.mean(vals))
            _write_table(
                os.path.join(args.out, f"{key}_{mode}.csv"), b_grid, nk_grid, table
            )
            report.append(f"{mode} {key}:")
            report.append("  n_k: " + "  ".join(str(nk) for nk in nk_grid))
            for bi, b in enumerate(b_grid):
                report.append(
                    f"  b={b}: " + "  ".join("%.3f" % x for x in table[bi])
                )
    with open(os.path.join(args.out, "report.txt"), "w") as fh:
        fh.write("\n".join(report) + "\n")

    config = {
        "q": args.q,
        "b_grid": b_grid,
        "nk_grid": nk_grid,
        "replicates": args.replicates,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "modes": modes,
        "scenario": args.scenario,
        "edge_prob": args.edge_prob,
        "response": args.response,
        "seed": args.seed,
    }
    _write_json(os.path.join(args.out, "effective_config.json"), config)
    _write_manifest(args.out, args.seed, config)
    print("\n".join(report))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagmix",
        description="DP mixtures of Gaussian DAG models: simulate, fit, summarize, bench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic clustered DAG data")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--nk", type=int, required=True, help="per-cluster sample size")
    p.add_argument("--b", type=float, required=True, help="intercept range half-width")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--edge-prob", type=float, default=0.1)
    p.add_argument("--mode", choices=(EQUAL_DAGS, DIFFERENT_DAGS), default=DIFFERENT_DAGS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the sampler on a CSV data matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config; flags override its keys")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--labels", help="true labels CSV for k_group_oracle")
    p.add_argument("--response", type=int)
    p.add_argument("--a-mu", dest="a_mu", type=float)
    p.add_argument("--a-omega", dest="a_omega", type=float)
    p.add_argument("--u-scale", dest="u_scale", type=float)
    p.add_argument("--m-const", dest="m_const", type=float)
    p.add_argument("--a-pi", dest="a_pi", type=float)
    p.add_argument("--b-pi", dest="b_pi", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--dag-moves-per-sweep", dest="dag_moves_per_sweep", type=int)
    p.add_argument("--prior-dag-steps", dest="prior_dag_steps", type=int)
    p.add_argument("--stick-cap", dest="stick_cap", type=int)
    p.add_argument(
        "--approx-proposal-ratio",
        dest="exact_proposal_ratio",
        action="store_false",
        default=None,
        help="approximate the move-count proposal ratio by 1",
    )
    p.add_argument(
        "--light-trace",
        dest="light_trace",
        action="store_true",
        default=None,
        help="keep only summary accumulators instead of a full trace",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("summarize", help="summaries and metrics from a saved trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--response", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--edge-threshold", dest="edge_threshold", type=float, default=0.5)
    p.add_argument("--subjects", help="comma-separated 1-based subject ids")
    p.add_argument("--truth", help="simulate output directory with ground truth")
    p.add_argument("--repair-cyclic", dest="repair_cyclic", action="store_true")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("bench", help="replicate sweep over an n_k x b grid")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--nk-grid", dest="nk_grid", default="50,100")
    p.add_argument("--b-grid", dest="b_grid", default="1,2,5")
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--iterations", type=int, default=4000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--modes", default="dp,k_group_oracle,one_group_naive")
    p.add_argument("--scenario", choices=(EQUAL_DAGS, DIFFERENT_DAGS), default=DIFFERENT_DAGS)
    p.add_argument("--edge-prob", dest="edge_prob", type=float, default=0.1)
    p.add_argument("--response", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
