"""Command-line interface.

Subcommands: ``gen`` writes a dataset CSV, ``train`` fits one method and
writes a predictor JSON (plus a trace or training-log CSV), ``eval`` scores a
saved predictor against a dataset, ``sweep`` runs a full replication sweep
from a JSON config, and ``toy`` emits the two-edge reweighting walkthrough as
a CSV. Exit codes: 0 on success, 1 on run errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .datagen import (
    PolynomialDgp,
    generate_grid_dataset,
    generate_two_edge_dataset,
    load_dataset_csv,
)
from .experiment import (
    ExperimentConfig,
    evaluate_predictor,
    run_experiment,
    summarize_improvement,
)
from .predictors import (
    ForestConfig,
    LinearPredictor,
    fit_forest,
    predictor_from_json,
    predictor_to_json,
)
from .problems import GridNetwork, TwoEdgeProblem
from .reweighting import DecisionAwareConfig, fit_decision_aware
from .spoplus import SpoPlusConfig, train_spo_plus


def _problem_from_meta(meta: dict):
    name = meta.get("problem", "")
    if name == "two-edge":
        return TwoEdgeProblem()
    if name.startswith("grid-"):
        rows, cols = name.removeprefix("grid-").split("x")
        return GridNetwork(int(rows), int(cols))
    raise ValueError(f"cannot infer problem from metadata {name!r}; regenerate with `gen`")


def _cmd_gen(args) -> int:
    if args.problem == "two-edge":
        dataset = generate_two_edge_dataset(args.n_train, seed=args.seed)
    else:
        problem = GridNetwork(args.rows, args.cols)
        dgp = PolynomialDgp.draw(
            n_outputs=problem.dim,
            n_features=args.n_features,
            degree=args.degree,
            noise_halfwidth=args.noise_halfwidth,
            seed=args.seed,
        )
        dataset = generate_grid_dataset(dgp, args.n_train, seed=args.seed, problem=problem.name)
        if args.emit_true_predictor:
            if args.degree != 1:
                raise ValueError("the exact conditional mean is linear only at degree 1")
            # degree 1 mean: 2 + base @ z / sqrt(p), representable exactly
            theta = np.column_stack(
                [np.full(problem.dim, 2.0), dgp.base / np.sqrt(dgp.n_features)]
            )
            predictor_to_json(LinearPredictor(theta=theta), args.emit_true_predictor)
    dataset.save_csv(args.out)
    print(f"wrote {dataset.n} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    dataset = load_dataset_csv(args.data)
    problem = _problem_from_meta(dataset.meta)
    if args.method in ("pto-linear", "decision-aware-linear", "pto-forest", "decision-aware-forest"):
        kind = "forest" if args.method.endswith("forest") else "linear"
        nu = args.nu if args.method.startswith("decision-aware") else 0.0
        rounds = args.k if args.method.startswith("decision-aware") else 0
        cfg = DecisionAwareConfig(
            nu=nu,
            rounds=rounds,
            predictor=kind,
            weight_scheme=args.weight_scheme,
            forest=ForestConfig(seed=args.seed),
            seed=args.seed,
        )
        predictor, trace = fit_decision_aware(problem, dataset, cfg)
        if args.trace_out:
            trace.save_csv(args.trace_out)
    elif args.method == "spo-plus":
        predictor, log = train_spo_plus(problem, dataset, SpoPlusConfig(seed=args.seed))
        if args.trace_out:
            log.save_csv(args.trace_out)
    else:
        raise ValueError(f"unknown method {args.method!r}")
    predictor_to_json(predictor, args.out)
    print(f"wrote predictor to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    dataset = load_dataset_csv(args.data)
    problem = _problem_from_meta(dataset.meta)
    predictor = predictor_from_json(args.predictor)
    mean_r, norm_r, mse_r = evaluate_predictor(
        problem, dataset.contexts, dataset.costs, predictor
    )
    metrics = {
        "realized_mean_regret": mean_r,
        "realized_normalized_regret": norm_r,
        "realized_mse": mse_r,
    }
    if "dgp" in dataset.meta:
        dgp = PolynomialDgp.from_dict(dataset.meta["dgp"])
        means = dgp.conditional_mean(dataset.contexts)
        mean_t, norm_t, mse_t = evaluate_predictor(problem, dataset.contexts, means, predictor)
        metrics.update(
            {
                "true_mean_regret": mean_t,
                "true_normalized_regret": norm_t,
                "true_mse": mse_t,
            }
        )
    for key, value in metrics.items():
        print(f"{key}: {value:.10g}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(metrics, fh, indent=2)
    return 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "root_seed": args.seed})
    records = run_experiment(config, output_path=args.out)
    failures = [r for r in records if r.error]
    print(f"wrote {len(records)} records to {args.out} ({len(failures)} failed cells)")
    degree = max(config.degrees)
    n_train = max(config.n_train)
    for row in summarize_improvement(records, degree=degree, n_train=n_train):
        label = f"{row['method']}"
        if row["nu"] != "":
            label += f" nu={row['nu']} k={row['k']}"
        line = f"  degree={degree} n={n_train} {label}: regret={row['mean_normalized_regret']:.5f}"
        if "improvement_rel" in row:
            line += f" (vs baseline: {100 * row['improvement_rel']:+.1f}%)"
        print(line)
    return 0


def _cmd_toy(args) -> int:
    problem = TwoEdgeProblem()
    dataset = generate_two_edge_dataset(args.n_train, seed=args.seed)
    cfg = DecisionAwareConfig(
        nu=args.nu, rounds=args.k, predictor="linear", weight_scheme=args.weight_scheme
    )
    _, trace = fit_decision_aware(problem, dataset, cfg)

    z = dataset.contexts[:, 0]
    rows = []
    for k, (weights, predictor) in enumerate(trace.snapshots):
        theta = predictor.theta
        slope_gap = theta[0, 1] - theta[1, 1]
        boundary = (theta[1, 0] - theta[0, 0]) / slope_gap if slope_gap != 0 else float("nan")
        for i in range(dataset.n):
            rows.append(
                [
                    k,
                    i,
                    repr(float(z[i])),
                    repr(float(dataset.costs[i, 0])),
                    repr(float(dataset.costs[i, 1])),
                    repr(float(weights[i])),
                    repr(float(theta[0, 0])),
                    repr(float(theta[0, 1])),
                    repr(float(theta[1, 0])),
                    repr(float(theta[1, 1])),
                    repr(float(boundary)),
                    repr(float(dataset.meta["crossing"])),
                ]
            )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "round", "sample", "z", "c1", "c2", "weight",
                "intercept1", "slope1", "intercept2", "slope2",
                "boundary", "true_crossing",
            ]
        )
        writer.writerows(rows)
    print(f"wrote {args.k + 1} walkthrough rounds to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dapto",
        description="Decision-aware predict-then-optimize benchmarks on grid shortest paths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset CSV (plus .meta.json sidecar)")
    gen.add_argument("--problem", choices=["grid", "two-edge"], default="grid")
    gen.add_argument("--rows", type=int, default=5)
    gen.add_argument("--cols", type=int, default=5)
    gen.add_argument("--degree", type=int, default=1)
    gen.add_argument("--n-train", type=int, default=100)
    gen.add_argument("--n-features", type=int, default=5)
    gen.add_argument("--noise-halfwidth", type=float, default=0.25)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument(
        "--emit-true-predictor",
        metavar="PATH",
        help="also write the exact conditional-mean predictor JSON (degree 1 only)",
    )
    gen.set_defaults(func=_cmd_gen)

    train = sub.add_parser("train", help="fit one method on a dataset CSV")
    train.add_argument("--data", required=True, help="dataset CSV from `gen`")
    train.add_argument("--method", required=True)
    train.add_argument("--nu", type=float, default=0.5)
    train.add_argument("--k", type=int, default=1)
    train.add_argument(
        "--weight-scheme", choices=["decision-difference", "regret"], default="decision-difference"
    )
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", required=True, help="predictor JSON path")
    train.add_argument("--trace-out", help="fit trace / training log CSV path")
    train.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a saved predictor on a dataset CSV")
    ev.add_argument("--predictor", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", help="optional metrics JSON path")
    ev.set_defaults(func=_cmd_eval)

    sweep = sub.add_parser("sweep", help="run a replication sweep from a JSON config")
    sweep.add_argument("--config", help="JSON config (defaults to the desk-scale sweep)")
    sweep.add_argument("--seed", type=int, help="override the config root seed")
    sweep.add_argument("--out", required=True, help="results CSV path")
    sweep.set_defaults(func=_cmd_sweep)

    toy = sub.add_parser("toy", help="two-edge reweighting walkthrough CSV")
    toy.add_argument("--n-train", type=int, default=200)
    toy.add_argument("--nu", type=float, default=0.5)
    toy.add_argument("--k", type=int, default=2)
    toy.add_argument(
        "--weight-scheme", choices=["decision-difference", "regret"], default="decision-difference"
    )
    toy.add_argument("--seed", type=int, default=7)
    toy.add_argument("--out", required=True)
    toy.set_defaults(func=_cmd_toy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
