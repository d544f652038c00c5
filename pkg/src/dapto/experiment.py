"""Experiment harness: replication sweeps, regret metrics, CSV persistence.

A sweep iterates over (replication, degree, n_train, method, nu, rounds)
cells. Within a replication all methods see the same training data and the
same test set, so comparisons are paired; every record carries a hash of its
test set to make the pairing checkable from the output alone. Cell seeds are
derived from the root seed with the documented splitmix64 rule, so a sweep is
fully determined by its config.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import (
    Dataset,
    PolynomialDgp,
    generate_grid_dataset,
    generate_two_edge_dataset,
    sample_costs,
    two_edge_mean_costs,
)
from .predictors import ForestConfig, fit_forest
from .problems import DecisionProblem, GridNetwork, TwoEdgeProblem
from .reweighting import DecisionAwareConfig, fit_decision_aware
from .seeding import derive_seed
from .spoplus import SpoPlusConfig, train_spo_plus

METHODS = (
    "pto-linear",
    "pto-forest",
    "decision-aware-linear",
    "decision-aware-forest",
    "spo-plus",
)

RESULT_COLUMNS = (
    "replication",
    "method",
    "nu",
    "k",
    "degree",
    "n_train",
    "mean_regret",
    "normalized_regret",
    "test_mse",
    "train_seconds",
    "test_set_hash",
    "error",
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition; serializable to/from the JSON config file format."""

    problem: str = "grid"
    rows: int = 5
    cols: int = 5
    degrees: tuple = (1, 8)
    n_train: tuple = (100, 400, 1600)
    n_test: int = 2000
    replications: int = 20
    methods: tuple = ("pto-linear", "decision-aware-linear", "pto-forest", "spo-plus")
    nus: tuple = (0.0, 0.2, 0.4, 0.6, 0.8)
    ks: tuple = (1, 3)
    n_features: int = 5
    noise_halfwidth: float = 0.25
    root_seed: int = 20260810
    regret_reference: str = "true-mean"  # or "realized"
    weight_scheme: str = "decision-difference"
    workers: int = 1
    forest: ForestConfig = field(default_factory=ForestConfig)
    spoplus: SpoPlusConfig = field(default_factory=SpoPlusConfig)

    def __post_init__(self):
        if self.problem not in ("grid", "two-edge"):
            raise ValueError("problem must be 'grid' or 'two-edge'")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        for nu in self.nus:
            if not 0.0 <= nu <= 1.0:
                raise ValueError("nu values must lie in [0, 1]")
        if min(self.replications, self.n_test, *self.n_train) < 1:
            raise ValueError("counts must be positive")
        if self.regret_reference not in ("true-mean", "realized"):
            raise ValueError("regret_reference must be 'true-mean' or 'realized'")

    def make_problem(self) -> DecisionProblem:
        if self.problem == "grid":
            return GridNetwork(self.rows, self.cols)
        return TwoEdgeProblem()

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "problem": self.problem,
            "rows": self.rows,
            "cols": self.cols,
            "degrees": list(self.degrees),
            "n_train": list(self.n_train),
            "n_test": self.n_test,
            "replications": self.replications,
            "methods": list(self.methods),
            "nus": list(self.nus),
            "ks": list(self.ks),
            "n_features": self.n_features,
            "noise_halfwidth": self.noise_halfwidth,
            "root_seed": self.root_seed,
            "regret_reference": self.regret_reference,
            "weight_scheme": self.weight_scheme,
            "workers": self.workers,
            "forest": {
                "n_trees": self.forest.n_trees,
                "max_depth": self.forest.max_depth,
                "min_leaf": self.forest.min_leaf,
                "max_features": self.forest.max_features,
                "bootstrap": self.forest.bootstrap,
                "weight_mode": self.forest.weight_mode,
                "seed": self.forest.seed,
            },
            "spoplus": {
                "learning_rate": self.spoplus.learning_rate,
                "epochs": self.spoplus.epochs,
                "batch_size": self.spoplus.batch_size,
                "time_limit": self.spoplus.time_limit,
                "val_fraction": self.spoplus.val_fraction,
                "init": self.spoplus.init,
                "seed": self.spoplus.seed,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema_version {version}")
        forest = ForestConfig(**d.pop("forest")) if "forest" in d else ForestConfig()
        spo = SpoPlusConfig(**d.pop("spoplus")) if "spoplus" in d else SpoPlusConfig()
        for key in ("degrees", "n_train", "methods", "nus", "ks"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(forest=forest, spoplus=spo, **d)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class ExperimentRecord:
    """One sweep cell's metrics; empty strings mark fields that do not apply."""

    replication: int
    method: str
    nu: float | str
    k: int | str
    degree: int
    n_train: int
    mean_regret: float | str
    normalized_regret: float | str
    test_mse: float | str
    train_seconds: float
    test_set_hash: str
    error: str = ""

    def row(self) -> list:
        def fmt(v):
            return repr(float(v)) if isinstance(v, float) else v

        return [
            self.replication,
            self.method,
            fmt(self.nu),
            self.k,
            self.degree,
            self.n_train,
            fmt(self.mean_regret),
            fmt(self.normalized_regret),
            fmt(self.test_mse),
            repr(self.train_seconds),
            self.test_set_hash,
            self.error,
        ]


def normalized_regret(problem: DecisionProblem, contexts, true_means, predictor) -> float:
    """Total decision regret over a test set divided by the total optimal cost.

    Both regret and the normalizer are evaluated against ``true_means`` (the
    reference cost vectors, typically the conditional means), so a predictor
    whose decisions match the reference optimum scores exactly zero.
    """
    mean_r, norm_r, _ = evaluate_predictor(problem, contexts, true_means, predictor)
    return norm_r


def evaluate_predictor(problem, contexts, reference_costs, predictor):
    """Returns (mean regret, normalized regret, mse) against reference costs."""
    Z = np.atleast_2d(np.asarray(contexts, dtype=float))
    ref = np.atleast_2d(np.asarray(reference_costs, dtype=float))
    if Z.shape[0] == 0:
        raise ValueError("test set must be nonempty")
    preds = predictor.predict_batch(Z)
    x_pred = problem.solve_batch(preds)
    x_opt = problem.solve_batch(ref)
    regrets = np.einsum("ij,ij->i", ref, x_pred - x_opt)
    denom = float(np.einsum("ij,ij->i", ref, x_opt).sum())
    if denom <= 0:
        raise ValueError("normalization denominator must be positive")
    mse_val = float(np.mean((preds - ref) ** 2))
    return float(regrets.mean()), float(regrets.sum() / denom), mse_val


def _hash_test_set(contexts: np.ndarray, costs: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=8)
    h.update(np.ascontiguousarray(contexts).tobytes())
    h.update(np.ascontiguousarray(costs).tobytes())
    return h.hexdigest()


def _replication_data(config: ExperimentConfig, problem, replication: int, degree: int):
    """Train pool, test contexts, and reference costs shared by one replication."""
    root = config.root_seed
    test_rng = np.random.default_rng(derive_seed(root, "test", replication, degree))
    if config.problem == "two-edge":
        train_pool = generate_two_edge_dataset(
            max(config.n_train), seed=derive_seed(root, "train", replication, degree)
        )
        test_Z = test_rng.uniform(0.0, 1.0, size=(config.n_test, 1))
        reference = two_edge_mean_costs(test_Z[:, 0])
        if config.regret_reference == "realized":
            noise_rng = np.random.default_rng(
                derive_seed(root, "test-noise", replication, degree)
            )
            sd = train_pool.meta.get("noise_sd", 0.25)
            reference = reference + sd * noise_rng.standard_normal(reference.shape)
        return train_pool, test_Z, reference
    dgp = PolynomialDgp.draw(
        n_outputs=problem.dim,
        n_features=config.n_features,
        degree=degree,
        noise_halfwidth=config.noise_halfwidth,
        seed=derive_seed(root, "dgp", replication, degree),
    )
    train_pool = generate_grid_dataset(
        dgp,
        max(config.n_train),
        seed=derive_seed(root, "train", replication, degree),
        problem=problem.name,
    )
    test_Z = test_rng.standard_normal((config.n_test, config.n_features))
    if config.regret_reference == "realized":
        reference = sample_costs(
            dgp, test_Z, seed=derive_seed(root, "test-noise", replication, degree)
        )
    else:
        reference = dgp.conditional_mean(test_Z)
    return train_pool, test_Z, reference


def _method_cells(config: ExperimentConfig):
    for method in config.methods:
        if method in ("decision-aware-linear", "decision-aware-forest"):
            for nu in config.nus:
                for k in config.ks:
                    yield method, nu, k
        else:
            yield method, "", ""


def _fit_cell(problem, train, method, nu, k, config: ExperimentConfig, seed: int):
    if method == "pto-linear":
        predictor, _ = fit_decision_aware(
            problem, train, DecisionAwareConfig(nu=0.0, rounds=0, predictor="linear")
        )
        return predictor
    if method == "pto-forest":
        cfg = replace(config.forest, seed=seed)
        return fit_forest(train.contexts, train.costs, None, cfg)
    if method == "decision-aware-linear":
        predictor, _ = fit_decision_aware(
            problem,
            train,
            DecisionAwareConfig(
                nu=nu, rounds=k, predictor="linear", weight_scheme=config.weight_scheme
            ),
        )
        return predictor
    if method == "decision-aware-forest":
        cfg = DecisionAwareConfig(
            nu=nu,
            rounds=k,
            predictor="forest",
            weight_scheme=config.weight_scheme,
            forest=config.forest,
            seed=seed,
        )
        predictor, _ = fit_decision_aware(problem, train, cfg)
        return predictor
    if method == "spo-plus":
        spo_cfg = replace(config.spoplus, seed=seed)
        predictor, _ = train_spo_plus(problem, train, spo_cfg)
        return predictor
    raise ValueError(f"unknown method {method!r}")


def _run_replication(args):
    config, replication = args
    problem = config.make_problem()
    records = []
    for degree in config.degrees:
        train_pool, test_Z, reference = _replication_data(
            config, problem, replication, degree
        )
        test_hash = _hash_test_set(test_Z, reference)
        for n_train in config.n_train:
            train = train_pool.subset(slice(0, n_train))
            for method, nu, k in _method_cells(config):
                seed = derive_seed(
                    config.root_seed, "fit", replication, degree, n_train, method, repr(nu), repr(k)
                )
                t0 = time.monotonic()
                try:
                    predictor = _fit_cell(problem, train, method, nu, k, config, seed)
                    train_seconds = time.monotonic() - t0
                    mean_r, norm_r, mse_r = evaluate_predictor(
                        problem, test_Z, reference, predictor
                    )
                    records.append(
                        ExperimentRecord(
                            replication, method, nu, k, degree, n_train,
                            mean_r, norm_r, mse_r, train_seconds, test_hash,
                        )
                    )
                except Exception as exc:  # record the failure, keep sweeping
                    records.append(
                        ExperimentRecord(
                            replication, method, nu, k, degree, n_train,
                            "", "", "", time.monotonic() - t0, test_hash,
                            error=f"{type(exc).__name__}: {exc}",
                        )
                    )
    return records


def _sort_key(record: ExperimentRecord):
    nu = record.nu if isinstance(record.nu, float) else -1.0
    k = record.k if isinstance(record.k, int) else -1
    return (record.replication, record.degree, record.n_train, record.method, nu, k)


def run_experiment(config: ExperimentConfig, output_path: str | None = None) -> list:
    """Run every sweep cell; returns records in canonical order.

    Records stream to ``output_path`` as replications finish; the file is
    rewritten in canonical (replication, degree, n_train, method, nu, k)
    order at the end so concurrent execution cannot reorder the output.
    """
    jobs = [(config, rep) for rep in range(config.replications)]
    records: list[ExperimentRecord] = []

    writer = None
    fh = None
    if output_path:
        fh = open(output_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)

    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for batch in pool.map(_run_replication, jobs):
                    records.extend(batch)
                    if writer:
                        for r in batch:
                            writer.writerow(r.row())
                        fh.flush()
        else:
            for job in jobs:
                batch = _run_replication(job)
                records.extend(batch)
                if writer:
                    for r in batch:
                        writer.writerow(r.row())
                    fh.flush()
    finally:
        if fh:
            fh.close()

    records.sort(key=_sort_key)
    if output_path:
        write_records_csv(records, output_path)
    return records


def write_records_csv(records, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in records:
            writer.writerow(r.row())


def read_records_csv(path: str) -> list:
    """Read a results CSV back into ExperimentRecord objects."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"results file missing columns: {sorted(missing)}")
        for row in reader:
            records.append(
                ExperimentRecord(
                    replication=int(row["replication"]),
                    method=row["method"],
                    nu=float(row["nu"]) if row["nu"] != "" else "",
                    k=int(row["k"]) if row["k"] != "" else "",
                    degree=int(row["degree"]),
                    n_train=int(row["n_train"]),
                    mean_regret=float(row["mean_regret"]) if row["mean_regret"] != "" else "",
                    normalized_regret=(
                        float(row["normalized_regret"]) if row["normalized_regret"] != "" else ""
                    ),
                    test_mse=float(row["test_mse"]) if row["test_mse"] != "" else "",
                    train_seconds=float(row["train_seconds"]),
                    test_set_hash=row["test_set_hash"],
                    error=row["error"],
                )
            )
    return records


def pick_best_nu(nus, scores) -> float:
    """Smallest nu attaining the minimal score."""
    nus = list(nus)
    scores = list(scores)
    if not nus or len(nus) != len(scores):
        raise ValueError("nus and scores must be equal-length nonempty lists")
    best = min(zip(scores, nus), key=lambda t: (t[0], t[1]))
    return best[1]


def select_nu(
    problem: DecisionProblem,
    dataset: Dataset,
    nus,
    rounds: int = 1,
    predictor: str = "linear",
    weight_scheme: str = "decision-difference",
    val_fraction: float = 0.2,
    seed: int = 0,
) -> tuple[float, list]:
    """Grid-search nu by realized-cost regret on a held-out validation split.

    Returns (best nu, [(nu, validation normalized regret), ...]); ties go to
    the smaller nu.
    """
    nus = list(nus)
    if not nus:
        raise ValueError("nu candidate list must be nonempty")
    rng = np.random.default_rng(seed)
    n = dataset.n
    n_val = max(1, int(n * val_fraction)) if (n >= 2 and val_fraction > 0) else 0
    perm = rng.permutation(n)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    if n_val == 0 or len(fit_idx) == 0:
        val_idx = fit_idx = np.arange(n)
    fit_set = dataset.subset(fit_idx)
    scores = []
    for nu in nus:
        cfg = DecisionAwareConfig(
            nu=nu, rounds=rounds, predictor=predictor, weight_scheme=weight_scheme, seed=seed
        )
        fitted, _ = fit_decision_aware(problem, fit_set, cfg)
        _, norm_r, _ = evaluate_predictor(
            problem, dataset.contexts[val_idx], dataset.costs[val_idx], fitted
        )
        scores.append(norm_r)
    table = list(zip(nus, scores))
    return pick_best_nu(nus, scores), table


def summarize_improvement(records, degree: int, n_train: int, baseline: str = "pto-linear"):
    """Mean normalized regret per (method, nu, k) plus improvement vs the baseline.

    Returns a list of dicts with mean regret, absolute improvement, and
    relative improvement against the nu=0 predict-then-optimize baseline.
    """
    cells: dict = {}
    for r in records:
        if r.error or r.degree != degree or r.n_train != n_train:
            continue
        cells.setdefault((r.method, r.nu, r.k), []).append(r.normalized_regret)
    base_keys = [key for key in cells if key[0] == baseline]
    base = None
    if base_keys:
        base = float(np.mean(cells[base_keys[0]]))
    rows = []
    for (method, nu, k), vals in sorted(cells.items(), key=lambda t: (t[0][0], str(t[0][1]))):
        mean_val = float(np.mean(vals))
        row = {
            "method": method,
            "nu": nu,
            "k": k,
            "mean_normalized_regret": mean_val,
            "n_replications": len(vals),
        }
        if base is not None and base > 0:
            row["improvement_abs"] = base - mean_val
            row["improvement_rel"] = (base - mean_val) / base
        rows.append(row)
    return rows
