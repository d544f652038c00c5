"""SPO+ surrogate loss, its subgradient, and a minibatch SGD trainer.

Everything is written under the minimization convention. The surrogate upper
bounds the decision regret, is convex in the predicted costs, and needs only
two oracle calls per evaluation; both properties are exercised directly by
the test suite rather than assumed.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .predictors import LinearPredictor, fit_weighted_least_squares
from .problems import DecisionProblem, _as_cost_matrix


def spo_plus_loss(problem: DecisionProblem, c_pred, c_true) -> float:
    """Convex surrogate of the decision regret of predicting ``c_pred``.

    Computed as -z*(2 c_pred - c_true) + 2 c_pred . x*(c_true) - z*(c_true)
    where z*(.) is the optimal objective value; zero when the prediction is
    exact and never below the decision regret.
    """
    cp, _ = _as_cost_matrix(c_pred, problem.dim)
    ct, _ = _as_cost_matrix(c_true, problem.dim)
    x_true = problem.solve_batch(ct)[0]
    z_true = float(ct[0] @ x_true)
    z_q = float(problem.optimal_values(2.0 * cp[0] - ct[0]))
    return -z_q + 2.0 * float(cp[0] @ x_true) - z_true


def spo_plus_subgradient(problem: DecisionProblem, c_pred, c_true) -> np.ndarray:
    """A subgradient of :func:`spo_plus_loss` with respect to ``c_pred``.

    Returns 2 (x*(c_true) - x*(2 c_pred - c_true)), so a step along the
    negative direction decreases the loss; each entry lies in [-2, 2].
    """
    cp, _ = _as_cost_matrix(c_pred, problem.dim)
    ct, _ = _as_cost_matrix(c_true, problem.dim)
    x_true = problem.solve_batch(ct)[0]
    x_q = problem.solve_batch(2.0 * cp - ct)[0]
    return 2.0 * (x_true - x_q)


@dataclass(frozen=True)
class SpoPlusConfig:
    """SGD settings; the step size decays as lr / sqrt(step + 1).

    The wall-clock limit is checked at epoch boundaries only, so runs that
    finish within the limit are reproducible bit for bit under a fixed seed.
    """

    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    time_limit: float = 300.0
    val_fraction: float = 0.2
    init: str = "pilot"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.init not in ("pilot", "zero"):
            raise ValueError("init must be 'pilot' or 'zero'")


@dataclass
class SpoTrainingLog:
    """Per-epoch training record: (epoch, train_spo_loss, val_regret, elapsed_seconds)."""

    rows: list = field(default_factory=list)
    epochs_completed: int = 0
    time_limit_fired: bool = False

    def save_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_spo_loss", "val_regret", "elapsed_seconds"])
            for row in self.rows:
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def _batch_spo_losses(problem, preds, costs, x_true, z_true):
    q = 2.0 * preds - costs
    xq = problem.solve_batch(q)
    zq = np.einsum("ij,ij->i", q, xq)
    return -zq + 2.0 * np.einsum("ij,ij->i", preds, x_true) - z_true, xq


def train_spo_plus(
    problem: DecisionProblem, dataset: Dataset, config: SpoPlusConfig | None = None
) -> tuple[LinearPredictor, SpoTrainingLog]:
    """Minibatch subgradient descent on the SPO+ loss of a linear predictor.

    The dataset is split into train/validation parts; the parameters with the
    best running validation SPO+ loss are returned. Training stops when the
    epoch budget is exhausted or the wall-clock limit fires at an epoch
    boundary, whichever comes first.
    """
    config = config or SpoPlusConfig()
    if dataset.n == 0:
        raise ValueError("dataset must be nonempty")
    start = time.monotonic()
    rng = np.random.default_rng(config.seed)

    n = dataset.n
    n_val = int(n * config.val_fraction) if n >= 5 else 0
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if n_val == 0:
        val_idx = train_idx

    Z = dataset.contexts
    # Decisions are invariant to positive cost scaling, so train on costs
    # rescaled to unit mean magnitude; this keeps the learning rate portable
    # across cost scales. The returned coefficients are scaled back.
    scale = float(np.mean(np.abs(dataset.costs)))
    if scale == 0.0:
        scale = 1.0
    C = dataset.costs / scale
    X = np.column_stack([np.ones(n), Z])
    x_star = problem.solve_batch(C)
    z_star = np.einsum("ij,ij->i", C, x_star)

    d = C.shape[1]
    if config.init == "pilot":
        theta = fit_weighted_least_squares(Z[train_idx], C[train_idx]).theta
    else:
        theta = np.zeros((d, Z.shape[1] + 1))

    def val_metrics(th):
        preds = X[val_idx] @ th.T
        losses, _ = _batch_spo_losses(
            problem, preds, C[val_idx], x_star[val_idx], z_star[val_idx]
        )
        x_pred = problem.solve_batch(preds)
        regret = np.einsum("ij,ij->i", C[val_idx], x_pred - x_star[val_idx])
        denom = z_star[val_idx].sum()
        norm_regret = regret.sum() / denom if denom != 0 else regret.mean()
        return float(losses.mean()), float(norm_regret)

    best_theta = theta.copy()
    best_val, _ = val_metrics(theta)
    log = SpoTrainingLog()
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(train_idx)
        epoch_losses = []
        for lo in range(0, len(order), config.batch_size):
            b = order[lo : lo + config.batch_size]
            preds = X[b] @ theta.T
            losses, xq = _batch_spo_losses(problem, preds, C[b], x_star[b], z_star[b])
            epoch_losses.append(losses.mean())
            g_pred = 2.0 * (x_star[b] - xq)  # (m, d) subgradient in prediction space
            grad = g_pred.T @ X[b] / len(b)
            lr = config.learning_rate / np.sqrt(step + 1.0)
            theta = theta - lr * grad
            step += 1
        val_loss, val_regret = val_metrics(theta)
        if val_loss < best_val:
            best_val = val_loss
            best_theta = theta.copy()
        elapsed = time.monotonic() - start
        log.rows.append((epoch, float(np.mean(epoch_losses)) * scale, val_regret, elapsed))
        log.epochs_completed = epoch + 1
        if elapsed > config.time_limit:
            log.time_limit_fired = True
            break
    return LinearPredictor(theta=best_theta * scale), log
