"""Cost predictors trainable under per-sample weights.

Two predictor families share the same predict interface: a closed-form
weighted least squares linear model (one regression per cost coordinate on a
shared design matrix) and a weighted regression forest built from scratch so
that trees are serializable and weights can enter either through bootstrap
resampling or through the split criterion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# shared helpers


def _as_design(Z) -> np.ndarray:
    zz = np.asarray(Z, dtype=float)
    if zz.ndim == 1:
        zz = zz[:, None]
    return zz


def _as_targets(C, n: int) -> np.ndarray:
    cc = np.asarray(C, dtype=float)
    if cc.ndim == 1:
        cc = cc[:, None]
    if cc.shape[0] != n:
        raise ValueError("context and cost row counts differ")
    return cc


def normalize_weights(weights, n: int) -> np.ndarray:
    """Validate sample weights and rescale them to mean 1."""
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights must have shape ({n},), got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total == 0:
        raise ValueError("weights must not all be zero")
    return w / (total / n)


# ---------------------------------------------------------------------------
# linear predictor


@dataclass
class LinearPredictor:
    """Affine cost model c_hat(z) = theta @ [1, z].

    ``theta`` has one row per cost coordinate and p+1 columns (intercept
    first). ``ridge_used``/``ridge_fallback`` record whether the fit needed a
    stabilizing ridge term.
    """

    theta: np.ndarray
    ridge_used: float = 0.0
    ridge_fallback: bool = False

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))

    @property
    def n_features(self) -> int:
        return self.theta.shape[1] - 1

    @property
    def n_outputs(self) -> int:
        return self.theta.shape[0]

    def predict(self, z) -> np.ndarray:
        zz = np.asarray(z, dtype=float)
        if zz.ndim == 0:
            zz = zz[None]
        if zz.ndim != 1 or zz.shape[0] != self.n_features:
            raise ValueError(f"expected a feature vector of length {self.n_features}")
        return self.theta[:, 0] + self.theta[:, 1:] @ zz

    def predict_batch(self, Z) -> np.ndarray:
        zz = _as_design(Z)
        if zz.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {zz.shape[1]}")
        return self.theta[:, 0] + zz @ self.theta[:, 1:].T

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "theta": self.theta.tolist(),
            "ridge_used": self.ridge_used,
            "ridge_fallback": self.ridge_fallback,
        }


def fit_weighted_least_squares(Z, C, weights=None, ridge: float = 0.0) -> LinearPredictor:
    """Closed-form weighted least squares with an intercept.

    Solves the weighted normal equations per cost coordinate (one Cholesky
    factorization, d right-hand sides). Weights are normalized to mean 1
    first. If the Gram matrix is singular at ridge=0, a minimal scale-aware
    ridge is added automatically and flagged on the returned predictor.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    zz = _as_design(Z)
    n, p = zz.shape
    cc = _as_targets(C, n)
    w = normalize_weights(weights, n)

    X = np.column_stack([np.ones(n), zz])
    Xw = X * w[:, None]
    gram = X.T @ Xw
    rhs = Xw.T @ cc

    ridge_used = ridge
    fallback = False
    if ridge > 0:
        gram = gram + ridge * np.eye(p + 1)
    for attempt in range(2):
        try:
            chol = np.linalg.cholesky(gram)
            break
        except np.linalg.LinAlgError:
            if attempt == 1:
                raise
            # minimal scale-aware stabilization of a singular Gram matrix
            extra = 1e-8 * np.trace(gram) / (p + 1)
            if extra <= 0:
                extra = 1e-8
            gram = gram + extra * np.eye(p + 1)
            ridge_used = ridge + extra
            fallback = True
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    return LinearPredictor(theta=coef.T, ridge_used=ridge_used, ridge_fallback=fallback)


def mse(predictor, Z, C, weights=None) -> float:
    """Weighted mean of per-coordinate squared errors.

    The average runs over coordinates and over samples, with sample weights
    normalized to mean 1, so rescaling all weights leaves the value unchanged.
    """
    zz = _as_design(Z)
    cc = _as_targets(C, zz.shape[0])
    w = normalize_weights(weights, zz.shape[0])
    err = predictor.predict_batch(zz) - cc
    return float(np.mean(w[:, None] * err**2))


def mse_gradient(predictor: LinearPredictor, Z, C, weights=None) -> np.ndarray:
    """Analytic gradient of :func:`mse` with respect to ``theta``.

    Per sample the squared-error gradient is 2 (c_hat - c) d c_hat / d theta;
    averaging matches the normalization used by :func:`mse`.
    """
    zz = _as_design(Z)
    n = zz.shape[0]
    cc = _as_targets(C, n)
    w = normalize_weights(weights, n)
    X = np.column_stack([np.ones(n), zz])
    err = predictor.predict_batch(zz) - cc  # (n, d)
    d = cc.shape[1]
    return 2.0 * (err * w[:, None]).T @ X / (n * d)


# ---------------------------------------------------------------------------
# regression forest


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; ``weight_mode`` picks how sample weights enter.

    "resample": each tree bootstraps indices with probability proportional to
    the weights. "split": bootstrap is uniform and the weights multiply the
    split criterion directly.
    """

    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    max_features: int | None = None  # default ceil(p / 3)
    bootstrap: bool = True
    weight_mode: str = "resample"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.weight_mode not in ("resample", "split"):
            raise ValueError("weight_mode must be 'resample' or 'split'")


class _Tree:
    """Flat-array regression tree: feature < 0 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.asarray(value, dtype=float)

    def predict_batch(self, Z: np.ndarray) -> np.ndarray:
        node = np.zeros(Z.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = Z[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_Tree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _build_tree(Z, C, w, config: ForestConfig, rng: np.random.Generator) -> _Tree:
    n, p = Z.shape
    d = C.shape[1]
    n_try = config.max_features or max(1, math.ceil(p / 3))
    n_try = min(n_try, p)

    features, thresholds, lefts, rights, values = [], [], [], [], []

    def new_node():
        features.append(-1)
        thresholds.append(0.0)
        lefts.append(-1)
        rights.append(-1)
        values.append(np.zeros(d))
        return len(features) - 1

    def best_split(idx):
        zi = Z[idx]
        wi = w[idx]
        ci = C[idx]
        wc = wi[:, None] * ci
        wc2_row = (wi[:, None] * ci**2).sum(axis=1)  # scalar per sample
        best = (np.inf, -1, 0.0)
        for f in rng.choice(p, size=n_try, replace=False):
            order = np.argsort(zi[:, f], kind="stable")
            zs = zi[order, f]
            cum_w = np.cumsum(wi[order])
            cum_wc = np.cumsum(wc[order], axis=0)
            cum_wc2 = np.cumsum(wc2_row[order])
            tot_w, tot_wc, tot_wc2 = cum_w[-1], cum_wc[-1], cum_wc2[-1]

            m = len(idx)
            cut = np.arange(config.min_leaf, m - config.min_leaf + 1)
            if cut.size == 0:
                continue
            valid = zs[cut - 1] < zs[np.minimum(cut, m - 1)]
            cut = cut[valid]
            if cut.size == 0:
                continue
            wl = cum_w[cut - 1]
            wr = tot_w - wl
            ok = (wl > 0) & (wr > 0)
            cut, wl, wr = cut[ok], wl[ok], wr[ok]
            if cut.size == 0:
                continue
            sl = cum_wc[cut - 1]
            sr = tot_wc - sl
            sse = (
                cum_wc2[cut - 1]
                - (sl**2).sum(axis=1) / wl
                + (tot_wc2 - cum_wc2[cut - 1])
                - (sr**2).sum(axis=1) / wr
            )
            k = int(np.argmin(sse))
            if sse[k] < best[0]:
                thr = 0.5 * (zs[cut[k] - 1] + zs[cut[k]])
                best = (float(sse[k]), int(f), float(thr))
        return best

    def grow(idx, depth):
        node = new_node()
        wi = w[idx]
        values[node] = (wi[:, None] * C[idx]).sum(axis=0) / wi.sum()
        if depth >= config.max_depth or len(idx) < 2 * config.min_leaf:
            return node
        sse, f, thr = best_split(idx)
        if f < 0:
            return node
        go_left = Z[idx, f] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        if len(left_idx) < config.min_leaf or len(right_idx) < config.min_leaf:
            return node
        features[node] = f
        thresholds[node] = thr
        lefts[node] = grow(left_idx, depth + 1)
        rights[node] = grow(right_idx, depth + 1)
        return node

    grow(np.flatnonzero(w > 0), 0)
    return _Tree(features, thresholds, lefts, rights, np.array(values))


@dataclass
class ForestPredictor:
    """Average of regression trees; predictions are leaf mean cost vectors."""

    trees: list = field(default_factory=list)
    n_features: int = 0
    n_outputs: int = 0
    config: ForestConfig = field(default_factory=ForestConfig)

    def predict(self, z) -> np.ndarray:
        return self.predict_batch(np.asarray(z, dtype=float)[None, :])[0]

    def predict_batch(self, Z) -> np.ndarray:
        zz = _as_design(Z)
        if zz.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {zz.shape[1]}")
        out = np.zeros((zz.shape[0], self.n_outputs))
        for tree in self.trees:
            out += tree.predict_batch(zz)
        return out / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "kind": "forest",
            "n_features": self.n_features,
            "n_outputs": self.n_outputs,
            "config": {
                "n_trees": self.config.n_trees,
                "max_depth": self.config.max_depth,
                "min_leaf": self.config.min_leaf,
                "max_features": self.config.max_features,
                "bootstrap": self.config.bootstrap,
                "weight_mode": self.config.weight_mode,
                "seed": self.config.seed,
            },
            "trees": [t.to_dict() for t in self.trees],
        }


def fit_forest(Z, C, weights=None, config: ForestConfig | None = None) -> ForestPredictor:
    """Fit a weighted regression forest; deterministic given (data, weights, config)."""
    config = config or ForestConfig()
    zz = _as_design(Z)
    n, p = zz.shape
    cc = _as_targets(C, n)
    w = normalize_weights(weights, n)
    if n < config.min_leaf:
        raise ValueError("need at least min_leaf samples")

    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        if config.bootstrap:
            if config.weight_mode == "resample":
                probs = w / w.sum()
                counts = rng.multinomial(n, probs)
                wt = counts.astype(float)
            else:
                counts = rng.multinomial(n, np.full(n, 1.0 / n))
                wt = counts * w
            if wt.sum() == 0:
                wt = w.copy()
        else:
            wt = w.copy()
        trees.append(_build_tree(zz, cc, wt, config, rng))
    return ForestPredictor(trees=trees, n_features=p, n_outputs=cc.shape[1], config=config)


# ---------------------------------------------------------------------------
# serialization


def predictor_to_json(predictor, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(predictor.to_dict(), fh)


def predictor_from_dict(d: dict):
    if d.get("kind") == "linear":
        return LinearPredictor(
            theta=np.array(d["theta"], dtype=float),
            ridge_used=d.get("ridge_used", 0.0),
            ridge_fallback=d.get("ridge_fallback", False),
        )
    if d.get("kind") == "forest":
        cfg = ForestConfig(**d["config"])
        return ForestPredictor(
            trees=[_Tree.from_dict(t) for t in d["trees"]],
            n_features=d["n_features"],
            n_outputs=d["n_outputs"],
            config=cfg,
        )
    raise ValueError(f"unknown predictor kind: {d.get('kind')!r}")


def predictor_from_json(path: str):
    with open(path) as fh:
        return predictor_from_dict(json.load(fh))
