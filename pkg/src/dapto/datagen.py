"""Synthetic (context, cost) datasets for the shortest-path benchmarks.

Two generators live here: a polynomial data-generating process over grid edge
costs whose degree controls how misspecified an affine predictor is, and a
one-feature two-edge toy whose true cost curves cross at an analytically
known feature value.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_seed

# Feature value where the toy's two mean cost curves intersect: the positive
# root of 1 + 4 z^2 = 3 - 2 z^2.
TWO_EDGE_CROSSING = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class PolynomialDgp:
    """Polynomial cost model: cost_j = (1 + (1 + base_j.z / sqrt(p)))^degree * noise.

    ``base`` is a (n_outputs, n_features) 0/1 mixing matrix drawn once per
    replication. The multiplicative noise is Uniform[1 - noise_halfwidth,
    1 + noise_halfwidth], so it has unit mean and the conditional mean of the
    cost is the polynomial itself. Degree 1 makes the conditional mean an
    exact affine function of the features; higher degrees are increasingly
    nonlinear. For odd degrees the polynomial base can, rarely, go negative
    in the Gaussian tail; even degrees yield strictly positive costs.
    """

    base: np.ndarray
    degree: int = 1
    noise_halfwidth: float = 0.25

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if not 0.0 <= self.noise_halfwidth < 1.0:
            raise ValueError("noise_halfwidth must lie in [0, 1)")
        b = np.asarray(self.base, dtype=float)
        if b.ndim != 2:
            raise ValueError("base must be a (n_outputs, n_features) matrix")
        object.__setattr__(self, "base", b)

    @property
    def n_outputs(self) -> int:
        return self.base.shape[0]

    @property
    def n_features(self) -> int:
        return self.base.shape[1]

    @classmethod
    def draw(
        cls,
        n_outputs: int,
        n_features: int = 5,
        degree: int = 1,
        noise_halfwidth: float = 0.25,
        seed: int = 0,
    ) -> "PolynomialDgp":
        """Draw the Bernoulli(1/2) mixing matrix for one replication."""
        rng = np.random.default_rng(seed)
        base = rng.integers(0, 2, size=(n_outputs, n_features)).astype(float)
        return cls(base=base, degree=degree, noise_halfwidth=noise_halfwidth)

    def conditional_mean(self, z) -> np.ndarray:
        """E[cost | z] for a single feature vector or an (n, p) batch."""
        zz = np.asarray(z, dtype=float)
        single = zz.ndim == 1
        if single:
            zz = zz[None, :]
        if zz.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {zz.shape[1]}"
            )
        lin = zz @ self.base.T / math.sqrt(self.n_features)
        mean = (2.0 + lin) ** self.degree
        return mean[0] if single else mean

    def to_dict(self) -> dict:
        return {
            "base": self.base.tolist(),
            "degree": self.degree,
            "noise_halfwidth": self.noise_halfwidth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolynomialDgp":
        return cls(
            base=np.array(d["base"], dtype=float),
            degree=int(d["degree"]),
            noise_halfwidth=float(d["noise_halfwidth"]),
        )


@dataclass
class Dataset:
    """Paired contexts and realized cost vectors plus generation metadata."""

    contexts: np.ndarray  # (n, p)
    costs: np.ndarray  # (n, d)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.contexts = np.atleast_2d(np.asarray(self.contexts, dtype=float))
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        if self.contexts.shape[0] != self.costs.shape[0]:
            raise ValueError("contexts and costs must have the same number of rows")

    @property
    def n(self) -> int:
        return self.contexts.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.contexts[idx], self.costs[idx], dict(self.meta))

    def save_csv(self, path: str) -> None:
        """Write z_0..z_{p-1}, c_0..c_{d-1} rows plus a JSON metadata sidecar."""
        p = self.contexts.shape[1]
        d = self.costs.shape[1]
        header = [f"z_{j}" for j in range(p)] + [f"c_{j}" for j in range(d)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n):
                writer.writerow(
                    [repr(float(v)) for v in self.contexts[i]]
                    + [repr(float(v)) for v in self.costs[i]]
                )
        with open(path + ".meta.json", "w") as fh:
            json.dump(self.meta, fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def load_dataset_csv(path: str) -> Dataset:
    """Read a dataset CSV written by :meth:`Dataset.save_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    p = sum(1 for name in header if name.startswith("z_"))
    d = len(header) - p
    if p == 0 or d == 0:
        raise ValueError(f"{path}: header must contain z_* and c_* columns")
    data = np.array(rows)
    meta = {}
    sidecar = path + ".meta.json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
    return Dataset(data[:, :p], data[:, p:], meta)


def sample_costs(dgp: PolynomialDgp, Z, seed: int) -> np.ndarray:
    """Realized costs at fixed contexts: conditional mean times uniform noise."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    rng = np.random.default_rng(seed)
    mean = dgp.conditional_mean(Z)
    w = dgp.noise_halfwidth
    eps = rng.uniform(1.0 - w, 1.0 + w, size=mean.shape)
    return mean * eps


def generate_grid_dataset(dgp: PolynomialDgp, n: int, seed: int, problem: str = "grid") -> Dataset:
    """Draw n standard-normal contexts and realized grid edge costs."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, dgp.n_features))
    costs = sample_costs(dgp, Z, seed=derive_noise_seed(seed))
    meta = {
        "problem": problem,
        "seed": seed,
        "degree": dgp.degree,
        "noise_halfwidth": dgp.noise_halfwidth,
        "dgp": dgp.to_dict(),
    }
    return Dataset(Z, costs, meta)


def derive_noise_seed(seed: int) -> int:
    # Contexts and noise use separate streams so costs at fixed contexts can
    # be redrawn (sample_costs) without touching the context stream.
    return derive_seed(seed, "noise")


def two_edge_mean_costs(z) -> np.ndarray:
    """True conditional mean costs of the toy's two edges at feature z.

    Edge 1 rises (1 + 4 z^2), edge 2 falls (3 - 2 z^2); both are nonlinear in
    z and cross exactly once in [0, 1], at ``TWO_EDGE_CROSSING``.
    """
    zz = np.asarray(z, dtype=float)
    single = zz.ndim == 0
    zz = np.atleast_1d(zz)
    mean = np.column_stack([1.0 + 4.0 * zz**2, 3.0 - 2.0 * zz**2])
    return mean[0] if single else mean


def generate_two_edge_dataset(n: int, seed: int, noise_sd: float = 0.25) -> Dataset:
    """One-feature toy: z ~ Uniform[0,1], additive Gaussian cost noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 1.0, size=n)
    mean = two_edge_mean_costs(z)
    costs = mean + noise_sd * rng.standard_normal(mean.shape)
    meta = {
        "problem": "two-edge",
        "seed": seed,
        "noise_sd": noise_sd,
        "crossing": TWO_EDGE_CROSSING,
    }
    return Dataset(z[:, None], costs, meta)
