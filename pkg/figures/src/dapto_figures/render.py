"""Render benchmark figures from the results CSV; aggregation only, no math.

Four figure kinds: regret learning curves with one series per mixture weight,
the reweighting-rounds comparison, the method benchmark bars, and the
two-edge walkthrough panels. Every figure is written as both PNG and SVG with
date metadata stripped, so rerendering the same CSV reproduces identical
files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

KINDS = ("learning-curve", "k-sweep", "benchmark", "toy-walkthrough")

RESULTS_COLUMNS = {
    "learning-curve": ["replication", "method", "nu", "k", "degree", "n_train", "normalized_regret"],
    "k-sweep": ["replication", "method", "nu", "k", "degree", "n_train", "normalized_regret"],
    "benchmark": ["replication", "method", "nu", "k", "degree", "n_train", "normalized_regret"],
    "toy-walkthrough": [
        "round", "sample", "z", "c1", "c2", "weight",
        "intercept1", "slope1", "intercept2", "slope2", "boundary", "true_crossing",
    ],
}

# fixed style, including the SVG id salt, so identical inputs render
# byte-identical outputs
plt.rcParams.update(
    {"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3, "svg.hashsalt": "dapto"}
)


class SchemaError(ValueError):
    """The CSV is missing columns the figure kind needs."""


class NoDataError(ValueError):
    """Nothing left to plot after filtering."""


@dataclass
class PlotSpec:
    csv: str
    kind: str
    out: str
    bands: bool = True
    method: str | None = None
    degree: int | None = None
    nu: float | None = None
    k: int | None = None
    n_train: int | None = None
    group_by: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")


def _load(spec: PlotSpec) -> pd.DataFrame:
    frame = pd.read_csv(spec.csv)
    missing = [c for c in RESULTS_COLUMNS[spec.kind] if c not in frame.columns]
    if missing:
        raise SchemaError(f"{spec.csv} is missing columns: {missing}")
    return frame


def _filtered(spec: PlotSpec, frame: pd.DataFrame) -> pd.DataFrame:
    if "error" in frame.columns:
        frame = frame[frame["error"].isna() | (frame["error"] == "")]
    for column, value in (
        ("method", spec.method),
        ("degree", spec.degree),
        ("nu", spec.nu),
        ("k", spec.k),
        ("n_train", spec.n_train),
    ):
        if value is not None and column in frame.columns:
            frame = frame[frame[column] == value]
    if frame.empty:
        raise NoDataError(f"no data rows left for {spec.kind} after filtering")
    return frame


def _aggregate(frame: pd.DataFrame, keys: list) -> pd.DataFrame:
    """Group means and standard errors of the normalized regret."""
    grouped = frame.groupby(keys)["normalized_regret"]
    table = grouped.agg(["mean", "std", "count"]).reset_index()
    table["stderr"] = table["std"] / np.sqrt(table["count"])
    table.loc[table["count"] <= 1, "stderr"] = 0.0
    return table


def _save(fig, out: str) -> list:
    base, ext = os.path.splitext(out)
    if ext.lower() in (".png", ".svg"):
        out = base
    paths = []
    for fmt in ("png", "svg"):
        path = f"{out}.{fmt}"
        fig.savefig(path, metadata={"Date": None}, bbox_inches="tight")
        paths.append(path)
    plt.close(fig)
    return paths


def _plot_series(ax, table, series_key, label_prefix, bands):
    for value, part in table.groupby(series_key):
        part = part.sort_values("n_train")
        line = ax.plot(part["n_train"], part["mean"], marker="o", label=f"{label_prefix}{value}")
        if bands:
            color = line[0].get_color()
            ax.fill_between(
                part["n_train"],
                part["mean"] - part["stderr"],
                part["mean"] + part["stderr"],
                alpha=0.2,
                color=color,
            )
    ax.set_xscale("log")
    ax.set_xlabel("training samples")
    ax.set_ylabel("normalized regret")
    ax.legend()


def render(spec: PlotSpec):
    """Render one figure; returns (written paths, aggregated table)."""
    frame = _load(spec)
    if spec.kind == "learning-curve":
        return _render_learning_curve(spec, frame)
    if spec.kind == "k-sweep":
        return _render_k_sweep(spec, frame)
    if spec.kind == "benchmark":
        return _render_benchmark(spec, frame)
    return _render_toy(spec, frame)


def _render_learning_curve(spec: PlotSpec, frame: pd.DataFrame):
    if spec.method is None:
        spec.method = "decision-aware-linear"
    if spec.k is None and not frame[frame["method"] == spec.method].empty:
        ks = frame.loc[frame["method"] == spec.method, "k"].dropna()
        spec.k = int(ks.min()) if len(ks) else None
    data = _filtered(spec, frame)
    table = _aggregate(data, ["nu", "n_train"])
    fig, ax = plt.subplots(figsize=(6, 4))
    _plot_series(ax, table, "nu", "nu=", spec.bands)
    degree = f" degree={spec.degree}" if spec.degree is not None else ""
    ax.set_title(f"{spec.method}{degree}: regret learning curves")
    return _save(fig, spec.out), table


def _render_k_sweep(spec: PlotSpec, frame: pd.DataFrame):
    if spec.method is None:
        spec.method = "decision-aware-linear"
    data = _filtered(spec, frame)
    if spec.nu is None:
        by_nu = data.groupby("nu")["normalized_regret"].mean()
        best_nu = by_nu.idxmin()
        data = data[data["nu"] == best_nu]
    table = _aggregate(data, ["k", "n_train"])
    fig, ax = plt.subplots(figsize=(6, 4))
    _plot_series(ax, table, "k", "K=", spec.bands)
    ax.set_title(f"{spec.method}: reweighting rounds")
    return _save(fig, spec.out), table


def _render_benchmark(spec: PlotSpec, frame: pd.DataFrame):
    data = _filtered(spec, frame)
    if spec.n_train is None:
        data = data[data["n_train"] == data["n_train"].max()]
    # decision-aware methods enter at their best (nu, k) combination
    rows = []
    for method, part in data.groupby("method"):
        if part["nu"].notna().any():
            scores = part.groupby(["nu", "k"])["normalized_regret"].mean()
            nu_best, k_best = scores.idxmin()
            part = part[(part["nu"] == nu_best) & (part["k"] == k_best)]
            label = f"{method}\n(nu={nu_best}, K={int(k_best)})"
        else:
            label = method
        rows.append(
            {
                "method": label,
                "mean": part["normalized_regret"].mean(),
                "stderr": part["normalized_regret"].std() / np.sqrt(len(part))
                if len(part) > 1
                else 0.0,
            }
        )
    table = pd.DataFrame(rows).sort_values("mean").reset_index(drop=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(
        table["method"],
        table["mean"],
        yerr=table["stderr"] if spec.bands else None,
        capsize=4,
        color="tab:blue",
    )
    ax.set_ylabel("normalized regret")
    ax.set_title("method benchmark" + (f" (degree={spec.degree})" if spec.degree is not None else ""))
    ax.tick_params(axis="x", labelsize=8)
    return _save(fig, spec.out), table


def _render_toy(spec: PlotSpec, frame: pd.DataFrame):
    data = _filtered(spec, frame)
    rounds = sorted(data["round"].unique())
    fig, axes = plt.subplots(len(rounds), 2, figsize=(9, 2.8 * len(rounds)), squeeze=False)
    crossing = data["true_crossing"].iloc[0]
    for row, rnd in enumerate(rounds):
        part = data[data["round"] == rnd].sort_values("z")
        wax, fax = axes[row]
        wax.scatter(part["z"], part["weight"], s=10, color="tab:purple")
        wax.set_ylabel(f"round {rnd}\nweight")
        wax.axvline(crossing, color="black", linestyle=":", linewidth=1)
        fax.scatter(part["z"], part["c1"], s=8, color="tab:blue", alpha=0.5, label="edge 1")
        fax.scatter(part["z"], part["c2"], s=8, color="tab:orange", alpha=0.5, label="edge 2")
        grid = np.linspace(part["z"].min(), part["z"].max(), 50)
        fax.plot(grid, part["intercept1"].iloc[0] + part["slope1"].iloc[0] * grid, color="tab:blue")
        fax.plot(grid, part["intercept2"].iloc[0] + part["slope2"].iloc[0] * grid, color="tab:orange")
        fax.axvline(crossing, color="black", linestyle=":", linewidth=1, label="true crossing")
        fax.axvline(part["boundary"].iloc[0], color="red", linestyle="--", linewidth=1, label="fitted boundary")
        if row == 0:
            fax.legend(fontsize=7)
    for ax in axes[-1]:
        ax.set_xlabel("feature z")
    table = data.groupby("round")[["weight", "boundary"]].mean().reset_index()
    return _save(fig, spec.out), table
