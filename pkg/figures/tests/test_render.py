import csv
import math

import pytest

from dapto_figures import NoDataError, PlotSpec, SchemaError, render
from dapto_figures.cli import main

RESULT_COLUMNS = [
    "replication", "method", "nu", "k", "degree", "n_train",
    "mean_regret", "normalized_regret", "test_mse", "train_seconds",
    "test_set_hash", "error",
]

TOY_COLUMNS = [
    "round", "sample", "z", "c1", "c2", "weight",
    "intercept1", "slope1", "intercept2", "slope2", "boundary", "true_crossing",
]


def write_results_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            base = {
                "mean_regret": 1.0, "test_mse": 1.0, "train_seconds": 0.1,
                "test_set_hash": "abc", "error": "", "degree": 8, "k": 1,
            }
            base.update(row)
            writer.writerow(base)


def sample_results(path):
    rows = []
    value = 0.0
    for rep in range(4):
        for n_train, base in ((100, 0.5), (400, 0.4), (1600, 0.3)):
            rows.append({
                "replication": rep, "method": "pto-linear", "nu": "", "k": "",
                "n_train": n_train, "normalized_regret": base + 0.01 * rep,
            })
            for nu in (0.2, 0.8):
                for k in (1, 3):
                    rows.append({
                        "replication": rep, "method": "decision-aware-linear",
                        "nu": nu, "k": k, "n_train": n_train,
                        "normalized_regret": base * (1 - nu / 2) + 0.01 * rep + 0.001 * k,
                    })
            rows.append({
                "replication": rep, "method": "spo-plus", "nu": "", "k": "",
                "n_train": n_train, "normalized_regret": base / 3 + 0.01 * rep,
            })
    write_results_csv(path, rows)
    return rows


def write_toy_csv(path, rounds=3, n=20):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TOY_COLUMNS)
        writer.writeheader()
        for rnd in range(rounds):
            for i in range(n):
                z = i / (n - 1)
                writer.writerow({
                    "round": rnd, "sample": i, "z": z,
                    "c1": 1 + 4 * z * z, "c2": 3 - 2 * z * z,
                    "weight": 1.0 if rnd == 0 else 0.5 + (i % 3),
                    "intercept1": 1.0 / (rnd + 1), "slope1": 4.0,
                    "intercept2": 3.0, "slope2": -2.0 - rnd,
                    "boundary": 0.4 + 0.05 * rnd, "true_crossing": 1 / math.sqrt(3),
                })


def test_single_series_three_points(tmp_path):
    path = tmp_path / "r.csv"
    rows = []
    for rep in range(3):
        for n_train in (100, 400, 1600):
            rows.append({
                "replication": rep, "method": "decision-aware-linear", "nu": 0.5,
                "k": 1, "n_train": n_train, "normalized_regret": 0.3 + 0.01 * rep,
            })
    write_results_csv(path, rows)
    paths, table = render(PlotSpec(csv=str(path), kind="learning-curve", out=str(tmp_path / "fig")))
    assert [p.endswith(".png") or p.endswith(".svg") for p in paths] == [True, True]
    assert len(table) == 3
    assert set(table["nu"]) == {0.5}


def test_learning_curve_aggregation_matches_independent_means(tmp_path):
    path = tmp_path / "r.csv"
    sample_results(path)
    _, table = render(
        PlotSpec(csv=str(path), kind="learning-curve", out=str(tmp_path / "fig"), k=1)
    )
    # independent aggregation with the csv module and plain sums
    sums, counts = {}, {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["method"] != "decision-aware-linear" or row["k"] != "1":
                continue
            key = (float(row["nu"]), int(row["n_train"]))
            sums[key] = sums.get(key, 0.0) + float(row["normalized_regret"])
            counts[key] = counts.get(key, 0) + 1
    assert len(table) == len(sums)
    for _, r in table.iterrows():
        key = (r["nu"], r["n_train"])
        assert abs(r["mean"] - sums[key] / counts[key]) < 1e-12


def test_k_sweep_has_one_series_per_k(tmp_path):
    path = tmp_path / "r.csv"
    sample_results(path)
    _, table = render(PlotSpec(csv=str(path), kind="k-sweep", out=str(tmp_path / "fig")))
    assert set(table["k"]) == {1, 3}
    # best nu by mean is 0.8 in the fixture
    assert len(table) == 6


def test_benchmark_uses_best_nu_for_decision_aware(tmp_path):
    path = tmp_path / "r.csv"
    sample_results(path)
    _, table = render(PlotSpec(csv=str(path), kind="benchmark", out=str(tmp_path / "fig")))
    labels = list(table["method"])
    assert any(l.startswith("decision-aware-linear") and "nu=0.8" in l for l in labels)
    assert list(table["mean"]) == sorted(table["mean"])


def test_toy_walkthrough_panels(tmp_path):
    path = tmp_path / "toy.csv"
    write_toy_csv(path, rounds=3)
    paths, table = render(PlotSpec(csv=str(path), kind="toy-walkthrough", out=str(tmp_path / "fig")))
    assert len(table) == 3
    assert set(table["round"]) == {0, 1, 2}
    for p in paths:
        assert (tmp_path / p.split("/")[-1]).exists()


def test_missing_columns_error_lists_names(tmp_path):
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("method,normalized_regret\npto-linear,0.5\n")
    with pytest.raises(SchemaError, match="n_train"):
        render(PlotSpec(csv=str(path), kind="learning-curve", out=str(tmp_path / "fig")))


def test_empty_after_filter_error(tmp_path):
    path = tmp_path / "r.csv"
    sample_results(path)
    with pytest.raises(NoDataError, match="no data"):
        render(
            PlotSpec(
                csv=str(path), kind="learning-curve", out=str(tmp_path / "fig"), degree=99
            )
        )


def test_rerendering_is_byte_identical(tmp_path):
    path = tmp_path / "r.csv"
    sample_results(path)
    a = tmp_path / "a"
    b = tmp_path / "b"
    render(PlotSpec(csv=str(path), kind="learning-curve", out=str(a)))
    render(PlotSpec(csv=str(path), kind="learning-curve", out=str(b)))
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    path = tmp_path / "r.csv"
    sample_results(path)
    assert main(["--csv", str(path), "--kind", "benchmark", "--out", str(tmp_path / "fig")]) == 0
    out = capsys.readouterr().out
    assert "fig.png" in out and "fig.svg" in out
    assert main(["--csv", str(tmp_path / "missing.csv"), "--kind", "benchmark",
                 "--out", str(tmp_path / "fig2")]) == 1
    with pytest.raises(SystemExit) as e:
        main(["--csv", str(path), "--kind", "unknown", "--out", "x"])
    assert e.value.code == 2
