import csv
import os

import numpy as np
import pytest

from selbp.cli import aggregate_summary, main, read_summary_csv

SMALL_GRID = """
dataset.kind = blobs
dataset.n = 200
dataset.separation = 4.0
strategy.kinds = random, loss_based
train.epochs = 2
train.base_batch = 32
train.base_lr = 0.05
train.schedule = constant
grid.fractions = 0.5, 1.0
grid.seeds = 0, 1
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_train_grid_cardinality(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_GRID)
    out = tmp_path / "runs"
    rc = main(["train", "--config", cfg, "--out", str(out)])
    assert rc == 0
    csvs = sorted(p for p in os.listdir(out) if p != "summary.csv")
    assert len(csvs) == 2 * 2 * 2  # strategies x fractions x seeds
    assert "random_rho0.5_seed0.csv" in csvs
    rows = read_summary_csv(out / "summary.csv")
    assert len(rows) == 8
    assert {(r["strategy"], r["fraction"], r["seed"]) for r in rows} == {
        (k, f, s)
        for k in ("random", "loss_based")
        for f in (0.5, 1.0)
        for s in (0, 1)
    }


def test_summary_matches_metrics_files(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_GRID)
    out = tmp_path / "runs"
    main(["train", "--config", cfg, "--out", str(out)])
    for row in read_summary_csv(out / "summary.csv"):
        name = f"{row['strategy']}_rho{row['fraction']}_seed{row['seed']}.csv"
        with open(out / name, newline="") as fh:
            recs = list(csv.DictReader(fh))
        assert row["max_test_accuracy"] == max(float(r["test_accuracy"]) for r in recs)
        assert row["cost_units_total"] == float(recs[-1]["cost_units_cum"])


def test_seed_flag_restricts_grid(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_GRID)
    out = tmp_path / "runs"
    main(["train", "--config", cfg, "--out", str(out), "--seed", "3"])
    rows = read_summary_csv(out / "summary.csv")
    assert len(rows) == 4 and all(r["seed"] == 3 for r in rows)


def test_parallel_jobs_match_serial(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_GRID)
    out1, out2 = tmp_path / "serial", tmp_path / "parallel"
    main(["train", "--config", cfg, "--out", str(out1)])
    main(["train", "--config", cfg, "--out", str(out2), "--jobs", "2"])
    r1 = sorted(map(tuple, (r.items() for r in read_summary_csv(out1 / "summary.csv"))))
    r2 = sorted(map(tuple, (r.items() for r in read_summary_csv(out2 / "summary.csv"))))
    assert r1 == r2


def test_aggregate_summary_recompute():
    rows = [
        {"strategy": "random", "fraction": 0.5, "seed": 0, "max_test_accuracy": 0.8},
        {"strategy": "random", "fraction": 0.5, "seed": 1, "max_test_accuracy": 0.9},
        {"strategy": "loss_based", "fraction": 0.5, "seed": 0, "max_test_accuracy": 0.7},
    ]
    agg = aggregate_summary(rows)
    cell = agg[("random", 0.5)]
    assert cell == {"mean": pytest.approx(0.85), "min": 0.8, "max": 0.9, "n": 2}
    assert agg[("loss_based", 0.5)]["n"] == 1


def test_grad_error_command(tmp_path):
    text = SMALL_GRID + "eval.num_batches = 5\neval.batch = 32\neval.subset = 8\n"
    cfg = write_cfg(tmp_path, text)
    out = tmp_path / "ge"
    rc = main(["grad-error", "--config", cfg, "--out", str(out)])
    assert rc == 0
    with open(out / "grad_errors.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 5
    assert all(float(r["squared_error"]) >= 0 for r in rows)


def test_synth_data_command(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_GRID)
    out = tmp_path / "data"
    rc = main(["synth-data", "--config", cfg, "--out", str(out)])
    assert rc == 0
    with open(out / "blobs.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "x1", "label"]
    assert len(rows) == 201


def test_selftest_command(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("[ok]") == 4 and "[FAIL]" not in out


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "dataset.kind = blobs\n")  # missing strategy.kinds
    assert main(["train", "--config", cfg]) == 1
    assert "strategy.kinds" in capsys.readouterr().err


def test_deterministic_across_invocations(tmp_path):
    cfg = write_cfg(tmp_path, SMALL_GRID)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["train", "--config", cfg, "--out", str(out1)])
    main(["train", "--config", cfg, "--out", str(out2)])
    f = "loss_based_rho0.5_seed1.csv"
    assert (out1 / f).read_text() == (out2 / f).read_text()
