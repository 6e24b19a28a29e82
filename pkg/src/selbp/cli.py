"""Command-line entry point.

Subcommands:

* ``train``      — run the (strategy x fraction x seed) grid, one metrics CSV
                   per run plus a summary CSV.
* ``grad-error`` — the gradient-estimate-quality experiment; histogram CSV.
* ``selftest``   — run the numerical oracle suite and report pass/fail.
* ``synth-data`` — materialize a synthetic dataset as CSV.

Consumers are scripts and plotting tools; everything is emitted as tidy CSV.
"""

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
import numpy as np

from . import evalgrad
from .config import load_config
from .data import build_dataset, write_dataset_csv
from .errors import SelbpError
from .gram import BatchTape, gram_explicit, gram_implicit
from .model import Mlp, last_layer_grad_check, mean_loss, weighted_backward
from .omp import OmpConfig, Selection, omp_dense_oracle, omp_gram
from .trainer import run_training, write_metrics_csv

logger = logging.getLogger(__name__)

SUMMARY_FIELDS = ["strategy", "fraction", "seed", "max_test_accuracy", "cost_units_total"]


def _build_model(spec, dataset, seed):
    sizes = [dataset.X_train.shape[1], *spec.hidden, dataset.num_classes]
    return Mlp.init(sizes, activation=spec.activation, seed=spec.init_seed + seed)


def _run_cell(args):
    """One grid cell: train a fresh model, write its metrics CSV, return a
    summary row. Top-level so it pickles into worker processes."""
    spec, kind, fraction, seed, out_dir = args
    dataset = build_dataset(spec.dataset)
    model = _build_model(spec, dataset, seed)
    cfg = spec.train_config(fraction, seed)
    strategy = spec.strategy_config(kind, fraction)
    records = run_training(cfg, strategy, dataset, model)
    name = f"{kind}_rho{fraction}_seed{seed}.csv"
    write_metrics_csv(records, os.path.join(out_dir, name))
    return {
        "strategy": kind,
        "fraction": fraction,
        "seed": seed,
        "max_test_accuracy": max(r.test_accuracy for r in records),
        "cost_units_total": records[-1].cost_units_cum,
    }


def write_summary_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def read_summary_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["fraction"] = float(row["fraction"])
        row["seed"] = int(row["seed"])
        row["max_test_accuracy"] = float(row["max_test_accuracy"])
        row["cost_units_total"] = float(row["cost_units_total"])
    return rows


def aggregate_summary(rows):
    """Group rows by (strategy, fraction): mean/min/max of max_test_accuracy."""
    cells = {}
    for row in rows:
        cells.setdefault((row["strategy"], row["fraction"]), []).append(
            row["max_test_accuracy"]
        )
    return {
        key: {"mean": float(np.mean(v)), "min": min(v), "max": max(v), "n": len(v)}
        for key, v in cells.items()
    }


def cmd_train(spec, jobs=1):
    os.makedirs(spec.out_dir, exist_ok=True)
    cells = [
        (spec, kind, fraction, seed, spec.out_dir)
        for kind in spec.strategy_kinds
        for fraction in spec.fractions
        for seed in spec.seeds
    ]
    failures = 0
    rows = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, cell) for cell in cells]
            for cell, fut in zip(cells, futures):
                try:
                    rows.append(fut.result())
                except SelbpError as exc:
                    failures += 1
                    logger.error("cell %s failed: %s", cell[1:4], exc)
    else:
        for cell in cells:
            try:
                rows.append(_run_cell(cell))
            except SelbpError as exc:
                failures += 1
                logger.error("cell %s failed: %s", cell[1:4], exc)
    write_summary_csv(rows, os.path.join(spec.out_dir, "summary.csv"))
    return 0 if failures == 0 else 1


def cmd_grad_error(spec):
    os.makedirs(spec.out_dir, exist_ok=True)
    dataset = build_dataset(spec.dataset)
    model = _build_model(spec, dataset, spec.seeds[0])
    strategies = {
        kind: spec.strategy_config(kind, spec.eval_subset / spec.eval_batch)
        for kind in spec.strategy_kinds
    }
    samples = evalgrad.gradient_error_experiment(
        model,
        dataset.X_train,
        dataset.y_train,
        strategies,
        num_batches=spec.eval_num_batches,
        M=spec.eval_batch,
        m=spec.eval_subset,
        seed=spec.seeds[0],
    )
    evalgrad.write_grad_error_csv(samples, os.path.join(spec.out_dir, "grad_errors.csv"))
    return 0


def _selftest_checks():
    rng = np.random.default_rng(12345)

    def gram_identity():
        worst = 0.0
        for _ in range(20):
            M, D, C = rng.integers(2, 17), rng.integers(1, 9), rng.integers(1, 6)
            tape = BatchTape(
                H=rng.standard_normal((M, D)),
                P=rng.standard_normal((M, C)),
                losses=np.abs(rng.standard_normal(M)),
            )
            Ki, Ke = gram_implicit(tape), gram_explicit(tape)
            worst = max(worst, np.abs(Ki - Ke).max() / np.abs(Ke).max())
        return worst < 1e-12, f"max relative error {worst:.2e}"

    def omp_equivalence():
        for _ in range(20):
            M, D, m = 16, 24, 5
            A = rng.standard_normal((M, D))
            b = A.mean(axis=0)
            dense = omp_dense_oracle(A, b, m)
            gsel = omp_gram(A @ A.T, A @ b, OmpConfig(max_atoms=m))
            if not np.array_equal(dense.indices, gsel.indices):
                return False, "index sequences differ"
            if np.abs(dense.weights - gsel.weights).max() > 1e-8:
                return False, "weights differ beyond 1e-8"
        return True, "20 instances agree"

    def finite_differences():
        model = Mlp.init([2, 16, 3], seed=7)
        X = rng.standard_normal((6, 2))
        y = rng.integers(0, 3, 6)
        full = Selection(np.arange(6), np.ones(6))
        grad = weighted_backward(model, X, y, full)
        theta = model.get_params()
        h = 1e-5
        fd = np.zeros_like(theta)
        for i in range(theta.size):
            step = np.zeros_like(theta)
            step[i] = h
            model.set_params(theta + step)
            up = mean_loss(model, X, y)
            model.set_params(theta - step)
            down = mean_loss(model, X, y)
            fd[i] = (up - down) / (2 * h)
        model.set_params(theta)
        rel = np.linalg.norm(fd - grad) / np.linalg.norm(grad)
        return rel < 1e-6, f"relative error {rel:.2e}"

    def proxy_block():
        model = Mlp.init([3, 8, 4], seed=11)
        X = rng.standard_normal((10, 3))
        y = rng.integers(0, 4, 10)
        err = last_layer_grad_check(model, X, y)
        return err < 1e-10, f"max relative error {err:.2e}"

    return [
        ("gram implicit vs explicit", gram_identity),
        ("gram-OMP vs dense oracle", omp_equivalence),
        ("full-gradient finite differences", finite_differences),
        ("last-layer proxy block", proxy_block),
    ]


def cmd_selftest():
    ok = True
    for name, check in _selftest_checks():
        passed, detail = check()
        status = "ok" if passed else "FAIL"
        print(f"[{status}] {name}: {detail}")
        ok = ok and passed
    return 0 if ok else 1


def cmd_synth_data(spec):
    os.makedirs(spec.out_dir, exist_ok=True)
    path = os.path.join(spec.out_dir, f"{spec.dataset.kind}.csv")
    write_dataset_csv(spec.dataset, path)
    print(f"wrote {path}")
    return 0


def _load_spec(args):
    spec = load_config(args.config)
    if args.out is not None:
        spec.out_dir = args.out
    if args.seed is not None:
        spec.seeds = (args.seed,)
    return spec


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(prog="selbp")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("train", "grad-error", "synth-data"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None, help="restrict the seed grid")
        if name == "train":
            p.add_argument("--jobs", type=int, default=1, help="parallel grid cells")

    sub.add_parser("selftest")

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(_load_spec(args), jobs=args.jobs)
        if args.command == "grad-error":
            return cmd_grad_error(_load_spec(args))
        if args.command == "synth-data":
            return cmd_synth_data(_load_spec(args))
        return cmd_selftest()
    except SelbpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
