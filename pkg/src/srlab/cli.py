"""Command-line entry points.

    srlab run <config>                  seeded experiment runs + CSV artifacts
    srlab verify <suite> [flags]        theorem / gradient batteries
    srlab noise-preview <preset> ...    print a transition matrix and stats

``run`` writes one ``run_<seed>.csv`` per repeat (schema below), a
``summary.csv`` with mean/std of the final test accuracy, and a config
snapshot that re-parses to the same configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as datamod
from . import noise as noisemod
from .config import ConfigError, ExperimentConfig, parse_config_file, render_config
from .data import LabeledDataset
from .suites import SUITES, run_suite
from .trainer import MLPConfig, RunRecord, TrainingDiverged, init_mlp, train

CSV_HEADER = "epoch,lambda,lr,train_objective,train_accuracy,test_accuracy,sparse_rate"
SUMMARY_HEADER = "repeats,mean_final_test_accuracy,std_final_test_accuracy"
SNAPSHOT_NAME = "config_snapshot.txt"


def _fmt(x: float) -> str:
    # 17 significant digits round-trip float64 exactly
    return f"{x:.17g}"


def run_record_csv(record: RunRecord) -> str:
    lines = [CSV_HEADER]
    for row in record.rows:
        lines.append(",".join([
            str(row.epoch), _fmt(row.lam), _fmt(row.lr),
            _fmt(row.train_objective), _fmt(row.train_accuracy),
            _fmt(row.test_accuracy), _fmt(row.sparse_rate),
        ]))
    return "\n".join(lines) + "\n"


def _build_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    source = cfg["dataset.source"]
    if source == "blobs":
        return datamod.gaussian_blobs(
            cfg["dataset.k"], cfg["dataset.n_per_class"], cfg["dataset.d"],
            cfg["dataset.separation"], cfg["dataset.seed"])
    if source == "idx":
        return datamod.load_idx(cfg["dataset.images"], cfg["dataset.labels"])
    return datamod.load_csv(cfg["dataset.csv"])


def _apply_imbalance(train: LabeledDataset, cfg: ExperimentConfig) -> LabeledDataset:
    profile = cfg["dataset.imbalance"]
    if profile == "none":
        return train
    n_max = int(train.class_counts().min())
    if profile == "long_tailed":
        counts = datamod.long_tailed_counts(n_max, cfg["dataset.imbalance_mu"],
                                            train.k)
    else:
        counts = datamod.step_counts(n_max, cfg["dataset.imbalance_mu"], train.k,
                                     cfg["dataset.step_minority_fraction"])
    return datamod.subsample_per_class(train, counts, cfg["dataset.seed"])


def _transition(cfg: ExperimentConfig, k: int):
    kind = cfg["noise.kind"]
    if kind == "none":
        return None
    if kind == "symmetric":
        return noisemod.symmetric_transition(k, cfg["noise.eta"])
    preset = cfg["noise.preset"]
    if preset in noisemod.ASYMMETRIC_PRESETS:
        return noisemod.asymmetric_transition(preset, eta=cfg["noise.eta"])
    return noisemod.asymmetric_transition(noisemod.load_flip_map(preset), k=k,
                                          eta=cfg["noise.eta"])


def run_experiment(config_path, echo=print) -> int:
    """Execute the configured repeats; returns a process exit status."""
    cfg = parse_config_file(config_path)
    out_dir = cfg["run.output_dir"]
    os.makedirs(out_dir, exist_ok=True)

    dataset = _build_dataset(cfg)
    train_ds, test_ds = datamod.split(dataset, cfg["dataset.test_fraction"],
                                      cfg["dataset.seed"])
    train_ds = _apply_imbalance(train_ds, cfg)
    transition = _transition(cfg, dataset.k)
    spec = cfg.loss_spec()
    sr = cfg.sr_config()
    widths = (train_ds.d, *cfg["model.hidden"], dataset.k)

    finals = []
    for i in range(cfg["run.repeats"]):
        run_seed = cfg["run.seed"] + i
        fit_ds = train_ds
        if transition is not None:
            noisy, _ = noisemod.corrupt(train_ds.labels, transition,
                                        seed=cfg["noise.seed"] + i)
            fit_ds = train_ds.replace_labels(noisy)
        model = init_mlp(MLPConfig(widths, seed=cfg["model.seed"] + i))
        record = train(model, fit_ds, test_ds, spec, sr,
                       cfg.optimizer_config(seed=run_seed))
        path = os.path.join(out_dir, f"run_{run_seed}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(run_record_csv(record))
        finals.append(record.final_test_accuracy)
        echo(f"run seed={run_seed}: final test accuracy "
             f"{record.final_test_accuracy:.4f} -> {path}")

    finals = np.asarray(finals)
    std = float(finals.std(ddof=1)) if finals.size > 1 else 0.0
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        fh.write(f"{finals.size},{_fmt(float(finals.mean()))},{_fmt(std)}\n")
    with open(os.path.join(out_dir, SNAPSHOT_NAME), "w", encoding="utf-8") as fh:
        fh.write(render_config(cfg))
    echo(f"summary: mean={finals.mean():.4f} std={std:.4f} over {finals.size} runs")
    return 0


def noise_preview(preset: str, k: int | None, eta: float, echo=print) -> int:
    """Print a transition matrix, its row sums, and the eta bound check."""
    if preset == "symmetric":
        if k is None:
            raise ValueError("--k is required for the symmetric preset")
        tm = noisemod.symmetric_transition(k, eta)
    elif preset in noisemod.ASYMMETRIC_PRESETS:
        tm = noisemod.asymmetric_transition(preset, eta=eta)
    else:
        if k is None:
            raise ValueError("--k is required for a custom flip map")
        tm = noisemod.asymmetric_transition(noisemod.load_flip_map(preset),
                                            k=k, eta=eta)
    echo(f"{preset} transition, k={tm.k}, eta={eta}")
    for row in tm.entries:
        echo("  " + " ".join(f"{x:6.3f}" for x in row))
    echo("row sums: " + " ".join(f"{s:.3f}" for s in tm.entries.sum(axis=1)))
    bound = 1.0 - 1.0 / tm.k
    echo(f"eta < 1 - 1/k: {eta} < {bound:.6g} -> {eta < bound}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlab",
        description="Sparse-regularized robust training laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("config", help="path to a key = value config file")

    p_verify = sub.add_parser("verify", help="run a verification battery")
    p_verify.add_argument("suite", choices=SUITES)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--eta", type=float, default=None)
    p_verify.add_argument("--k", type=int, default=None)
    p_verify.add_argument("--m", type=int, default=None)
    p_verify.add_argument("--loss", type=str, default=None)
    p_verify.add_argument("--eps", type=float, default=None)
    p_verify.add_argument("--samples", type=int, default=None)

    p_noise = sub.add_parser("noise-preview", help="print a transition matrix")
    p_noise.add_argument("preset",
                         help="symmetric, mnist, cifar10, cifar100_superclass, "
                              "or a path to a source->target flip map")
    p_noise.add_argument("--k", type=int, default=None)
    p_noise.add_argument("--eta", type=float, required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.config)
        if args.command == "verify":
            passed, lines = run_suite(args.suite, seed=args.seed, k=args.k,
                                      eta=args.eta, m=args.m, loss=args.loss,
                                      eps=args.eps, samples=args.samples)
            for line in lines:
                print(line)
            print("verify:", "all checks passed" if passed else "FAILURES above")
            return 0 if passed else 1
        return noise_preview(args.preset, args.k, args.eta)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
