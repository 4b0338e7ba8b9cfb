#!/usr/bin/env python3
"""Render test-accuracy and sparse-rate curves from run CSVs.

Optional helper; the CLI itself only emits CSV. Takes any number of
run_<seed>.csv files (labels taken from the file names) and writes a
two-panel PNG.

    python scripts/plot_curves.py out/ce/run_0.csv out/sr/run_0.csv -o curves.png
"""

import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def read_run(path):
    epochs, acc, sparse = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            epochs.append(int(row["epoch"]))
            acc.append(float(row["test_accuracy"]))
            sparse.append(float(row["sparse_rate"]))
    return epochs, acc, sparse


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csvs", nargs="+", help="run_<seed>.csv files")
    parser.add_argument("-o", "--output", default="curves.png")
    args = parser.parse_args()

    fig, (ax_acc, ax_sparse) = plt.subplots(1, 2, figsize=(9, 3.5))
    for path in args.csvs:
        label = pathlib.Path(path).parent.name + "/" + pathlib.Path(path).stem
        epochs, acc, sparse = read_run(path)
        ax_acc.plot(epochs, acc, label=label)
        ax_sparse.plot(epochs, sparse, label=label)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("test accuracy")
    ax_sparse.set_xlabel("epoch")
    ax_sparse.set_ylabel("sparse rate")
    ax_acc.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
