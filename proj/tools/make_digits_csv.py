#!/usr/bin/env python3
"""Write the scikit-learn digits set as unit-norm train/test CSVs for lprobe.

    python3 tools/make_digits_csv.py data/digits
"""
import argparse
import csv
import pathlib

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split


def write(path, X, y):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["label"] + [f"f{j}" for j in range(X.shape[1])])
        for row, label in zip(X, y):
            w.writerow([f"digit{label}"] + [repr(float(v)) for v in row])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--test-size", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X, y = load_digits(return_X_y=True)
    X = X.astype(np.float32)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    # Sort by label so class catalogs come out in digit order.
    X_tr, X_te, y_tr, y_te = train_test_split(
        X, y, test_size=args.test_size, stratify=y, random_state=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, Xs, ys in (("train", X_tr, y_tr), ("test", X_te, y_te)):
        order = np.argsort(ys, kind="stable")
        write(args.out_dir / f"{name}.csv", Xs[order], ys[order])
        print(f"{name}: {len(ys)} rows")


if __name__ == "__main__":
    main()
