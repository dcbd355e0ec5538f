#!/usr/bin/env python3
"""Full benchmark protocol: every dataset, ensemble sizes 2..5, both kinds, five runs.

Each run r trains with seeds 10r, 10r+1, ... so that member k of the base and
the decorrelated ensemble share a seed. Per-run accuracies go to
<out>/run<r>/results.csv; their mean goes to <out>/results_mean.csv, which is
then fed to `deco mcm`. Days of CPU time for the whole archive.
"""
import argparse
import csv
import math
import os
import pathlib
import subprocess
import sys


def run(cmd):
    print("+ " + " ".join(cmd), flush=True)
    subprocess.run(cmd, check=True)


def read_table(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header = rows[0][1:]
    return {(c, r[0]): (float(v) if v else math.nan) for r in rows[1:] for c, v in zip(header, r[1:])}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--deco", default=str(pathlib.Path(__file__).resolve().parent.parent / "build" / "tools" / "deco"))
    ap.add_argument("--data-root", default=os.environ.get("DECO_DATA_ROOT", ""))
    ap.add_argument("--out", default="long-run")
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--sizes", default="2,3,4,5")
    ap.add_argument("--epochs", type=int, default=1500)
    ap.add_argument("datasets", nargs="*", help="default: every directory under --data-root")
    args = ap.parse_args()
    if not args.data_root:
        sys.exit("pass --data-root or set DECO_DATA_ROOT")

    root = pathlib.Path(args.data_root)
    datasets = args.datasets or sorted(p.name for p in root.iterdir() if (p / f"{p.name}_TRAIN.tsv").exists())
    sizes = [int(s) for s in args.sizes.split(",")]
    out = pathlib.Path(args.out)

    for r in range(args.runs):
        run_dir = out / f"run{r}"
        results = run_dir / "results.csv"
        for ds in datasets:
            for size in sizes:
                seeds = ",".join(str(10 * r + k) for k in range(size))
                for kind in ("base", "deco"):
                    common = ["--data-root", str(root), "--dataset", ds, "--kind", kind, "--size", str(size),
                              "--seeds", seeds, "--out", str(run_dir)]
                    run([args.deco, "ensemble", *common, "--epochs", str(args.epochs)])
                    run([args.deco, "evaluate", *common, "--results", str(results)])

    tables = [read_table(out / f"run{r}" / "results.csv") for r in range(args.runs)]
    classifiers = sorted({c for t in tables for c, _ in t})
    names = sorted({d for t in tables for _, d in t})
    mean_path = out / "results_mean.csv"
    with open(mean_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", *classifiers])
        for d in names:
            row = [d]
            for c in classifiers:
                vals = [t.get((c, d), math.nan) for t in tables]
                row.append("" if any(math.isnan(v) for v in vals) else repr(sum(vals) / len(vals)))
            w.writerow(row)
    run([args.deco, "mcm", "--results", str(mean_path), "--out", str(out)])


if __name__ == "__main__":
    main()
