#!/usr/bin/env python3
"""Recompute benchmark summaries from records.csv.

Usage:
    summarize.py records.csv                  print the summary as CSV
    summarize.py records.csv --check summary.csv
                                              compare against a summary written
                                              by `mcse benchmark`; exit 1 on mismatch
"""

import argparse
import csv
import math
import statistics
import sys

KEY = ["case", "method", "fad", "k", "lambda", "d", "n_d"]
STATS = ["runs", "solved", "median_mape", "iqr_mape", "best_mape", "median_time"]


def quantile(values, q):
    """Linear interpolation between order statistics (type 7)."""
    v = sorted(values)
    h = (len(v) - 1) * q
    lo, hi = math.floor(h), math.ceil(h)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def summarize(rows):
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in KEY), []).append(r)
    out = []
    for key, rs in groups.items():
        mapes = [float(r["mape"]) for r in rs if r["mape"] != "NA"]
        times = [float(r["wall_time"]) for r in rs]
        row = dict(zip(KEY, key))
        row["runs"] = len(rs)
        row["solved"] = len(mapes)
        row["median_mape"] = statistics.median(mapes) if mapes else None
        row["iqr_mape"] = quantile(mapes, 0.75) - quantile(mapes, 0.25) if mapes else None
        row["best_mape"] = min(mapes) if mapes else None
        row["median_time"] = statistics.median(times)
        out.append(row)
    return out


def close(a, b, abs_tol=1e-12):
    if a is None or b in ("NA", ""):
        return a is None and b in ("NA", "")
    return math.isclose(float(a), float(b), rel_tol=1e-9, abs_tol=abs_tol)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("records")
    ap.add_argument("--check", metavar="SUMMARY")
    args = ap.parse_args()
    with open(args.records, newline="") as f:
        rows = summarize(list(csv.DictReader(f)))
    if args.check:
        with open(args.check, newline="") as f:
            theirs = {tuple(r[k] for k in KEY): r for r in csv.DictReader(f)}
        bad = 0
        for row in rows:
            other = theirs.pop(tuple(row[k] for k in KEY), None)
            if other is None:
                print("missing row", [row[k] for k in KEY])
                bad += 1
                continue
            for s in STATS:
                # records.csv keeps wall times to the microsecond
                tol = 1e-6 if s == "median_time" else 1e-12
                if not close(row[s], other[s], tol):
                    print(f"{[row[k] for k in KEY]} {s}: {row[s]} vs {other[s]}")
                    bad += 1
        bad += len(theirs)
        print("summary matches" if bad == 0 else f"{bad} mismatches")
        sys.exit(1 if bad else 0)
    w = csv.writer(sys.stdout)
    w.writerow(KEY + STATS)
    for row in rows:
        w.writerow([row[k] for k in KEY] + ["NA" if row[s] is None else row[s] for s in STATS])


if __name__ == "__main__":
    main()
