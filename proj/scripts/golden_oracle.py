#!/usr/bin/env python3
"""Recompute a run's report from its dump/turns artifacts and compare.

Independent check on report.json: joint goal accuracy, slot F, and the
per-estimator AUC / ECE / Pearson numbers are rederived here from first
principles (all-pairs AUC rather than rank sums) and compared within 1e-9.

Usage: golden_oracle.py RUN_DIR [--ece-bins N] [--verbalized-source MODE]
"""

import argparse
import json
import math
import sys


def load_jsonl(path):
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def auc_all_pairs(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    if not pos or not neg:
        return None
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def ece_right_closed(scores, labels, bins):
    sums = [[0.0, 0.0, 0] for _ in range(bins)]
    for s, l in zip(scores, labels):
        idx = 0
        for b in range(bins):
            if s <= (b + 1) / bins or b == bins - 1:
                idx = b
                break
        sums[idx][0] += s
        sums[idx][1] += l
        sums[idx][2] += 1
    total = 0.0
    n = len(scores)
    for conf, acc, count in sums:
        if count:
            total += (count / n) * abs(acc / count - conf / count)
    return total


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    if sxx == 0.0 or syy == 0.0:
        return None
    return sxy / math.sqrt(sxx * syy)


def feature(row, name, verbalized_source):
    if name == "softmax":
        return row["conf_softmax"]
    if name == "minicons":
        lp = row["conf_minicons"]
        return None if lp is None else math.exp(lp)
    if name == "verbalized":
        if verbalized_source == "probe":
            return row["conf_self_probe"]
        if verbalized_source == "auto" and row["conf_self_probe"] is not None:
            return row["conf_self_probe"]
        return row["conf_verbalized"]
    if name == "self_probe":
        return row["conf_self_probe"]
    return row["conf_combined"]


def close(a, b, tol=1e-9):
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= tol


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("run_dir")
    parser.add_argument("--ece-bins", type=int, default=10)
    parser.add_argument("--verbalized-source", default="auto")
    args = parser.parse_args()

    dump = load_jsonl(f"{args.run_dir}/dump.jsonl")
    turns = load_jsonl(f"{args.run_dir}/turns.jsonl")
    with open(f"{args.run_dir}/report.json", encoding="utf-8") as handle:
        report = json.load(handle)

    failures = []

    def expect(name, got, want):
        if not close(got, want):
            failures.append(f"{name}: oracle={got!r} report={want!r}")

    counts = report["counts"]
    expect("pairs", len(dump), counts["pairs"])
    expect("turns", len(turns), counts["turns"])
    expect("dialogues", len({t["dialogue_id"] for t in turns}), counts["dialogues"])
    expect("failed_turns", sum(1 for t in turns if t["failed"]), counts["failed_turns"])

    exact = sum(1 for t in turns if t["predicted_state"] == t["gold_state"])
    expect("jga", exact / len(turns), report["dst"]["jga"])

    tp = sum(
        1
        for t in turns
        for key, value in t["predicted_state"].items()
        if t["gold_state"].get(key) == value
    )
    pred = sum(len(t["predicted_state"]) for t in turns)
    gold = sum(len(t["gold_state"]) for t in turns)
    precision = tp / pred if pred else 0.0
    recall = tp / gold if gold else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    expect("slot_precision", precision, report["dst"]["slot_precision"])
    expect("slot_recall", recall, report["dst"]["slot_recall"])
    expect("slot_f1", f1, report["dst"]["slot_f1"])

    for name, metrics in report["estimators"].items():
        scored = [
            (feature(row, name, args.verbalized_source), 1 if row["correct"] else 0)
            for row in dump
            if feature(row, name, args.verbalized_source) is not None
            and row["correct"] is not None
        ]
        scores = [s for s, _ in scored]
        labels = [l for _, l in scored]
        expect(f"{name}.count", len(scores), metrics["count"])
        if scores:
            expect(f"{name}.auc", auc_all_pairs(scores, labels), metrics["auc"])
            expect(f"{name}.ece", ece_right_closed(scores, labels, args.ece_bins),
                   metrics["ece"])
            expect(f"{name}.pearson", pearson(scores, [float(l) for l in labels]),
                   metrics["pearson"])

    if failures:
        print(f"MISMATCH in {args.run_dir}:")
        for line in failures:
            print(f"  {line}")
        return 1
    print(f"OK {args.run_dir}: report matches independent recomputation")
    return 0


if __name__ == "__main__":
    sys.exit(main())
