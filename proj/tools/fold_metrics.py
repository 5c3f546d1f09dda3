#!/usr/bin/env python3
"""Recompute suite metrics from per-episode records with exact fractions."""

import argparse
import json
from fractions import Fraction

CATEGORIES = ["compound", "complex", "vague"]


def ratio(gt, n):
    if n == 0:
        return Fraction(1)
    return min(Fraction(1), Fraction(gt, n))


def mean(values):
    if not values:
        return Fraction(0)
    return sum(values, Fraction(0)) / len(values)


def fold(label, episodes, truths):
    sr, gcr, ru, eff = [], [], [], []
    for e in episodes:
        t = truths[e["task"]]
        sr.append(Fraction(1 if e["success"] else 0))
        if e["success"]:
            gcr.append(Fraction(1))
            ru.append(ratio(t["gt_actions"], e["plan_actions"]))
            eff.append(ratio(t["gt_makespan"], e["plan_makespan"]))
        else:
            hit = len(set(e["achieved"]) & set(t["goal"]))
            gcr.append(Fraction(hit, len(t["goal"])))
    return {
        "label": label,
        "episodes": len(episodes),
        "successes": len(ru),
        "sr": float(mean(sr)),
        "gcr": float(mean(gcr)),
        "ru": float(mean(ru)),
        "eff": float(mean(eff)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", required=True, help="episodes.jsonl")
    ap.add_argument("--truths", required=True, help="truths.json")
    args = ap.parse_args()
    with open(args.truths) as f:
        truths = {t["id"]: t for t in json.load(f)}
    with open(args.episodes) as f:
        episodes = [json.loads(line) for line in f if line.strip()]
    rows = []
    for c in CATEGORIES:
        group = [e for e in episodes if truths[e["task"]]["category"] == c]
        if group:
            rows.append(fold(c, group, truths))
    rows.append(fold("all", episodes, truths))
    print(json.dumps({"rows": rows}, indent=2))


if __name__ == "__main__":
    main()
