"""Synthetic reviewer-score fixtures and their expected statistics.

target_means.csv: 3 reviewers x 200 records x 3 settings. Each (reviewer,
setting) block is a permutation of a fixed (field_count, error_count) profile
built from dyadic fractions, so setting means are exact:
  original   accuracy 0.79, errors 1.64
  llm        accuracy 0.80, errors 1.50
  llm_cedar  accuracy 0.97, errors 0.85

small_agreement.csv: 3 reviewers x 4 records x 2 settings with tied error counts.

Expected values go to fixtures/oracles/reviewer_expected.json.
"""
import csv
import itertools
import json
import math
import pathlib

import numpy as np
from scipy import stats

ROOT = pathlib.Path(__file__).resolve().parents[2] / "fixtures"
REVIEWERS = ["reviewer_1", "reviewer_2", "reviewer_3"]
SETTINGS = ["original", "llm", "llm_cedar"]

PROFILES = {
    "original": [(4, 1)] * 8 + [(8, 4)] * 80 + [(4, 0)] * 56 + [(8, 0)] * 56,
    "llm": [(4, 1)] * 20 + [(8, 4)] * 70 + [(8, 0)] * 110,
    "llm_cedar": [(16, 1)] * 22 + [(32, 4)] * 37 + [(16, 0)] * 141,
}


def fmt(x):
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def brute_tau_b(x, y):
    n = len(x)
    c = d = tx = ty = 0
    for i, j in itertools.combinations(range(n), 2):
        sx = (x[i] > x[j]) - (x[i] < x[j])
        sy = (y[i] > y[j]) - (y[i] < y[j])
        if sx == 0:
            tx += 1
        if sy == 0:
            ty += 1
        if sx * sy > 0:
            c += 1
        elif sx * sy < 0:
            d += 1
    n0 = n * (n - 1) // 2
    return (c - d) / math.sqrt((n0 - tx) * (n0 - ty))


def agreement(rows, measure):
    by_rev = {}
    for r in rows:
        by_rev.setdefault(r["reviewer_id"], {})[(r["record_id"], r["setting"])] = float(r[measure])
    revs = sorted(by_rev)
    keys = sorted(by_rev[revs[0]])
    table = []
    for a in revs:
        row = []
        for b in revs:
            x = [by_rev[a][k] for k in keys]
            y = [by_rev[b][k] for k in keys]
            tau = stats.kendalltau(x, y).statistic
            assert abs(tau - brute_tau_b(x, y)) < 1e-12
            row.append(tau)
        table.append(row)
    return {"reviewers": revs, "tau": table}


def write(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["reviewer_id", "record_id", "setting", "accuracy", "error_count"])
        for r in rows:
            w.writerow([r["reviewer_id"], r["record_id"], r["setting"], fmt(r["accuracy"]), r["error_count"]])


def target_means():
    rng = np.random.default_rng(1998)
    records = ["SAMN%08d" % (10000 + i) for i in range(200)]
    rows = []
    for rev in REVIEWERS:
        for setting in SETTINGS:
            profile = list(PROFILES[setting])
            order = rng.permutation(len(profile))
            for rec, idx in zip(records, order):
                f, e = profile[idx]
                rows.append({"reviewer_id": rev, "record_id": rec, "setting": setting,
                             "accuracy": 1 - e / f, "error_count": e})
    write(ROOT / "reviewers" / "target_means.csv", rows)

    means = {}
    for setting in SETTINGS:
        per_rev_acc = []
        per_rev_err = []
        for rev in REVIEWERS:
            sel = [r for r in rows if r["reviewer_id"] == rev and r["setting"] == setting]
            per_rev_acc.append(sum(r["accuracy"] for r in sel) / len(sel))
            per_rev_err.append(sum(r["error_count"] for r in sel) / len(sel))
        means[setting] = {"accuracy": sum(per_rev_acc) / 3, "error_count": sum(per_rev_err) / 3}

    def per_record(setting, measure):
        out = []
        for rec in records:
            vals = [r[measure] for r in rows if r["record_id"] == rec and r["setting"] == setting]
            out.append(sum(vals) / len(vals))
        return out

    tests = {}
    for a, b in [("original", "llm"), ("original", "llm_cedar"), ("llm", "llm_cedar")]:
        for measure in ("accuracy", "error_count"):
            xa, xb = per_record(a, measure), per_record(b, measure)
            w = stats.ttest_ind(xa, xb, equal_var=False)
            p = stats.ttest_rel(xa, xb)
            tests[f"{a}|{b}|{measure}"] = {
                "welch_t": {"statistic": float(w.statistic), "p_value": float(w.pvalue)},
                "paired_t": {"statistic": float(p.statistic), "p_value": float(p.pvalue)},
            }
    return {"setting_means": means, "tests": tests,
            "agreement_error_count": agreement(rows, "error_count"),
            "agreement_accuracy": agreement(rows, "accuracy")}


def small():
    errors = {
        "reviewer_1": [0, 1, 1, 2, 0, 0, 3, 1],
        "reviewer_2": [0, 1, 2, 2, 1, 0, 2, 1],
        "reviewer_3": [1, 0, 1, 3, 0, 0, 2, 2],
    }
    field_counts = [4, 4, 8, 8, 4, 12, 8, 4]
    keys = [(rec, s) for rec in ["rec_a", "rec_b", "rec_c", "rec_d"] for s in ("llm_cedar", "original")]
    rows = []
    for rev, errs in errors.items():
        for (rec, s), e, f in zip(keys, errs, field_counts):
            rows.append({"reviewer_id": rev, "record_id": rec, "setting": s,
                         "accuracy": 1 - e / f, "error_count": e})
    write(ROOT / "reviewers" / "small_agreement.csv", rows)
    return {"agreement_error_count": agreement(rows, "error_count"),
            "agreement_accuracy": agreement(rows, "accuracy")}


def main():
    out = {"target_means": target_means(), "small_agreement": small()}
    (ROOT / "oracles" / "reviewer_expected.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
