"""High-precision t-test oracle (mpmath, 50 digits) for 20 fixed sample pairs.

Writes fixtures/oracles/ttest_cases.json. Welch for even case numbers, paired
for odd ones. p is two-sided, I_{df/(df+t^2)}(df/2, 1/2).
"""
import json
import pathlib

import mpmath as mp
import numpy as np
from scipy import stats

mp.mp.dps = 50
OUT = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "oracles" / "ttest_cases.json"


def mean(xs):
    return mp.fsum(xs) / len(xs)


def var(xs):
    m = mean(xs)
    return mp.fsum([(x - m) ** 2 for x in xs]) / (len(xs) - 1)


def two_sided(t, df):
    if t == 0:
        return mp.mpf(1)
    return mp.betainc(df / 2, mp.mpf(1) / 2, 0, df / (df + t * t), regularized=True)


def welch(a, b):
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    va, vb = var(a) / len(a), var(b) / len(b)
    t = (mean(a) - mean(b)) / mp.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return t, df, two_sided(t, df)


def paired(a, b):
    d = [mp.mpf(x) - mp.mpf(y) for x, y in zip(a, b)]
    t = mean(d) / mp.sqrt(var(d) / len(d))
    df = mp.mpf(len(d) - 1)
    return t, df, two_sided(t, df)


def main():
    rng = np.random.default_rng(20240917)
    cases = []
    for i in range(20):
        kind = "welch_t" if i % 2 == 0 else "paired_t"
        na = int(rng.integers(3, 40))
        nb = na if kind == "paired_t" else int(rng.integers(3, 40))
        shift = float(rng.choice([0.0, 0.05, 0.2, 0.6, 1.5, 4.0]))
        scale_a = float(rng.uniform(0.05, 2.0))
        scale_b = float(rng.uniform(0.05, 2.0))
        a = [round(float(x), 6) for x in rng.normal(0.5, scale_a, na)]
        b = [round(float(x), 6) for x in rng.normal(0.5 + shift, scale_b, nb)]
        if kind == "welch_t":
            t, df, p = welch(a, b)
            ref = stats.ttest_ind(a, b, equal_var=False)
        else:
            t, df, p = paired(a, b)
            ref = stats.ttest_rel(a, b)
        assert abs(float(t) - ref.statistic) < 1e-9 * max(1, abs(ref.statistic))
        assert abs(float(p) - ref.pvalue) < 1e-9
        cases.append({
            "kind": kind,
            "a": a,
            "b": b,
            "statistic": float(t),
            "df": float(df),
            "p_value": float(p),
        })
    OUT.write_text(json.dumps(cases, indent=1) + "\n")


if __name__ == "__main__":
    main()
