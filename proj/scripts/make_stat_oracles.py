"""Writes tests/fixtures/stat_oracles.json from scipy.

Run once; the output is committed and read by the C++ tests.
"""
import json
import pathlib

import numpy as np
import scipy
from scipy import special, stats

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "stat_oracles.json"


def welch_case(a, b):
    r = stats.ttest_ind(a, b, equal_var=False)
    va, vb = np.var(a, ddof=1) / len(a), np.var(b, ddof=1) / len(b)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return {"a": list(a), "b": list(b), "t": float(r.statistic), "df": float(df), "p": float(r.pvalue)}


def student_case(a, b):
    r = stats.ttest_ind(a, b, equal_var=True)
    return {"a": list(a), "b": list(b), "t": float(r.statistic), "df": len(a) + len(b) - 2, "p": float(r.pvalue)}


def main():
    rng = np.random.default_rng(20240611)
    welch = [welch_case([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0]),
             welch_case([3.1, 2.4, 5.6, 4.4, 3.9, 2.2], [6.1, 5.3, 7.7, 4.9, 8.2])]
    for _ in range(10):
        na, nb = rng.integers(3, 30, size=2)
        a = np.round(rng.normal(0.0, rng.uniform(0.5, 3.0), na), 4)
        b = np.round(rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 3.0), nb), 4)
        welch.append(welch_case(a.tolist(), b.tolist()))

    student = []
    for _ in range(4):
        n = int(rng.integers(4, 20))
        student.append(student_case(np.round(rng.normal(0, 1, n), 4).tolist(),
                                    np.round(rng.normal(0.5, 1.5, n), 4).tolist()))

    t_cdf = [{"t": t, "df": df, "cdf": float(stats.t.cdf(t, df))}
             for t, df in [(1.0, 10), (2.5, 3.3), (-0.7, 1.5), (4.0, 30), (-3.2, 2.0), (0.3, 120.0),
                           (12.0, 4.0), (-1.96, 1000.0)]]
    betainc = [{"a": a, "b": b, "x": x, "value": float(special.betainc(a, b, x))}
               for a, b, x in [(2.5, 1.5, 0.3), (10, 20, 0.4), (0.5, 0.5, 0.9), (1, 1, 0.25), (50, 3, 0.97),
                               (0.2, 7.0, 0.01)]]
    erf = [{"x": x, "erf": float(special.erf(x)), "erfc": float(special.erfc(x))}
           for x in [-3.0, -1.2, -0.1, 0.0, 0.5, 1.0, 2.4, 2.6, 4.5]]

    pearson = []
    for x, y in [([0.69, 0.74, 0.76, 0.68, 0.39], [0.499, 0.547, 0.647, 0.662, 0.523]),
                 ([0.60, 0.59, 0.67, 0.66, 0.45], [0.695, 0.668, 0.702, 0.694, 0.527])]:
        r = stats.pearsonr(x, y)
        pearson.append({"x": x, "y": y, "r": float(r[0]), "p": float(r[1])})
    for _ in range(4):
        n = int(rng.integers(4, 25))
        x = np.round(rng.normal(0, 1, n), 4)
        y = np.round(0.6 * x + rng.normal(0, 1, n), 4)
        r = stats.pearsonr(x, y)
        pearson.append({"x": x.tolist(), "y": y.tolist(), "r": float(r[0]), "p": float(r[1])})

    wilcoxon = []
    while len(wilcoxon) < 20:
        n = int(rng.integers(5, 13))
        a = np.round(rng.normal(0, 1, n), 3)
        b = np.round(a + rng.normal(0.3, 1, n), 3)
        d = np.round(b - a, 3)
        if np.any(d == 0) or len(set(np.abs(d))) != n:
            continue
        r = stats.wilcoxon(b, a, method="exact")
        wilcoxon.append({"a": a.tolist(), "b": b.tolist(), "p": float(r.pvalue)})

    OUT.write_text(json.dumps({"generator": f"scipy {scipy.__version__}", "welch": welch, "student": student,
                               "t_cdf": t_cdf, "incomplete_beta": betainc, "erf": erf, "pearson": pearson,
                               "wilcoxon_exact": wilcoxon}, indent=1) + "\n")


if __name__ == "__main__":
    main()
