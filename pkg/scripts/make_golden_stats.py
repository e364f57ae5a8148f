"""One-time generator for the frozen statistics oracle values.

Computes reference statistics with scipy.stats and statsmodels (never
imported by the package or its tests) and freezes them into
tests/golden/stats_golden.json. Re-run only if the reference datasets change.
"""
import json
import os

import numpy as np
import pandas as pd
from scipy import stats as ss
import statsmodels.api as sm
from statsmodels.formula.api import ols

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "golden",
                   "stats_golden.json")


def unpaired_golden(rng):
    a = np.round(rng.normal(0.3, 1.0, 20), 6)
    b = np.round(rng.normal(0.0, 1.0, 18), 6)
    t, p = ss.ttest_ind(a, b, equal_var=True)
    return {"a": a.tolist(), "b": b.tolist(), "t": float(t), "p": float(p)}


def paired_golden(rng):
    a = np.round(rng.normal(1.0, 0.5, 15), 6)
    b = np.round(a + rng.normal(0.2, 0.4, 15), 6)
    t, p = ss.ttest_rel(a, b)
    return {"a": a.tolist(), "b": b.tolist(), "t": float(t), "p": float(p)}


def oneway_golden(rng):
    groups = [np.round(rng.normal(mu, 1.0, 5), 6) for mu in (0.0, 0.8, 1.5)]
    f, p = ss.f_oneway(*groups)
    frame = pd.DataFrame({
        "value": np.concatenate(groups),
        "g": np.repeat(["g0", "g1", "g2"], 5),
    })
    table = sm.stats.anova_lm(ols("value ~ C(g)", frame).fit(), typ=2)
    ss_b = float(table.loc["C(g)", "sum_sq"])
    ss_w = float(table.loc["Residual", "sum_sq"])
    eta2 = ss_b / (ss_b + ss_w)
    m = 3  # pairwise comparisons among 3 groups
    posthoc = {}
    for i in range(3):
        for j in range(i + 1, 3):
            _, praw = ss.ttest_ind(groups[i], groups[j], equal_var=True)
            posthoc[f"{i}-{j}"] = min(1.0, float(praw) * m)
    return {"groups": [g.tolist() for g in groups], "F": float(f), "p": float(p),
            "eta2": eta2, "posthoc": posthoc}


def twoway_golden(rng):
    a_lv, b_lv, n = 3, 4, 3
    cells = rng.normal(0, 1.0, (a_lv, b_lv, n))
    cells += np.linspace(0, 1.2, a_lv)[:, None, None]
    cells += np.linspace(0, 0.8, b_lv)[None, :, None]
    cells = np.round(cells, 6)
    rows = []
    for i in range(a_lv):
        for j in range(b_lv):
            for k in range(n):
                rows.append({"value": cells[i, j, k], "A": f"a{i}", "B": f"b{j}"})
    frame = pd.DataFrame(rows)
    fit = ols("value ~ C(A) * C(B)", frame).fit()
    table = sm.stats.anova_lm(fit, typ=2)
    ss_err = float(table.loc["Residual", "sum_sq"])

    def effect(key):
        row = table.loc[key]
        return {"F": float(row["F"]), "p": float(row["PR(>F)"]),
                "partial_eta2": float(row["sum_sq"]) / (float(row["sum_sq"]) + ss_err)}

    return {"table": cells.tolist(),
            "A": effect("C(A)"), "B": effect("C(B)"),
            "interaction": effect("C(A):C(B)")}


def dominance_golden():
    desc = [0.8, 0.9, 0.85]
    asc = [0.1, 0.2, 0.15]
    t, p = ss.ttest_ind(desc, asc, equal_var=True)
    return {"desc": desc, "asc": asc, "t": float(t), "p": float(p)}


def cli_anova_golden(rng):
    # mnss scores for the end-to-end CLI smoke: 3 groups x 6 subjects
    groups = {g: np.round(rng.normal(mu, 1.5, 6), 6).tolist()
              for g, mu in (("fat-c", 6.0), ("for-t", 9.0), ("sham", 12.0))}
    f, p = ss.f_oneway(*groups.values())
    values = np.concatenate(list(groups.values()))
    labels = np.repeat(list(groups.keys()), 6)
    frame = pd.DataFrame({"value": values, "g": labels})
    table = sm.stats.anova_lm(ols("value ~ C(g)", frame).fit(), typ=2)
    ss_b = float(table.loc["C(g)", "sum_sq"])
    ss_w = float(table.loc["Residual", "sum_sq"])
    return {"groups": groups, "F": float(f), "p": float(p),
            "eta2": ss_b / (ss_b + ss_w)}


def main():
    rng = np.random.default_rng(20240817)
    golden = {
        "unpaired_t": unpaired_golden(rng),
        "paired_t": paired_golden(rng),
        "oneway": oneway_golden(rng),
        "twoway": twoway_golden(rng),
        "dominance": dominance_golden(),
        "cli_anova": cli_anova_golden(rng),
    }
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as fh:
        json.dump(golden, fh, indent=1)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
