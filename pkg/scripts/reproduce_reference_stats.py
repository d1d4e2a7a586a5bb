#!/usr/bin/env python3
"""Rank analysis of the bundled reference AUC grids.

Emits the two reference grids (eight method variants x nine modality
combinations, ROC and PR AUC) as CSVs, runs the Friedman + Bergmann-Hommel
pipeline on each, and checks the flagged pairs against the significance
pattern recorded with the fixtures.
"""

import argparse
import sys

from supconad import fixtures
from supconad.stats import analyze


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()

    ok = True
    for name, grid, expected in (
        ("ROC", fixtures.roc_grid(), fixtures.ROC_SIGNIFICANT_PAIRS),
        ("PR", fixtures.pr_grid(), fixtures.PR_SIGNIFICANT_PAIRS),
    ):
        report = analyze(grid, alpha=args.alpha)
        got = {fixtures.canonical_pair(*p) for p in report.significant}
        print(f"\n{name} grid: friedman chi2 {report.friedman_chi_sq:.3f} "
              f"(p {report.friedman_p:.5f})")
        ranks = sorted(report.mean_ranks.items(), key=lambda kv: kv[1])
        print("  mean ranks: " + ", ".join(f"{m}={r:.2f}" for m, r in ranks))
        for a, b in sorted(got):
            i, j = grid.methods.index(a), grid.methods.index(b)
            print(f"  significant: {a} vs {b} "
                  f"(adjusted p {report.pvalues.adjusted_p[i, j]:.4f})")
        match = got == set(expected)
        ok &= match
        print(f"  pattern match vs recorded significance: {'yes' if match else 'NO'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
