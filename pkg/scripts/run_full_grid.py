#!/usr/bin/env python3
"""Full experiment: method grid, then rank statistics on the mean AUC grids.

Runs all eight method variants (loss form x embedding pathway x labelling
mode) over the nine modality combinations for each seed, writes per-seed and
mean AUC matrices plus per-cell score exports, and finishes with the
Friedman + Bergmann-Hommel analysis of the mean ROC and PR grids.
"""

import argparse
import os
import sys

from supconad.experiment import ExperimentConfig, run_grid
from supconad.stats import (analyze, load_matrix_csv, save_pvalue_matrix_csv,
                            save_significance_report)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="grid_out")
    ap.add_argument("--seeds", default="42", help="comma-separated run seeds")
    ap.add_argument("--alpha", type=float, default=0.05)
    args = ap.parse_args()

    cfg = ExperimentConfig(seeds=tuple(int(s) for s in args.seeds.split(",") if s),
                           outdir=args.outdir)
    result = run_grid(cfg)
    print(f"grid: {len(result.cells)} cells, {len(result.failures)} failures "
          f"-> {args.outdir}")
    if not result.ok:
        for failure in result.failures:
            print(f"FAILED: {failure}", file=sys.stderr)
        return 1

    for metric in ("roc", "pr"):
        matrix = load_matrix_csv(os.path.join(args.outdir, f"grid_{metric}_mean.csv"))
        report = analyze(matrix, alpha=args.alpha)
        prefix = os.path.join(args.outdir, f"stats_{metric}")
        save_pvalue_matrix_csv(prefix + ".raw_p.csv", report.pvalues.methods,
                               report.pvalues.raw_p)
        save_pvalue_matrix_csv(prefix + ".adjusted_p.csv", report.pvalues.methods,
                               report.pvalues.adjusted_p)
        save_significance_report(prefix + ".significance.csv", report)
        print(f"\n{metric.upper()}: friedman chi2 {report.friedman_chi_sq:.3f} "
              f"(p {report.friedman_p:.4f})")
        if report.significant:
            for a, b in report.significant:
                print(f"  significant at alpha={args.alpha}: {a} vs {b}")
        else:
            print(f"  no significant pairs at alpha={args.alpha}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
