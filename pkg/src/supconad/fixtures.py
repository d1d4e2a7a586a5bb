"""Bundled reference AUC grids and their known significance patterns.

Two grids of externally measured AUCs — ROC and PR — for eight method
variants (loss form x projection-head use x labelling mode) across nine
camera modality combinations.  Variant codes: OL/ML = original (sum) or
modified (average) loss, NP/PH = no projection head or projection head at
test time, NL/ML suffix = original (no relabelling) or manual labelling.

The grids serve as end-to-end regression fixtures for the rank-based
statistics pipeline: running the Friedman + Bergmann-Hommel analysis on them
must flag exactly the pair sets recorded below at alpha = 0.05.
"""

from __future__ import annotations

import numpy as np

from .stats import ResultsMatrix

METHOD_LABELS = (
    "OL-NP-NL", "OL-NP-ML", "OL-PH-NL", "OL-PH-ML",
    "ML-NP-NL", "ML-NP-ML", "ML-PH-NL", "ML-PH-ML",
)

DATASET_LABELS = (
    "top_d", "top_ir", "top_dir", "front_d", "front_ir", "front_dir",
    "fusion_d", "fusion_ir", "fusion_dir",
)

# Rows below are per modality combination, columns per method (METHOD_LABELS
# order); the matrices are transposed into (methods x datasets) orientation.
_ROC_BY_DATASET = np.array([
    [0.8713, 0.8573, 0.8876, 0.8604, 0.8983, 0.9080, 0.8722, 0.9202],  # top_d
    [0.8456, 0.8423, 0.8406, 0.8642, 0.8118, 0.8769, 0.7952, 0.8913],  # top_ir
    [0.8663, 0.9007, 0.8881, 0.9021, 0.8919, 0.8969, 0.8592, 0.9273],  # top_dir
    [0.8503, 0.9156, 0.8577, 0.9064, 0.8759, 0.8773, 0.8461, 0.8851],  # front_d
    [0.8367, 0.8532, 0.8324, 0.8823, 0.8854, 0.8782, 0.8448, 0.9113],  # front_ir
    [0.8818, 0.9302, 0.8998, 0.8945, 0.8969, 0.9250, 0.8722, 0.9268],  # front_dir
    [0.9229, 0.9514, 0.9082, 0.9042, 0.9449, 0.9451, 0.9154, 0.9517],  # fusion_d
    [0.8946, 0.8937, 0.8941, 0.9289, 0.9240, 0.9337, 0.8932, 0.9552],  # fusion_ir
    [0.9342, 0.9536, 0.9248, 0.9451, 0.9599, 0.9619, 0.9366, 0.9738],  # fusion_dir
])

_PR_BY_DATASET = np.array([
    [0.8925, 0.8734, 0.9097, 0.8994, 0.9253, 0.9152, 0.8979, 0.9243],  # top_d
    [0.8764, 0.9152, 0.8985, 0.9062, 0.9226, 0.9221, 0.8512, 0.9022],  # top_ir
    [0.8910, 0.9154, 0.9005, 0.9019, 0.9162, 0.9115, 0.8947, 0.9182],  # top_dir
    [0.8900, 0.9127, 0.8922, 0.9373, 0.9274, 0.9257, 0.8952, 0.9176],  # front_d
    [0.8997, 0.9016, 0.9090, 0.9457, 0.9232, 0.9542, 0.8931, 0.9024],  # front_ir
    [0.9002, 0.9218, 0.9123, 0.9304, 0.9358, 0.9607, 0.9138, 0.9284],  # front_dir
    [0.9321, 0.9400, 0.9312, 0.9502, 0.9498, 0.9611, 0.9439, 0.9497],  # fusion_d
    [0.9020, 0.9547, 0.9442, 0.9518, 0.9254, 0.9728, 0.9209, 0.9334],  # fusion_ir
    [0.9618, 0.9578, 0.9695, 0.9544, 0.9772, 0.9721, 0.9427, 0.9591],  # fusion_dir
])


def roc_grid() -> ResultsMatrix:
    return ResultsMatrix(METHOD_LABELS, DATASET_LABELS, _ROC_BY_DATASET.T.copy())


def pr_grid() -> ResultsMatrix:
    return ResultsMatrix(METHOD_LABELS, DATASET_LABELS, _PR_BY_DATASET.T.copy())


# Pairs the rank analysis must flag as significant at alpha = 0.05
# (unordered; stored with the lower METHOD_LABELS index first).
ROC_SIGNIFICANT_PAIRS = frozenset({
    ("OL-NP-NL", "ML-PH-ML"),
    ("OL-PH-NL", "ML-PH-ML"),
    ("ML-NP-ML", "ML-PH-NL"),
    ("ML-PH-NL", "ML-PH-ML"),
})

PR_SIGNIFICANT_PAIRS = frozenset({
    ("OL-NP-NL", "OL-PH-ML"),
    ("OL-NP-NL", "ML-NP-NL"),
    ("OL-NP-NL", "ML-NP-ML"),
    ("OL-PH-NL", "ML-NP-ML"),
    ("ML-NP-NL", "ML-PH-NL"),
    ("ML-NP-ML", "ML-PH-NL"),
})


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    """Order a method pair by METHOD_LABELS index for set comparisons."""
    return (a, b) if METHOD_LABELS.index(a) < METHOD_LABELS.index(b) else (b, a)
