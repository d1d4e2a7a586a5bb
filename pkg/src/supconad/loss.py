"""Supervised contrastive loss over normal anchors and anomalous negatives.

Two variants of the negative-pair aggregation are supported: ``sum`` (the
baseline, denominator adds the plain sum of negative-pair exponentials) and
``average`` (the modified form, denominator adds that sum divided by the
number of negatives M).  Averaging keeps the aggregate similarity of the
negatives small when they crowd the anchors, which eases optimization.

For one ordered anchor pair (i, j), with a = exp(v_i . v_j / tau) and
S = sum_m exp(v_i . v_am / tau):

    L_ij = -log(a / (a + c * S)),   c = 1 (sum) or 1/M (average)

and the minibatch loss is the mean of L_ij over all K*(K-1) ordered pairs.
Every -log term is evaluated through a softplus of shifted logits, so
temperatures as sharp as 0.1 with cosines near +-1 cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class LossConfig:
    """Temperature and negative-pair aggregation mode.

    negative_scale, when given, overrides the mode's implicit scale on the
    summed negative exponentials (1 for sum, 1/M for average); the scaling
    is otherwise a fixed property of the two named variants.
    """

    tau: float = 0.1
    negative_mode: str = "average"
    negative_scale: float | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.negative_mode not in ("sum", "average"):
            raise ValueError(f"unknown negative_mode {self.negative_mode!r}")
        if self.negative_scale is not None and self.negative_scale <= 0:
            raise ValueError("negative_scale must be positive")

    def scale(self, n_negatives: int) -> float:
        if self.negative_scale is not None:
            return self.negative_scale
        return 1.0 if self.negative_mode == "sum" else 1.0 / n_negatives


class LossBatch:
    """K unit-norm anchor embeddings (normal) and M negatives (anomalous)."""

    def __init__(self, normal: np.ndarray, anomalous: np.ndarray):
        vn = as_matrix(normal, "normal embeddings")
        va = as_matrix(anomalous, "anomalous embeddings")
        if vn.shape[0] < 2:
            raise ValueError("need at least K=2 normal embeddings")
        if va.shape[0] < 1:
            raise ValueError("need at least M=1 anomalous embedding")
        if vn.shape[1] != va.shape[1]:
            raise ValueError("embedding dimensions differ")
        for name, m in (("normal", vn), ("anomalous", va)):
            norms = np.linalg.norm(m, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
                raise ValueError(f"{name} embeddings must be unit-norm within {UNIT_NORM_TOL}")
        self.normal = vn
        self.anomalous = va

    @property
    def k(self) -> int:
        return self.normal.shape[0]

    @property
    def m(self) -> int:
        return self.anomalous.shape[0]


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x) without overflow for large |x|
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _neg_logsumexp_rows(batch: LossBatch, cfg: LossConfig) -> np.ndarray:
    """log sum_m exp(v_i . v_am / tau) per anchor row i, shift-stabilized."""
    logits = batch.normal @ batch.anomalous.T / cfg.tau
    mx = logits.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(logits - mx).sum(axis=1, keepdims=True)))[:, 0]


def pair_loss(batch: LossBatch, i: int, j: int, cfg: LossConfig) -> float:
    """Loss of the ordered anchor pair (i, j); always positive."""
    if i == j:
        raise ValueError("pair indices must differ")
    k = batch.k
    if not (0 <= i < k and 0 <= j < k):
        raise ValueError(f"pair indices out of range for K={k}")
    z_pos = float(batch.normal[i] @ batch.normal[j]) / cfg.tau
    log_s = _neg_logsumexp_rows(batch, cfg)[i]
    c = cfg.scale(batch.m)
    return float(_softplus(np.asarray(np.log(c) + log_s - z_pos)))


def batch_loss(batch: LossBatch, cfg: LossConfig) -> float:
    """Mean of pair_loss over all K*(K-1) ordered anchor pairs."""
    z = batch.normal @ batch.normal.T / cfg.tau
    log_s = _neg_logsumexp_rows(batch, cfg)
    c = cfg.scale(batch.m)
    arg = np.log(c) + log_s[:, None] - z
    terms = _softplus(arg)
    np.fill_diagonal(terms, 0.0)
    k = batch.k
    return float(terms.sum() / (k * (k - 1)))


def batch_loss_grad(batch: LossBatch, cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of batch_loss w.r.t. every anchor and negative vector.

    The gradient is taken treating the embeddings as free vectors; chaining
    through any upstream normalization is the caller's concern.
    """
    vn, va = batch.normal, batch.anomalous
    k, m = batch.k, batch.m
    tau, c = cfg.tau, cfg.scale(m)

    z = vn @ vn.T / tau                       # anchor-pair logits, (K, K)
    neg_logits = vn @ va.T / tau              # anchor-negative logits, (K, M)
    mx = neg_logits.max(axis=1, keepdims=True)
    exp_neg = np.exp(neg_logits - mx)
    log_s = (mx + np.log(exp_neg.sum(axis=1, keepdims=True)))[:, 0]
    w = exp_neg / exp_neg.sum(axis=1, keepdims=True)     # softmax over negatives per anchor

    # sigma[i, j] = share of the (i, j) denominator carried by the negatives
    arg = np.log(c) + log_s[:, None] - z
    sigma = 1.0 / (1.0 + np.exp(-arg))
    np.fill_diagonal(sigma, 0.0)

    norm = 1.0 / (k * (k - 1) * tau)
    s_row = sigma.sum(axis=1)                 # total negative share per anchor i

    grad_vn = norm * (s_row[:, None] * (w @ va) - sigma @ vn - sigma.T @ vn)
    grad_va = norm * ((w * s_row[:, None]).T @ vn)
    return grad_vn, grad_va
