"""Minibatch sampling, plain SGD with step decay, and AUC-based checkpointing.

Training always optimizes the contrastive loss on the projection-head
embedding.  Validation, run every few epochs on a stratified held-out slice
of the training windows, scores with the normal-template cosine pipeline
under both embedding pathways and keeps the best parameters per pathway, so
checkpoint selection matches whichever pathway is used at test time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from . import scoring
from .loss import LossBatch, LossConfig, batch_loss, batch_loss_grad
from .metrics import LabeledScores, roc_auc
from .numerics import DegenerateVectorError, Rng
from .synthgen import ANOMALOUS, NORMAL, Window, split_train_val


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    lr0: float = 0.01
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 25
    tau: float = 0.1
    batch_normal: int = 6        # anchors (K) per minibatch
    batch_anomalous: int = 24    # negatives (M) per minibatch
    validate_every: int = 5
    negative_mode: str = "average"
    val_fraction: float = 0.2
    jitter_sigma: float = 0.0    # feature-space augmentation noise
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.lr_decay_every, self.validate_every,
               self.batch_anomalous) < 1 or self.batch_normal < 2:
            raise ValueError("epochs/schedule must be positive and batch_normal >= 2")
        if self.lr0 < 0 or self.lr_decay_factor <= 0 or self.tau <= 0:
            raise ValueError("lr0 must be non-negative; decay factor and tau positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.jitter_sigma < 0 or self.momentum < 0:
            raise ValueError("jitter_sigma and momentum must be non-negative")


@dataclass
class Checkpoint:
    params: model_mod.ModelParams
    val_auc: float
    epoch: int


@dataclass
class LogRow:
    epoch: int
    mean_loss: float
    val_auc_projection: float
    val_auc_encoder: float


@dataclass
class TrainResult:
    best: dict[str, Checkpoint]      # keyed by pathway: "projection" / "encoder"
    final_params: model_mod.ModelParams
    log: list[LogRow]


@dataclass
class SampledBatch:
    normal: list[Window]
    anomalous: list[Window]
    normal_features: np.ndarray
    anomalous_features: np.ndarray


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step-decay schedule: lr0 * factor ** floor((epoch - 1) / every)."""
    if epoch < 1:
        raise ValueError("epochs are 1-based")
    return cfg.lr0 * cfg.lr_decay_factor ** ((epoch - 1) // cfg.lr_decay_every)


def sample_batch(windows: list[Window], k: int, m: int, rng: Rng,
                 jitter_sigma: float = 0.0) -> SampledBatch:
    """Draw k normal + m anomalous windows without replacement, with jitter.

    Jitter is additive Gaussian feature noise, the desk-scale stand-in for
    image-space augmentation; sigma = 0 returns the features unmodified.
    """
    normal_pool = [w for w in windows if w.label == NORMAL]
    anom_pool = [w for w in windows if w.label == ANOMALOUS]
    if len(normal_pool) < k or len(anom_pool) < m:
        raise ValueError(
            f"need {k} normal / {m} anomalous windows, "
            f"have {len(normal_pool)} / {len(anom_pool)}"
        )
    idx_n = rng.choice_without_replacement(len(normal_pool), k)
    idx_a = rng.choice_without_replacement(len(anom_pool), m)
    chosen_n = [normal_pool[i] for i in idx_n]
    chosen_a = [anom_pool[i] for i in idx_a]
    xn = np.stack([w.features for w in chosen_n])
    xa = np.stack([w.features for w in chosen_a])
    if jitter_sigma > 0:
        xn = xn + rng.gaussian_array(xn.shape, 0.0, jitter_sigma)
        xa = xa + rng.gaussian_array(xa.shape, 0.0, jitter_sigma)
    return SampledBatch(chosen_n, chosen_a, xn, xa)


def _validation_auc(params, train_normal_feats, val_feats, val_is_normal, use_projection):
    template = scoring.build_template(params, train_normal_feats, use_projection)
    scores = scoring.score_windows(template, params, val_feats, use_projection)
    return roc_auc(LabeledScores(scores, val_is_normal))


def train(windows: list[Window], encoder_dims: list[int], projection_dims: list[int],
          cfg: TrainConfig) -> TrainResult:
    """Full training run over one modality's training windows.

    An epoch is ceil(n_normal / batch_normal) minibatches; anomalous windows
    are resampled freely.  The best checkpoint per embedding pathway is the
    earliest epoch achieving the maximum validation AUC.
    """
    rng = Rng(cfg.seed)
    train_w, val_w = split_train_val(windows, cfg.val_fraction, rng)

    normal_pool = np.stack([w.features for w in train_w if w.label == NORMAL])
    anom_pool = np.stack([w.features for w in train_w if w.label == ANOMALOUS])
    k, m = cfg.batch_normal, cfg.batch_anomalous
    if normal_pool.shape[0] < k or anom_pool.shape[0] < m:
        raise ValueError("training split smaller than one minibatch")
    val_feats = np.stack([w.features for w in val_w])
    val_is_normal = np.array([w.label == NORMAL for w in val_w])

    params = model_mod.init_params(encoder_dims, projection_dims, rng)
    loss_cfg = LossConfig(tau=cfg.tau, negative_mode=cfg.negative_mode)
    velocity = None
    best: dict[str, Checkpoint] = {}
    log: list[LogRow] = []
    n_batches = math.ceil(normal_pool.shape[0] / k)

    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at(epoch, cfg)
        epoch_loss = 0.0
        for step in range(n_batches):
            # same draw sequence as sample_batch, but over prestacked pools:
            # re-partitioning the window list every step would dominate runtime
            idx_n = rng.choice_without_replacement(normal_pool.shape[0], k)
            idx_a = rng.choice_without_replacement(anom_pool.shape[0], m)
            x = np.vstack([normal_pool[idx_n], anom_pool[idx_a]])
            if cfg.jitter_sigma > 0:
                x = x + rng.gaussian_array(x.shape, 0.0, cfg.jitter_sigma)
            with np.errstate(over="ignore", invalid="ignore"):
                try:
                    trace = model_mod.forward(params, x)
                except DegenerateVectorError as exc:
                    raise TrainingDivergedError(
                        f"degenerate embedding at epoch {epoch}, step {step + 1}: {exc}"
                    ) from exc
                if not np.all(np.isfinite(trace.v)):
                    raise TrainingDivergedError(
                        f"non-finite embedding at epoch {epoch}, step {step + 1}"
                    )
                batch = LossBatch(trace.v[:k], trace.v[k:])
                loss = batch_loss(batch, loss_cfg)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss!r} at epoch {epoch}, step {step + 1}"
                )
            grad_n, grad_a = batch_loss_grad(batch, loss_cfg)
            grads = model_mod.backward(params, trace, np.vstack([grad_n, grad_a]))
            velocity = model_mod.sgd_step(params, grads, lr, cfg.momentum, velocity)
            epoch_loss += loss

        last_epoch = epoch == cfg.epochs
        due = epoch % cfg.validate_every == 0
        if due or (last_epoch and not best):
            aucs = {}
            for pathway, use_proj in (("projection", True), ("encoder", False)):
                auc = _validation_auc(params, normal_pool, val_feats, val_is_normal, use_proj)
                aucs[pathway] = auc
                if pathway not in best or auc > best[pathway].val_auc:
                    best[pathway] = Checkpoint(params.copy(), auc, epoch)
            log.append(LogRow(epoch, epoch_loss / n_batches,
                              aucs["projection"], aucs["encoder"]))

    return TrainResult(best=best, final_params=params, log=log)


def save_training_log(path: str, log: list[LogRow]) -> None:
    """CSV with one line per validation event."""
    with open(path, "w") as f:
        f.write("epoch,mean_loss,val_auc_projection,val_auc_encoder\n")
        for row in log:
            f.write(f"{row.epoch},{row.mean_loss!r},"
                    f"{row.val_auc_projection!r},{row.val_auc_encoder!r}\n")
