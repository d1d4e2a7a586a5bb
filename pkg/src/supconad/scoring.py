"""Normal-template construction, cosine scoring and multi-modality fusion.

A single template per modality is the arithmetic mean of the unit-norm
embeddings of normal training windows; it is deliberately *not* re-normalized,
so its norm (<= 1) encodes how concentrated the normal class is.  A test
window's score is the dot product between the template and the window's unit
embedding, hence always in [-1, 1].  Fusing modalities averages their scores
over synchronized windows.

Two embedding pathways exist: the projection-head output (retained at test
time) and the encoder output h, L2-normalized on demand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from .metrics import LabeledScores
from .numerics import l2_normalize_rows
from .synthgen import MODALITIES, NORMAL, Modality, Window

PATHWAYS = ("projection", "encoder")

# The nine evaluated modality combinations: single view+channel, per-view
# channel fusion, per-channel view fusion, and everything combined.
MODALITY_COMBOS: dict[str, tuple[Modality, ...]] = {
    "top_d": (Modality.TOP_DEPTH,),
    "top_ir": (Modality.TOP_IR,),
    "top_dir": (Modality.TOP_DEPTH, Modality.TOP_IR),
    "front_d": (Modality.FRONT_DEPTH,),
    "front_ir": (Modality.FRONT_IR,),
    "front_dir": (Modality.FRONT_DEPTH, Modality.FRONT_IR),
    "fusion_d": (Modality.TOP_DEPTH, Modality.FRONT_DEPTH),
    "fusion_ir": (Modality.TOP_IR, Modality.FRONT_IR),
    "fusion_dir": tuple(MODALITIES),
}


@dataclass(frozen=True)
class NormalTemplate:
    v_n: np.ndarray
    source: str                      # "projection" | "encoder"
    modality: Modality | None = None


@dataclass
class ScoreRecord:
    clip_id: int
    window_index: int
    per_modality: dict[Modality, float]
    fused_score: float
    label: str


def _pathway_flag(use_projection: bool) -> str:
    return "projection" if use_projection else "encoder"


def embed(params: model_mod.ModelParams, features: np.ndarray, use_projection: bool) -> np.ndarray:
    """Unit-norm embedding(s) of one window or a (batch, dim) feature matrix."""
    trace = model_mod.forward(params, features)
    if use_projection:
        return trace.v
    h = np.atleast_2d(trace.h)
    out = l2_normalize_rows(h)
    return out[0] if trace.single else out


def build_template(params: model_mod.ModelParams, normal_features: np.ndarray,
                   use_projection: bool, modality: Modality | None = None) -> NormalTemplate:
    """Mean of unit embeddings of normal windows (not re-normalized)."""
    feats = np.atleast_2d(np.asarray(normal_features, dtype=np.float64))
    if feats.shape[0] == 0:
        raise ValueError("need at least one normal window to build a template")
    emb = embed(params, feats, use_projection)
    return NormalTemplate(emb.mean(axis=0), _pathway_flag(use_projection), modality)


def score_window(template: NormalTemplate, params: model_mod.ModelParams,
                 features: np.ndarray, use_projection: bool) -> float:
    """Cosine similarity of one test window to the normal template."""
    if template.source != _pathway_flag(use_projection):
        raise ValueError(
            f"template was built from the {template.source} pathway, "
            f"scoring requested {_pathway_flag(use_projection)}"
        )
    v = embed(params, np.asarray(features, dtype=np.float64), use_projection)
    return float(template.v_n @ v)


def score_windows(template: NormalTemplate, params: model_mod.ModelParams,
                  features: np.ndarray, use_projection: bool) -> np.ndarray:
    """Vectorized score_window over a (batch, dim) feature matrix."""
    if template.source != _pathway_flag(use_projection):
        raise ValueError(
            f"template was built from the {template.source} pathway, "
            f"scoring requested {_pathway_flag(use_projection)}"
        )
    v = embed(params, np.atleast_2d(features), use_projection)
    return v @ template.v_n


def fuse_scores(per_modality: dict[Modality, float]) -> float:
    """Arithmetic mean of the present per-modality scores."""
    if not per_modality:
        raise ValueError("need at least one modality score to fuse")
    return float(sum(per_modality.values()) / len(per_modality))


def score_aligned_windows(models: dict[Modality, model_mod.ModelParams],
                          templates: dict[Modality, NormalTemplate],
                          windows: dict[Modality, list[Window]],
                          combo: tuple[Modality, ...],
                          use_projection: bool) -> list[ScoreRecord]:
    """Score synchronized windows of a modality combination and fuse.

    The per-modality window lists must be aligned: entry i of every modality
    refers to the same (clip_id, window_index).  Each modality is scored with
    its own model and template.
    """
    keys = None
    for mod in combo:
        k = [(w.clip_id, w.window_index) for w in windows[mod]]
        if keys is None:
            keys = k
        elif k != keys:
            raise ValueError("modality window lists are not aligned")
    assert keys is not None
    labels = [w.label for w in windows[combo[0]]]
    per_mod_scores = {}
    for mod in combo:
        feats = np.stack([w.features for w in windows[mod]])
        per_mod_scores[mod] = score_windows(templates[mod], models[mod], feats, use_projection)
    records = []
    for i, (clip_id, w_idx) in enumerate(keys):
        scores = {mod: float(per_mod_scores[mod][i]) for mod in combo}
        records.append(ScoreRecord(clip_id, w_idx, scores, fuse_scores(scores), labels[i]))
    return records


def records_to_labeled_scores(records: list[ScoreRecord]) -> LabeledScores:
    scores = np.array([r.fused_score for r in records])
    labels = np.array([r.label == NORMAL for r in records])
    return LabeledScores(scores, labels)


def save_scores(path: str, records: list[ScoreRecord]) -> None:
    """Score CSV: window id, one column per present modality, fused, label."""
    if not records:
        raise ValueError("no score records to save")
    mods = [m for m in MODALITIES if m in records[0].per_modality]
    with open(path, "w") as f:
        f.write("clip_id,window_index," + ",".join(m.key for m in mods) + ",fused,label\n")
        for r in records:
            vals = ",".join(repr(r.per_modality[m]) for m in mods)
            f.write(f"{r.clip_id},{r.window_index},{vals},{r.fused_score!r},{r.label}\n")
