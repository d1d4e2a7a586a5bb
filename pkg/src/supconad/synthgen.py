"""Synthetic multi-view, multi-modal clip generator and windowing pipeline.

Clips mimic the structural properties of a driver-monitoring recording
session: four synchronized modality streams (top/front view, depth/IR
channel), heavy normal-vs-anomalous imbalance, anomaly archetypes that are
split into training-visible and test-only sets, and anomalous clips whose
frames are partially normal behavior (label contamination).  Frame features
are low-dimensional vectors, not images; the geometry (archetype means on a
shell around the per-modality normal mean, AR(1)-smoothed frame noise) keeps
training fast while leaving the detection task non-trivial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum

import numpy as np

from .numerics import Rng

NORMAL = "normal"
ANOMALOUS = "anomalous"
LABELLING_MODES = ("original", "manual")

WINDOW_RAW_LEN = 32   # frames per extracted segment
WINDOW_LEN = 16       # frames kept after every-other-frame downsampling
MANUAL_MAJORITY = 9   # anomalous retained frames required to keep a window


class Modality(Enum):
    TOP_DEPTH = ("top", "depth")
    TOP_IR = ("top", "ir")
    FRONT_DEPTH = ("front", "depth")
    FRONT_IR = ("front", "ir")

    @property
    def view(self) -> str:
        return self.value[0]

    @property
    def channel(self) -> str:
        return self.value[1]

    @property
    def key(self) -> str:
        return f"{self.view}_{self.channel}"

    @classmethod
    def from_key(cls, key: str) -> "Modality":
        for m in cls:
            if m.key == key:
                return m
        raise ValueError(f"unknown modality {key!r}")


MODALITIES = tuple(Modality)


@dataclass(frozen=True)
class GenConfig:
    frame_dim: int = 12
    frames_per_clip: int = 160
    train_normal_clips: int = 240
    train_anomalous_clips: int = 44
    test_normal_clips: int = 60
    test_anomalous_clips: int = 24
    contamination: float = 0.45       # fraction of normal-behavior frames in anomalous clips
    target_imbalance: float = 5.45    # normal/anomalous training-window ratio, original labelling
    seen_archetypes: int = 8
    unseen_archetypes: int = 16
    archetype_radius: float = 1.2
    frame_noise_std: float = 1.0
    ar_coeff: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.frame_dim <= 0 or self.frames_per_clip <= 0:
            raise ValueError("frame_dim and frames_per_clip must be positive")
        if min(self.train_normal_clips, self.train_anomalous_clips,
               self.test_normal_clips, self.test_anomalous_clips) <= 0:
            raise ValueError("clip counts must be positive")
        if not 0.0 <= self.contamination < 1.0:
            raise ValueError("contamination must be in [0, 1)")
        if self.target_imbalance <= 1.0:
            raise ValueError("target_imbalance must exceed 1")
        if self.seen_archetypes <= 0 or self.unseen_archetypes <= 0:
            raise ValueError("archetype counts must be positive")
        # Every clip yields the same window count, so the achievable
        # training imbalance is fixed by the clip counts; reject configs
        # that cannot land within 10% of the requested ratio.
        achieved = self.train_normal_clips / self.train_anomalous_clips
        if abs(achieved / self.target_imbalance - 1.0) > 0.10:
            raise ValueError(
                f"clip counts give imbalance {achieved:.3f}, more than 10% away "
                f"from target {self.target_imbalance}"
            )

    @property
    def windows_per_clip(self) -> int:
        return math.ceil(self.frames_per_clip / WINDOW_RAW_LEN)


@dataclass(frozen=True)
class AnomalyArchetype:
    id: int
    means: dict[Modality, np.ndarray]   # per-modality frame-feature mean
    spread: float
    seen_in_training: bool


@dataclass
class ClipRecord:
    clip_id: int
    split: str                          # "train" | "test"
    clip_label: str                     # NORMAL | ANOMALOUS
    frame_labels: np.ndarray            # bool, True where the frame is anomalous
    archetype_id: int | None
    features: dict[Modality, np.ndarray]  # (frames, frame_dim) per modality


@dataclass
class Window:
    features: np.ndarray                # flattened (WINDOW_LEN * frame_dim,)
    label: str
    clip_id: int
    window_index: int
    modality: Modality
    split: str
    archetype_id: int | None


@dataclass
class Dataset:
    config: GenConfig
    archetypes: list[AnomalyArchetype]
    clips: list[ClipRecord]

    def clips_for(self, split: str) -> list[ClipRecord]:
        return [c for c in self.clips if c.split == split]


def _normal_means(cfg: GenConfig, rng: Rng) -> dict[Modality, np.ndarray]:
    return {m: rng.gaussian_array((cfg.frame_dim,), 0.0, 1.0) for m in MODALITIES}


def _make_archetypes(cfg: GenConfig, mu: dict[Modality, np.ndarray], rng: Rng) -> list[AnomalyArchetype]:
    archetypes = []
    total = cfg.seen_archetypes + cfg.unseen_archetypes
    for a in range(total):
        spread = 0.8 + 0.4 * rng.uniform()
        means = {}
        for m in MODALITIES:
            direction = rng.gaussian_array((cfg.frame_dim,))
            direction /= np.linalg.norm(direction)
            radius = cfg.archetype_radius * (0.8 + 0.4 * rng.uniform())
            means[m] = mu[m] + radius * direction
        archetypes.append(AnomalyArchetype(a, means, spread, a < cfg.seen_archetypes))
    return archetypes


def _frame_label_layout(cfg: GenConfig, rng: Rng) -> np.ndarray:
    """Anomalous-frame mask for one anomalous clip.

    The anomalous action occupies one contiguous run; the remaining
    contamination-fraction of frames keeps showing normal behavior.
    """
    t = cfg.frames_per_clip
    n_normal = min(int(round(cfg.contamination * t)), t - 1)
    run = t - n_normal
    start = rng.below(n_normal + 1)
    mask = np.zeros(t, dtype=bool)
    mask[start:start + run] = True
    return mask


def _clip_features(cfg: GenConfig, mu: np.ndarray, arch_mean: np.ndarray | None,
                   spread: float, mask: np.ndarray, rng: Rng) -> np.ndarray:
    """One modality's (frames, dim) features: per-frame mean + AR(1) deviations."""
    t, d = cfg.frames_per_clip, cfg.frame_dim
    means = np.tile(mu, (t, 1))
    if arch_mean is not None:
        means[mask] = arch_mean
    noise_std = np.full((t, 1), cfg.frame_noise_std)
    if arch_mean is not None:
        noise_std[mask] *= spread
    eps = rng.gaussian_array((t, d)) * noise_std
    dev = np.empty((t, d))
    blend = cfg.ar_coeff
    prev = np.zeros(d)
    for i in range(t):
        prev = blend * prev + (1.0 - blend) * eps[i]
        dev[i] = prev
    return means + dev


def generate_dataset(cfg: GenConfig) -> Dataset:
    """Generate synchronized four-modality clips for both splits.

    Training anomalous clips cycle through the seen archetypes only; test
    anomalous clips cycle through seen + unseen so every archetype appears.
    Modality streams of one clip share the frame-label sequence but are
    generated from modality-specific means with independent noise.
    """
    master = Rng(cfg.seed)
    rng_global = master.spawn(0)
    rng_layout = master.spawn(1)

    mu = _normal_means(cfg, rng_global)
    archetypes = _make_archetypes(cfg, mu, rng_global)
    seen = [a for a in archetypes if a.seen_in_training]

    plan = (
        [("train", NORMAL)] * cfg.train_normal_clips
        + [("train", ANOMALOUS)] * cfg.train_anomalous_clips
        + [("test", NORMAL)] * cfg.test_normal_clips
        + [("test", ANOMALOUS)] * cfg.test_anomalous_clips
    )
    clips = []
    anom_counter = {"train": 0, "test": 0}
    for clip_id, (split, label) in enumerate(plan):
        if label == ANOMALOUS:
            pool = seen if split == "train" else archetypes
            arch = pool[anom_counter[split] % len(pool)]
            anom_counter[split] += 1
            mask = _frame_label_layout(cfg, rng_layout)
        else:
            arch = None
            mask = np.zeros(cfg.frames_per_clip, dtype=bool)
        feats = {}
        for mi, mod in enumerate(MODALITIES):
            rng_feat = master.spawn(1000 + clip_id * len(MODALITIES) + mi)
            feats[mod] = _clip_features(
                cfg, mu[mod],
                arch.means[mod] if arch else None,
                arch.spread if arch else 1.0,
                mask, rng_feat,
            )
        clips.append(ClipRecord(
            clip_id=clip_id,
            split=split,
            clip_label=label,
            frame_labels=mask,
            archetype_id=arch.id if arch else None,
            features=feats,
        ))
    return Dataset(cfg, archetypes, clips)


def make_windows(clip: ClipRecord, labelling: str) -> list[Window]:
    """Cut one clip into non-overlapping, downsampled windows for all modalities.

    Segments of 32 frames are taken back to back; a short final segment is
    padded by repeating the last available frame, then every other frame is
    kept (32 -> 16).  Under ``original`` labelling every window of an
    anomalous clip inherits the clip label.  Under ``manual`` labelling a
    window of an anomalous clip is kept as anomalous only when at least
    MANUAL_MAJORITY of its 16 retained frames are anomalous; the rest are
    discarded.  Windows of normal clips are never relabelled or discarded.
    """
    if labelling not in LABELLING_MODES:
        raise ValueError(f"unknown labelling mode {labelling!r}")
    t = len(clip.frame_labels)
    if t == 0:
        raise ValueError("clip has no frames")

    keep = np.arange(0, WINDOW_RAW_LEN, 2)
    windows = []
    for w, start in enumerate(range(0, t, WINDOW_RAW_LEN)):
        idx = np.minimum(np.arange(start, start + WINDOW_RAW_LEN), t - 1)[keep]
        if clip.clip_label == ANOMALOUS:
            if labelling == "original":
                label = ANOMALOUS
            else:
                if int(clip.frame_labels[idx].sum()) < MANUAL_MAJORITY:
                    continue
                label = ANOMALOUS
        else:
            label = NORMAL
        for mod in MODALITIES:
            windows.append(Window(
                features=clip.features[mod][idx].reshape(-1).copy(),
                label=label,
                clip_id=clip.clip_id,
                window_index=w,
                modality=mod,
                split=clip.split,
                archetype_id=clip.archetype_id,
            ))
    return windows


def dataset_windows(ds: Dataset, labelling: str, split: str | None = None,
                    test_labelling: str = "manual") -> list[Window]:
    """Windows for the whole dataset.

    The labelling mode is a training-data property; the test split always
    uses frame-level truth (``manual`` majority labelling) so all method
    variants are evaluated against one fixed, comparable test set.
    """
    out = []
    for clip in ds.clips:
        if split is not None and clip.split != split:
            continue
        mode = labelling if clip.split == "train" else test_labelling
        out.extend(make_windows(clip, mode))
    return out


def by_modality(windows: list[Window]) -> dict[Modality, list[Window]]:
    """Group windows per modality, aligned by (clip_id, window_index)."""
    groups: dict[Modality, list[Window]] = {m: [] for m in MODALITIES}
    for w in windows:
        groups[w.modality].append(w)
    for m in MODALITIES:
        groups[m].sort(key=lambda w: (w.clip_id, w.window_index))
    return groups


def split_train_val(windows: list[Window], fraction: float, rng: Rng) -> tuple[list[Window], list[Window]]:
    """Label-stratified split; per class, round(fraction * n) windows go to val."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    train: list[Window] = []
    val: list[Window] = []
    for label in (NORMAL, ANOMALOUS):
        group = [w for w in windows if w.label == label]
        if not group:
            raise ValueError(f"no {label} windows to split")
        n_val = int(round(fraction * len(group)))
        if n_val == 0 or n_val == len(group):
            raise ValueError(f"split leaves an empty side for {label} windows")
        perm = rng.shuffled(len(group))
        val.extend(group[i] for i in perm[:n_val])
        train.extend(group[i] for i in perm[n_val:])
    return train, val


# -- window file format (version 1) ------------------------------------------
#
#   # supconad-windows v1
#   # labelling=<mode>
#   # <config field>=<value>        (one line per GenConfig field)
#   split,modality,clip_id,window_index,label,archetype,f0,f1,...
#
# Floats are written with repr, which round-trips float64 exactly.

def save_windows(path: str, cfg: GenConfig, labelling: str, windows: list[Window]) -> None:
    with open(path, "w") as f:
        f.write("# supconad-windows v1\n")
        f.write(f"# labelling={labelling}\n")
        for fld in fields(GenConfig):
            f.write(f"# {fld.name}={getattr(cfg, fld.name)!r}\n")
        for w in windows:
            arch = "" if w.archetype_id is None else str(w.archetype_id)
            feat = ",".join(repr(float(x)) for x in w.features)
            f.write(f"{w.split},{w.modality.key},{w.clip_id},{w.window_index},"
                    f"{w.label},{arch},{feat}\n")


def load_windows(path: str) -> tuple[GenConfig, str, list[Window]]:
    cfg_kwargs: dict = {}
    labelling = None
    windows = []
    field_types = {f.name: f.type for f in fields(GenConfig)}
    with open(path) as f:
        first = f.readline().rstrip("\n")
        if first != "# supconad-windows v1":
            raise ValueError(f"unrecognized window file header in {path}")
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                if key == "labelling":
                    labelling = value
                elif key in field_types:
                    caster = {"int": int, "float": float}[field_types[key]]
                    cfg_kwargs[key] = caster(value)
                continue
            parts = line.split(",")
            split, mod_key, clip_id, w_idx, label, arch = parts[:6]
            windows.append(Window(
                features=np.array([float(t) for t in parts[6:]], dtype=np.float64),
                label=label,
                clip_id=int(clip_id),
                window_index=int(w_idx),
                modality=Modality.from_key(mod_key),
                split=split,
                archetype_id=None if arch == "" else int(arch),
            ))
    if labelling is None:
        raise ValueError("window file is missing the labelling header")
    return GenConfig(**cfg_kwargs), labelling, windows
