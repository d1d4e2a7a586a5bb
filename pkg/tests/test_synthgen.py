import numpy as np
import pytest

from supconad.numerics import Rng
from supconad.synthgen import (ANOMALOUS, MODALITIES, NORMAL, ClipRecord,
                               GenConfig, Window, by_modality,
                               dataset_windows, generate_dataset, load_windows,
                               make_windows, save_windows, split_train_val)

# small but feasible: 22/4 = 5.5, within 10% of 5.45
SMALL = dict(frame_dim=5, frames_per_clip=96, train_normal_clips=22,
             train_anomalous_clips=4, test_normal_clips=6, test_anomalous_clips=4,
             seen_archetypes=3, unseen_archetypes=4)


def small_cfg(**overrides):
    return GenConfig(**{**SMALL, **overrides, "seed": overrides.get("seed", 11)})


def manual_clip(frame_labels, n_dims=3, clip_label=ANOMALOUS, split="test",
                archetype_id=2):
    """Clip with hand-set labels and per-frame-index feature content."""
    t = len(frame_labels)
    feats = {}
    for k, mod in enumerate(MODALITIES):
        base = np.arange(t, dtype=np.float64)[:, None] + 1000.0 * k
        feats[mod] = np.repeat(base, n_dims, axis=1)
    return ClipRecord(
        clip_id=0, split=split, clip_label=clip_label,
        frame_labels=np.asarray(frame_labels, dtype=bool),
        archetype_id=archetype_id if clip_label == ANOMALOUS else None,
        features=feats,
    )


# -- config validation ---------------------------------------------------------

def test_config_rejects_bad_contamination():
    with pytest.raises(ValueError):
        small_cfg(contamination=1.0)


def test_config_rejects_infeasible_imbalance():
    with pytest.raises(ValueError, match="imbalance"):
        small_cfg(train_normal_clips=10, train_anomalous_clips=4)


# -- generation ----------------------------------------------------------------

def test_zero_contamination_makes_all_frames_anomalous():
    ds = generate_dataset(small_cfg(contamination=0.0))
    for clip in ds.clips:
        if clip.clip_label == ANOMALOUS:
            assert clip.frame_labels.all()


def test_contamination_fraction_is_respected():
    cfg = small_cfg(contamination=0.4)
    ds = generate_dataset(cfg)
    for clip in ds.clips:
        if clip.clip_label == ANOMALOUS:
            frac = 1.0 - clip.frame_labels.mean()
            assert abs(frac - 0.4) < 1.0 / cfg.frames_per_clip + 1e-12


def test_training_split_never_uses_unseen_archetypes():
    ds = generate_dataset(small_cfg())
    seen_ids = {a.id for a in ds.archetypes if a.seen_in_training}
    unseen_ids = {a.id for a in ds.archetypes if not a.seen_in_training}
    assert len(seen_ids) == 3 and len(unseen_ids) == 4
    train_arches = {c.archetype_id for c in ds.clips_for("train") if c.archetype_id is not None}
    test_arches = {c.archetype_id for c in ds.clips_for("test") if c.archetype_id is not None}
    assert train_arches <= seen_ids
    assert test_arches & unseen_ids  # unseen archetypes do occur at test time


def test_clip_label_consistency():
    ds = generate_dataset(small_cfg())
    for clip in ds.clips:
        assert (clip.clip_label == ANOMALOUS) == bool(clip.frame_labels.any())


def test_modalities_share_labels_but_differ_in_features():
    ds = generate_dataset(small_cfg())
    clip = ds.clips_for("train")[0]
    feats = [clip.features[m] for m in MODALITIES]
    assert all(f.shape == feats[0].shape for f in feats)
    for i in range(1, len(feats)):
        assert not np.allclose(feats[0], feats[i])


def test_default_config_hits_target_imbalance():
    cfg = GenConfig()
    ds = generate_dataset(cfg)
    windows = dataset_windows(ds, "original", split="train")
    per_mod = by_modality(windows)[MODALITIES[0]]
    n_norm = sum(1 for w in per_mod if w.label == NORMAL)
    n_anom = sum(1 for w in per_mod if w.label == ANOMALOUS)
    ratio = n_norm / n_anom
    assert abs(ratio / 5.45 - 1.0) <= 0.10
    assert (n_norm, n_anom) == (1200, 220)


def test_generation_is_deterministic():
    a = generate_dataset(small_cfg())
    b = generate_dataset(small_cfg())
    for ca, cb in zip(a.clips, b.clips):
        assert np.array_equal(ca.frame_labels, cb.frame_labels)
        for m in MODALITIES:
            assert np.array_equal(ca.features[m], cb.features[m])


# -- windowing -------------------------------------------------------------------

def test_64_frame_clip_gives_two_windows():
    clip = manual_clip([False] * 64, clip_label=NORMAL, archetype_id=None)
    windows = make_windows(clip, "original")
    assert len(windows) == 2 * len(MODALITIES)
    per_mod = [w for w in windows if w.modality == MODALITIES[0]]
    assert [w.window_index for w in per_mod] == [0, 1]
    assert all(w.features.shape == (16 * 3,) for w in per_mod)
    # every-other-frame downsampling keeps frames 0,2,...,30 and 32,34,...,62
    got0 = per_mod[0].features.reshape(16, 3)[:, 0]
    assert np.array_equal(got0, np.arange(0, 32, 2, dtype=float))
    got1 = per_mod[1].features.reshape(16, 3)[:, 0]
    assert np.array_equal(got1, np.arange(32, 64, 2, dtype=float))


def test_short_final_window_pads_with_last_frame():
    clip = manual_clip([False] * 40, clip_label=NORMAL, archetype_id=None)
    per_mod = [w for w in make_windows(clip, "original") if w.modality == MODALITIES[0]]
    assert len(per_mod) == 2
    # second raw segment is frames 32..39 plus 24 copies of frame 39,
    # downsampled to positions 32,34,36,38 then eight copies of 39
    expect = np.array([32, 34, 36, 38] + [39] * 12, dtype=float)
    got = per_mod[1].features.reshape(16, 3)[:, 0]
    assert np.array_equal(got, expect)


def test_original_labelling_marks_every_window_of_anomalous_clip():
    labels = [False] * 48 + [True] * 16
    clip = manual_clip(labels)
    windows = [w for w in make_windows(clip, "original") if w.modality == MODALITIES[0]]
    assert [w.label for w in windows] == [ANOMALOUS, ANOMALOUS]


def test_manual_labelling_majority_rule_and_discard():
    # contamination concentrated in the first half of a 64-frame clip
    labels = [False] * 32 + [True] * 32
    clip = manual_clip(labels)
    windows = [w for w in make_windows(clip, "manual") if w.modality == MODALITIES[0]]
    # oracle: count anomalous frames at the retained (even) positions
    retained0 = clip.frame_labels[np.arange(0, 32, 2)].sum()
    retained1 = clip.frame_labels[np.arange(32, 64, 2)].sum()
    assert retained0 == 0 and retained1 == 16
    assert [w.window_index for w in windows] == [1]
    assert windows[0].label == ANOMALOUS


def test_manual_labelling_boundary_window_counts_retained_frames():
    # anomalous run covering 20 of the last 32 raw frames: 10 of 16 retained
    labels = [False] * 44 + [True] * 20
    clip = manual_clip(labels)
    retained = clip.frame_labels[np.arange(32, 64, 2)].sum()
    assert retained == 10  # majority (>= 9) -> kept
    windows = [w for w in make_windows(clip, "manual") if w.modality == MODALITIES[0]]
    assert [w.window_index for w in windows] == [1]


def test_manual_labelling_never_touches_normal_clips():
    clip = manual_clip([False] * 64, clip_label=NORMAL, archetype_id=None)
    for mode in ("original", "manual"):
        windows = [w for w in make_windows(clip, mode) if w.modality == MODALITIES[0]]
        assert len(windows) == 2
        assert all(w.label == NORMAL for w in windows)


def test_empty_clip_rejected():
    clip = manual_clip([], clip_label=NORMAL, archetype_id=None)
    with pytest.raises(ValueError, match="no frames"):
        make_windows(clip, "original")


def test_unknown_labelling_mode_rejected():
    clip = manual_clip([True] * 32)
    with pytest.raises(ValueError, match="labelling"):
        make_windows(clip, "fancy")


def test_make_windows_is_deterministic():
    clip = manual_clip([False] * 20 + [True] * 44)
    for mode in ("original", "manual"):
        a = make_windows(clip, mode)
        b = make_windows(clip, mode)
        assert len(a) == len(b)
        for wa, wb in zip(a, b):
            assert np.array_equal(wa.features, wb.features)
            assert (wa.label, wa.window_index, wa.modality) == \
                (wb.label, wb.window_index, wb.modality)


def test_manual_anomalous_count_never_exceeds_original():
    ds = generate_dataset(small_cfg(contamination=0.45))
    for split in ("train", "test"):
        orig = sum(1 for w in dataset_windows(ds, "original", split=split,
                                              test_labelling="original")
                   if w.label == ANOMALOUS)
        manual = sum(1 for w in dataset_windows(ds, "manual", split=split)
                     if w.label == ANOMALOUS)
        assert manual <= orig


def test_windows_never_straddle_clips():
    ds = generate_dataset(small_cfg())
    cfg = ds.config
    windows = dataset_windows(ds, "original", split="train", test_labelling="original")
    counts = {}
    for w in windows:
        counts.setdefault((w.clip_id, w.modality), 0)
        counts[(w.clip_id, w.modality)] += 1
    assert set(counts.values()) == {cfg.windows_per_clip}


def test_test_windows_record_archetypes():
    ds = generate_dataset(small_cfg())
    for w in dataset_windows(ds, "manual", split="test"):
        if w.label == ANOMALOUS:
            assert w.archetype_id is not None


def test_by_modality_alignment():
    ds = generate_dataset(small_cfg())
    grouped = by_modality(dataset_windows(ds, "manual", split="test"))
    keys = [[(w.clip_id, w.window_index) for w in grouped[m]] for m in MODALITIES]
    assert all(k == keys[0] for k in keys[1:])


# -- train/val split ----------------------------------------------------------------

def _toy_windows(n_normal, n_anomalous, dim=4):
    out = []
    for i in range(n_normal + n_anomalous):
        label = NORMAL if i < n_normal else ANOMALOUS
        out.append(Window(np.full(dim, float(i)), label, i, 0, MODALITIES[0],
                          "train", None))
    return out


def test_split_counts_are_stratified():
    windows = _toy_windows(100, 20)
    train, val = split_train_val(windows, 0.2, Rng(0))
    assert sum(1 for w in val if w.label == NORMAL) == 20
    assert sum(1 for w in val if w.label == ANOMALOUS) == 4
    assert sum(1 for w in train if w.label == NORMAL) == 80
    assert sum(1 for w in train if w.label == ANOMALOUS) == 16
    assert len(train) + len(val) == 120


def test_split_is_deterministic_and_disjoint():
    windows = _toy_windows(30, 10)
    t1, v1 = split_train_val(windows, 0.25, Rng(5))
    t2, v2 = split_train_val(windows, 0.25, Rng(5))
    assert [w.clip_id for w in t1] == [w.clip_id for w in t2]
    assert [w.clip_id for w in v1] == [w.clip_id for w in v2]
    assert not {w.clip_id for w in t1} & {w.clip_id for w in v1}


def test_split_rejects_missing_class():
    with pytest.raises(ValueError, match="no anomalous"):
        split_train_val(_toy_windows(10, 0), 0.2, Rng(0))


def test_split_rejects_empty_side():
    with pytest.raises(ValueError, match="empty side"):
        split_train_val(_toy_windows(10, 2), 0.05, Rng(0))


def test_split_rejects_bad_fraction():
    with pytest.raises(ValueError):
        split_train_val(_toy_windows(10, 5), 1.0, Rng(0))


# -- persistence --------------------------------------------------------------------

def test_window_file_round_trip_is_exact(tmp_path):
    cfg = small_cfg()
    ds = generate_dataset(cfg)
    windows = dataset_windows(ds, "manual")
    path = str(tmp_path / "windows.txt")
    save_windows(path, cfg, "manual", windows)
    cfg2, labelling, loaded = load_windows(path)
    assert cfg2 == cfg
    assert labelling == "manual"
    assert len(loaded) == len(windows)
    for a, b in zip(windows, loaded):
        assert np.array_equal(a.features, b.features)
        assert (a.label, a.clip_id, a.window_index, a.modality, a.split,
                a.archetype_id) == (b.label, b.clip_id, b.window_index,
                                    b.modality, b.split, b.archetype_id)


def test_window_file_rejects_unknown_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# other-format v2\n")
    with pytest.raises(ValueError, match="unrecognized"):
        load_windows(str(path))
