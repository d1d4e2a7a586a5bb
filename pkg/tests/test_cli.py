import json
import os

import numpy as np
import pytest

from supconad import fixtures
from supconad.cli import main
from supconad.model import load_params
from supconad.stats import load_matrix_csv
from supconad.synthgen import load_windows

# tiny-but-feasible generation settings: 22/4 = 5.5, within 10% of 5.45
GEN_FLAGS = [
    "--frame-dim", "6", "--frames-per-clip", "96",
    "--train-normal-clips", "22", "--train-anomalous-clips", "4",
    "--test-normal-clips", "4", "--test-anomalous-clips", "3",
    "--seen-archetypes", "2", "--unseen-archetypes", "3",
]

TRAIN_FLAGS = [
    "--epochs", "4", "--validate-every", "2", "--lr-decay-every", "2",
    "--batch-normal", "2", "--batch-anomalous", "4",
    "--encoder-dims", "96,16,8", "--projection-dims", "8,4",
]


def run(argv):
    return main(argv)


def test_generate_writes_loadable_file(tmp_path):
    out = str(tmp_path / "data.txt")
    assert run(["generate", *GEN_FLAGS, "--seed", "5", "--labelling", "manual",
                "--out", out]) == 0
    cfg, labelling, windows = load_windows(out)
    assert labelling == "manual"
    assert cfg.frame_dim == 6 and cfg.seed == 5
    assert windows and all(w.features.shape == (96,) for w in windows)


def test_generate_config_file_with_flag_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(
        "# comment line\n"
        "frame_dim=6\nframes_per_clip=96\ntrain_normal_clips=11\n"
        "train_anomalous_clips=2\ntest_normal_clips=4\ntest_anomalous_clips=3\n"
        "seen_archetypes=2\nunseen_archetypes=3\nseed=9\nlabelling=original\n"
    )
    out = str(tmp_path / "data.txt")
    # the explicit flag must beat the file's seed=9
    assert run(["generate", "--config", str(cfg_file), "--seed", "123",
                "--out", out]) == 0
    cfg, labelling, _ = load_windows(out)
    assert cfg.seed == 123
    assert cfg.frames_per_clip == 96
    assert labelling == "original"


def test_train_writes_checkpoint_log_scores_curves(tmp_path, capsys):
    data = str(tmp_path / "data.txt")
    run(["generate", *GEN_FLAGS, "--seed", "7", "--labelling", "manual", "--out", data])
    ckpt = str(tmp_path / "model.txt")
    log = str(tmp_path / "log.csv")
    scores = str(tmp_path / "scores.csv")
    curves = str(tmp_path / "curves")
    assert run(["train", "--data", data, "--modality", "top_depth", *TRAIN_FLAGS,
                "--seed", "1", "--checkpoint-out", ckpt, "--log-out", log,
                "--scores-out", scores, "--curves-out", curves]) == 0
    printed = capsys.readouterr().out
    assert "val AUC" in printed and "test ROC AUC" in printed
    params = load_params(ckpt)
    assert params.input_dim == 96
    log_lines = open(log).read().splitlines()
    assert log_lines[0].startswith("epoch,") and len(log_lines) == 3  # epochs 2, 4
    assert open(scores).read().startswith("clip_id,window_index,top_depth,fused,label")
    assert os.path.exists(curves + ".roc.csv") and os.path.exists(curves + ".pr.csv")


def test_fixtures_roundtrip_and_stats_reproduce_known_pairs(tmp_path, capsys):
    outdir = str(tmp_path)
    assert run(["fixtures", "--outdir", outdir]) == 0
    roc = load_matrix_csv(os.path.join(outdir, "fixture_roc.csv"))
    assert roc.methods == fixtures.METHOD_LABELS
    assert np.array_equal(roc.values, fixtures.roc_grid().values)

    assert run(["stats", "--matrix", os.path.join(outdir, "fixture_roc.csv"),
                "--alpha", "0.05"]) == 0
    printed = capsys.readouterr().out
    for a, b in fixtures.ROC_SIGNIFICANT_PAIRS:
        assert f"{a} vs {b}" in printed
    sig_path = os.path.join(outdir, "fixture_roc.significance.csv")
    flagged = {tuple(ln.split(",")[:2])
               for ln in open(sig_path).read().splitlines() if ln.endswith(",yes")}
    assert flagged == {fixtures.canonical_pair(*p) for p in fixtures.ROC_SIGNIFICANT_PAIRS}


def test_stats_rerun_is_idempotent(tmp_path):
    run(["fixtures", "--outdir", str(tmp_path)])
    matrix = str(tmp_path / "fixture_pr.csv")
    run(["stats", "--matrix", matrix])
    first = {p: open(os.path.join(tmp_path, f"fixture_pr.{p}.csv")).read()
             for p in ("raw_p", "adjusted_p", "significance")}
    run(["stats", "--matrix", matrix])
    second = {p: open(os.path.join(tmp_path, f"fixture_pr.{p}.csv")).read()
              for p in ("raw_p", "adjusted_p", "significance")}
    assert first == second


def test_stats_constant_matrix_has_no_significant_pairs(tmp_path, capsys):
    matrix = tmp_path / "flat.csv"
    matrix.write_text(
        "method,d0,d1,d2\n" + "".join(f"m{i},0.5,0.5,0.5\n" for i in range(4))
    )
    assert run(["stats", "--matrix", str(matrix)]) == 0
    assert "no significant pairs" in capsys.readouterr().out


GRID_ARGS = [
    *GEN_FLAGS, *TRAIN_FLAGS,
    "--seeds", "3",
]


def test_grid_runs_and_is_byte_identical_on_rerun(tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(["grid", *GRID_ARGS, "--outdir", out1]) == 0
    assert run(["grid", *GRID_ARGS, "--outdir", out2]) == 0

    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    assert "grid_roc_seed3.csv" in names and "grid_pr_mean.csv" in names
    assert "manifest.json" in names
    for name in names:
        if not name.endswith(".csv"):
            continue
        with open(os.path.join(out1, name), "rb") as fa, \
             open(os.path.join(out2, name), "rb") as fb:
            assert fa.read() == fb.read(), name

    # manifests agree on everything except where they were written
    m1 = json.load(open(os.path.join(out1, "manifest.json")))
    m2 = json.load(open(os.path.join(out2, "manifest.json")))
    m1["config"].pop("outdir")
    m2["config"].pop("outdir")
    assert m1 == m2

    grid = load_matrix_csv(os.path.join(out1, "grid_roc_seed3.csv"))
    assert len(grid.methods) == 8      # 2 losses x 2 heads x 2 labellings
    assert len(grid.datasets) == 9     # the nine modality combinations
    assert np.all((grid.values >= -1) & (grid.values <= 1))

    manifest = json.load(open(os.path.join(out1, "manifest.json")))
    assert manifest["seeds"] == [3]
    assert manifest["failures"] == []
    assert manifest["config"]["gen"]["frame_dim"] == 6


def test_grid_then_stats_pipeline(tmp_path, capsys):
    outdir = str(tmp_path / "g")
    assert run(["grid", *GRID_ARGS, "--outdir", outdir]) == 0
    assert run(["stats", "--matrix", os.path.join(outdir, "grid_roc_mean.csv")]) == 0
    assert "friedman chi2" in capsys.readouterr().out


def test_unknown_modality_rejected():
    with pytest.raises(SystemExit):
        run(["train", "--data", "x", "--modality", "rear_lidar"])
