"""Experiment orchestration: the full method grid and the fused benchmark.

A grid run trains, per seed, one model per (labelling mode, loss form,
modality) and reuses it across the nine modality combinations and both
embedding pathways (the head is always trained; only its use at test time
varies, with checkpoint selection matching the pathway).  Results land as
method-by-combination AUC matrices directly consumable by the statistics
pipeline, plus per-cell score exports and a deterministic run manifest.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, scoring, trainer
from .metrics import LabeledScores, pr_auc, roc_auc
from .numerics import Rng
from .stats import ResultsMatrix
from .synthgen import (ANOMALOUS, MODALITIES, NORMAL, GenConfig, Modality,
                       by_modality, dataset_windows, generate_dataset)

DEFAULT_ENCODER_DIMS = (192, 64, 32)
DEFAULT_PROJECTION_DIMS = (32, 16)
LOSS_MODES = ("sum", "average")
HEAD_MODES = ("encoder", "projection")
LABELLING_MODES_AXIS = ("original", "manual")


@dataclass(frozen=True)
class ExperimentConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    train: trainer.TrainConfig = field(default_factory=trainer.TrainConfig)
    encoder_dims: tuple[int, ...] = DEFAULT_ENCODER_DIMS
    projection_dims: tuple[int, ...] = DEFAULT_PROJECTION_DIMS
    loss_modes: tuple[str, ...] = LOSS_MODES
    head_modes: tuple[str, ...] = HEAD_MODES
    labelling_modes: tuple[str, ...] = LABELLING_MODES_AXIS
    combos: tuple[str, ...] = tuple(scoring.MODALITY_COMBOS)
    seeds: tuple[int, ...] = (42,)
    outdir: str = "grid_out"

    def __post_init__(self):
        if not (self.loss_modes and self.head_modes and self.labelling_modes
                and self.combos and self.seeds):
            raise ValueError("grid axes and seeds must be non-empty")
        for combo in self.combos:
            if combo not in scoring.MODALITY_COMBOS:
                raise ValueError(f"unknown modality combination {combo!r}")

    def method_labels(self) -> list[str]:
        return [f"{loss}-{head}-{lab}"
                for loss in self.loss_modes
                for head in self.head_modes
                for lab in self.labelling_modes]


def derive_cell_seed(run_seed: int, labelling: str, loss: str, modality: Modality) -> int:
    """Stable per-training-run seed from the run seed and cell coordinates."""
    stream = (LABELLING_MODES_AXIS.index(labelling) * len(LOSS_MODES) * len(MODALITIES)
              + LOSS_MODES.index(loss) * len(MODALITIES)
              + list(MODALITIES).index(modality))
    return Rng(run_seed).spawn(500 + stream).seed


@dataclass
class CellScores:
    """Per-modality score vectors over the aligned test windows."""
    scores: dict[Modality, np.ndarray]
    labels: np.ndarray            # True where the test window is normal
    clip_ids: list[int]
    window_indices: list[int]

    def fused(self, combo: tuple[Modality, ...]) -> np.ndarray:
        return np.mean([self.scores[m] for m in combo], axis=0)


@dataclass
class GridResult:
    config: ExperimentConfig
    # (seed, method_label, combo) -> (roc_auc, pr_auc); missing when failed
    cells: dict[tuple[int, str, str], tuple[float, float]]
    failures: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failures


def _train_models_for(windows_by_mod, cfg: ExperimentConfig, run_seed: int,
                      labelling: str, loss_mode: str):
    results = {}
    for mod in MODALITIES:
        tcfg = replace(cfg.train, negative_mode=loss_mode,
                       seed=derive_cell_seed(run_seed, labelling, loss_mode, mod))
        results[mod] = trainer.train(windows_by_mod[mod], list(cfg.encoder_dims),
                                     list(cfg.projection_dims), tcfg)
    return results


def _score_test_set(models: dict[Modality, object], train_by_mod, test_by_mod,
                    use_projection: bool) -> CellScores:
    scores = {}
    for mod in MODALITIES:
        normal_feats = np.stack([w.features for w in train_by_mod[mod] if w.label == NORMAL])
        template = scoring.build_template(models[mod], normal_feats, use_projection, mod)
        test_feats = np.stack([w.features for w in test_by_mod[mod]])
        scores[mod] = scoring.score_windows(template, models[mod], test_feats, use_projection)
    ref = test_by_mod[MODALITIES[0]]
    keys = [(w.clip_id, w.window_index) for w in ref]
    for mod in MODALITIES[1:]:
        if [(w.clip_id, w.window_index) for w in test_by_mod[mod]] != keys:
            raise ValueError("test windows are not aligned across modalities")
    return CellScores(
        scores=scores,
        labels=np.array([w.label == NORMAL for w in ref]),
        clip_ids=[k[0] for k in keys],
        window_indices=[k[1] for k in keys],
    )


def _cell_score_records(cell: CellScores) -> list[scoring.ScoreRecord]:
    records = []
    for i in range(len(cell.labels)):
        per_mod = {m: float(cell.scores[m][i]) for m in MODALITIES}
        records.append(scoring.ScoreRecord(
            cell.clip_ids[i], cell.window_indices[i], per_mod,
            scoring.fuse_scores(per_mod),
            NORMAL if cell.labels[i] else ANOMALOUS,
        ))
    return records


def run_grid(cfg: ExperimentConfig, write_scores: bool = True) -> GridResult:
    """Run the full grid, writing per-seed and mean AUC matrices + manifest."""
    os.makedirs(cfg.outdir, exist_ok=True)
    cells: dict[tuple[int, str, str], tuple[float, float]] = {}
    failures: list[dict] = []
    method_labels = cfg.method_labels()

    for run_seed in cfg.seeds:
        ds = generate_dataset(replace(cfg.gen, seed=run_seed))
        test_by_mod = by_modality(dataset_windows(ds, "manual", split="test"))
        for labelling in cfg.labelling_modes:
            train_windows = dataset_windows(ds, labelling, split="train")
            train_by_mod = by_modality(train_windows)
            for loss_mode in cfg.loss_modes:
                try:
                    results = _train_models_for(train_by_mod, cfg, run_seed, labelling, loss_mode)
                except trainer.TrainingDivergedError as exc:
                    for head in cfg.head_modes:
                        failures.append({
                            "seed": run_seed, "labelling": labelling,
                            "loss": loss_mode, "head": head, "error": str(exc),
                        })
                    continue
                for head in cfg.head_modes:
                    use_proj = head == "projection"
                    models = {m: results[m].best[head].params for m in MODALITIES}
                    cell = _score_test_set(models, train_by_mod, test_by_mod, use_proj)
                    method = f"{loss_mode}-{head}-{labelling}"
                    for combo_name in cfg.combos:
                        combo = scoring.MODALITY_COMBOS[combo_name]
                        fused = cell.fused(combo)
                        ls = LabeledScores(fused, cell.labels)
                        cells[(run_seed, method, combo_name)] = (roc_auc(ls), pr_auc(ls))
                    if write_scores:
                        scoring.save_scores(
                            os.path.join(cfg.outdir, f"scores_seed{run_seed}_{method}.csv"),
                            _cell_score_records(cell),
                        )

        for metric_idx, metric in enumerate(("roc", "pr")):
            rows = []
            for method in method_labels:
                row = []
                for combo_name in cfg.combos:
                    got = cells.get((run_seed, method, combo_name))
                    row.append(got[metric_idx] if got else np.nan)
                rows.append(row)
            _write_grid_csv(
                os.path.join(cfg.outdir, f"grid_{metric}_seed{run_seed}.csv"),
                method_labels, cfg.combos, np.array(rows),
            )

    for metric_idx, metric in enumerate(("roc", "pr")):
        mean_rows = np.array([
            [np.mean([cells[(s, method, combo)][metric_idx]
                      for s in cfg.seeds if (s, method, combo) in cells] or [np.nan])
             for combo in cfg.combos]
            for method in method_labels
        ])
        _write_grid_csv(os.path.join(cfg.outdir, f"grid_{metric}_mean.csv"),
                        method_labels, cfg.combos, mean_rows)

    manifest = {
        "version": __version__,
        "config": _config_dict(cfg),
        "seeds": list(cfg.seeds),
        "failures": failures,
    }
    with open(os.path.join(cfg.outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return GridResult(cfg, cells, failures)


def _write_grid_csv(path, method_labels, combos, values):
    with open(path, "w") as f:
        f.write("method," + ",".join(combos) + "\n")
        for label, row in zip(method_labels, values):
            cells = ["failed" if np.isnan(x) else repr(float(x)) for x in row]
            f.write(label + "," + ",".join(cells) + "\n")


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["gen"] = asdict(cfg.gen)
    d["train"] = asdict(cfg.train)
    return d


def grid_to_results_matrix(cfg: ExperimentConfig, result: GridResult,
                           metric: str = "roc") -> ResultsMatrix:
    """Mean-over-seeds grid as a stats-ready matrix; fails on failed cells."""
    idx = {"roc": 0, "pr": 1}[metric]
    rows = []
    for method in cfg.method_labels():
        row = []
        for combo in cfg.combos:
            vals = [result.cells[(s, method, combo)][idx]
                    for s in cfg.seeds if (s, method, combo) in result.cells]
            if len(vals) != len(cfg.seeds):
                raise ValueError(f"cell ({method}, {combo}) has failed runs")
            row.append(float(np.mean(vals)))
        rows.append(row)
    return ResultsMatrix(tuple(cfg.method_labels()), tuple(cfg.combos), np.array(rows))


@dataclass
class BenchmarkSeedResult:
    seed: int
    fused_roc_auc: float
    single_roc_auc: dict[str, float]     # modality key -> AUC
    fused_unseen_roc_auc: float          # normals vs windows of unseen archetypes
    fused_seen_roc_auc: float

    @property
    def best_single(self) -> float:
        return max(self.single_roc_auc.values())


def run_benchmark_seed(cfg: ExperimentConfig, run_seed: int) -> BenchmarkSeedResult:
    """One seed of the fused benchmark: average loss, projection head, manual labels."""
    ds = generate_dataset(replace(cfg.gen, seed=run_seed))
    train_by_mod = by_modality(dataset_windows(ds, "manual", split="train"))
    test_by_mod = by_modality(dataset_windows(ds, "manual", split="test"))
    results = _train_models_for(train_by_mod, cfg, run_seed, "manual", "average")
    models = {m: results[m].best["projection"].params for m in MODALITIES}
    cell = _score_test_set(models, train_by_mod, test_by_mod, use_projection=True)

    fused = cell.fused(tuple(MODALITIES))
    fused_auc = roc_auc(LabeledScores(fused, cell.labels))
    singles = {
        m.key: roc_auc(LabeledScores(cell.scores[m], cell.labels)) for m in MODALITIES
    }

    ref = test_by_mod[MODALITIES[0]]
    seen_ids = {a.id for a in ds.archetypes if a.seen_in_training}
    normal_mask = cell.labels
    unseen_mask = np.array([
        (not normal_mask[i]) and ref[i].archetype_id is not None
        and ref[i].archetype_id not in seen_ids
        for i in range(len(ref))
    ])
    seen_mask = ~normal_mask & ~unseen_mask

    def subset_auc(anom_mask):
        keep = normal_mask | anom_mask
        return roc_auc(LabeledScores(fused[keep], normal_mask[keep]))

    return BenchmarkSeedResult(
        seed=run_seed,
        fused_roc_auc=fused_auc,
        single_roc_auc=singles,
        fused_unseen_roc_auc=subset_auc(unseen_mask),
        fused_seen_roc_auc=subset_auc(seen_mask),
    )
