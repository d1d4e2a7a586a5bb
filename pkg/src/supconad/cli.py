"""Command-line interface: generate / train / grid / stats / fixtures.

Every flag can also be supplied through a plain ``key=value`` text config
file passed with --config; explicit flags always win over file values.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields

import numpy as np

from . import experiment, fixtures, scoring, stats, trainer
from .metrics import LabeledScores, dump_curves, pr_auc, roc_auc
from .model import save_params
from .synthgen import (NORMAL, GenConfig, Modality, dataset_windows,
                       generate_dataset, load_windows, save_windows)


def _read_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as f:
        for ln_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


_CASTERS = {"int": int, "float": float, "str": str}


def _build_dataclass(cls, args: argparse.Namespace, file_cfg: dict[str, str]):
    """Dataclass from flag values, falling back to file values, then defaults."""
    kwargs = {}
    for fld in fields(cls):
        flag_val = getattr(args, fld.name, None)
        if flag_val is not None:
            kwargs[fld.name] = flag_val
        elif fld.name in file_cfg:
            kwargs[fld.name] = _CASTERS[fld.type](file_cfg[fld.name])
    return cls(**kwargs)


def _resolve(args, file_cfg, key, default, cast=str):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in file_cfg:
        return cast(file_cfg[key])
    return default


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t)


def _csv_strs(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _add_dataclass_args(parser: argparse.ArgumentParser, cls, skip=()):
    for fld in fields(cls):
        if fld.name in skip:
            continue
        flag = "--" + fld.name.replace("_", "-")
        parser.add_argument(flag, type=_CASTERS[fld.type], default=None)


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default=None, help="key=value config file")


def _cmd_generate(args) -> int:
    file_cfg = _read_config_file(args.config) if args.config else {}
    cfg = _build_dataclass(GenConfig, args, file_cfg)
    labelling = _resolve(args, file_cfg, "labelling", "original")
    ds = generate_dataset(cfg)
    windows = dataset_windows(ds, labelling)
    save_windows(args.out, cfg, labelling, windows)
    n_train = sum(1 for w in windows if w.split == "train")
    print(f"wrote {len(windows)} windows ({n_train} train) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    file_cfg = _read_config_file(args.config) if args.config else {}
    tcfg = _build_dataclass(trainer.TrainConfig, args, file_cfg)
    modality = Modality.from_key(_resolve(args, file_cfg, "modality", "top_depth"))
    head = _resolve(args, file_cfg, "head", "projection")
    enc_dims = _resolve(args, file_cfg, "encoder_dims",
                        experiment.DEFAULT_ENCODER_DIMS, _csv_ints)
    proj_dims = _resolve(args, file_cfg, "projection_dims",
                         experiment.DEFAULT_PROJECTION_DIMS, _csv_ints)

    _, _, windows = load_windows(args.data)
    train_windows = [w for w in windows if w.split == "train" and w.modality == modality]
    result = trainer.train(train_windows, list(enc_dims), list(proj_dims), tcfg)
    ckpt = result.best[head]
    print(f"best {head} checkpoint: epoch {ckpt.epoch}, val AUC {ckpt.val_auc:.4f}")

    if args.checkpoint_out:
        save_params(ckpt.params, args.checkpoint_out)
    if args.log_out:
        trainer.save_training_log(args.log_out, result.log)

    test_windows = [w for w in windows if w.split == "test" and w.modality == modality]
    if test_windows:
        use_proj = head == "projection"
        normal_feats = np.stack([w.features for w in train_windows if w.label == NORMAL])
        template = scoring.build_template(ckpt.params, normal_feats, use_proj, modality)
        feats = np.stack([w.features for w in test_windows])
        scores = scoring.score_windows(template, ckpt.params, feats, use_proj)
        labels = np.array([w.label == NORMAL for w in test_windows])
        ls = LabeledScores(scores, labels)
        print(f"test ROC AUC {roc_auc(ls):.4f}, PR AUC {pr_auc(ls):.4f}")
        if args.scores_out:
            records = [
                scoring.ScoreRecord(w.clip_id, w.window_index,
                                    {modality: float(s)}, float(s), w.label)
                for w, s in zip(test_windows, scores)
            ]
            scoring.save_scores(args.scores_out, records)
        if args.curves_out:
            dump_curves(ls, args.curves_out + ".roc.csv", args.curves_out + ".pr.csv")
    return 0


def _cmd_grid(args) -> int:
    file_cfg = _read_config_file(args.config) if args.config else {}
    gen = _build_dataclass(GenConfig, args, file_cfg)
    tcfg = _build_dataclass(trainer.TrainConfig, args, file_cfg)
    cfg = experiment.ExperimentConfig(
        gen=gen,
        train=tcfg,
        encoder_dims=_resolve(args, file_cfg, "encoder_dims",
                              experiment.DEFAULT_ENCODER_DIMS, _csv_ints),
        projection_dims=_resolve(args, file_cfg, "projection_dims",
                                 experiment.DEFAULT_PROJECTION_DIMS, _csv_ints),
        loss_modes=_resolve(args, file_cfg, "loss_modes", experiment.LOSS_MODES, _csv_strs),
        head_modes=_resolve(args, file_cfg, "head_modes", experiment.HEAD_MODES, _csv_strs),
        labelling_modes=_resolve(args, file_cfg, "labelling_modes",
                                 experiment.LABELLING_MODES_AXIS, _csv_strs),
        combos=_resolve(args, file_cfg, "combos", tuple(scoring.MODALITY_COMBOS), _csv_strs),
        seeds=_resolve(args, file_cfg, "seeds", (42,), _csv_ints),
        outdir=_resolve(args, file_cfg, "outdir", "grid_out"),
    )
    result = experiment.run_grid(cfg)
    print(f"grid written to {cfg.outdir} "
          f"({len(result.cells)} cells, {len(result.failures)} failures)")
    for failure in result.failures:
        print(f"FAILED: {failure}", file=sys.stderr)
    return 0 if result.ok else 1


def _cmd_stats(args) -> int:
    matrix = stats.load_matrix_csv(args.matrix)
    report = stats.analyze(matrix, alpha=args.alpha)
    prefix = args.out_prefix or os.path.splitext(args.matrix)[0]
    stats.save_pvalue_matrix_csv(prefix + ".raw_p.csv", report.pvalues.methods,
                                 report.pvalues.raw_p)
    stats.save_pvalue_matrix_csv(prefix + ".adjusted_p.csv", report.pvalues.methods,
                                 report.pvalues.adjusted_p)
    stats.save_significance_report(prefix + ".significance.csv", report)
    print(f"friedman chi2 {report.friedman_chi_sq:.4f}, p {report.friedman_p:.3e}")
    if report.significant:
        for a, b in report.significant:
            print(f"significant (alpha={args.alpha}): {a} vs {b}")
    else:
        print(f"no significant pairs at alpha={args.alpha}")
    return 0


def _cmd_fixtures(args) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    stats.save_matrix_csv(os.path.join(args.outdir, "fixture_roc.csv"), fixtures.roc_grid())
    stats.save_matrix_csv(os.path.join(args.outdir, "fixture_pr.csv"), fixtures.pr_grid())
    print(f"wrote fixture_roc.csv and fixture_pr.csv to {args.outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supconad",
        description="Contrastive anomaly scoring experiments and rank statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic window dataset file")
    _add_common(p)
    _add_dataclass_args(p, GenConfig)
    p.add_argument("--labelling", choices=["original", "manual"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train one modality model from a dataset file")
    _add_common(p)
    _add_dataclass_args(p, trainer.TrainConfig)
    p.add_argument("--data", required=True)
    p.add_argument("--modality", default=None,
                   choices=[m.key for m in Modality])
    p.add_argument("--head", choices=["projection", "encoder"], default=None)
    p.add_argument("--encoder-dims", type=_csv_ints, default=None)
    p.add_argument("--projection-dims", type=_csv_ints, default=None)
    p.add_argument("--checkpoint-out", default=None)
    p.add_argument("--log-out", default=None)
    p.add_argument("--scores-out", default=None)
    p.add_argument("--curves-out", default=None,
                   help="prefix for ROC/PR curve point CSVs")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grid", help="run the full method grid")
    _add_common(p)
    _add_dataclass_args(p, GenConfig, skip=("seed",))
    _add_dataclass_args(p, trainer.TrainConfig, skip=("seed", "negative_mode"))
    p.add_argument("--encoder-dims", type=_csv_ints, default=None)
    p.add_argument("--projection-dims", type=_csv_ints, default=None)
    p.add_argument("--loss-modes", type=_csv_strs, default=None)
    p.add_argument("--head-modes", type=_csv_strs, default=None)
    p.add_argument("--labelling-modes", type=_csv_strs, default=None)
    p.add_argument("--combos", type=_csv_strs, default=None)
    p.add_argument("--seeds", type=_csv_ints, default=None)
    p.add_argument("--outdir", default=None)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("stats", help="rank analysis of a method-by-dataset AUC matrix")
    _add_common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out-prefix", default=None)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("fixtures", help="emit the bundled reference AUC grids")
    _add_common(p)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_fixtures)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
