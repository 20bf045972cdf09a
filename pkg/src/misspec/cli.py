"""Command-line front end.

Subcommands tie the library into reproducible experiments driven by one TOML
config file:

    misspec certify     --config exp.toml [--mask 0,1] [--add-feature 0]
    misspec sweep       --config exp.toml [--order 0,1,2]
    misspec train       --config exp.toml
    misspec landscape   --points train.csv [--fixed-epoch 10] [--config exp.toml]
    misspec shift-sweep --config exp.toml

Common flags: ``--out DIR`` (artifact directory, overrides the config's
[output] section) and ``--seed N`` (overrides the global seed).  All
randomness flows from the global seed, so rerunning a command with the same
inputs byte-reproduces every CSV/JSON/SVG artifact.  Exit codes: 0 success,
2 configuration or schema error, 3 runtime or training failure.  The env
var MISSPEC_LOG in {error, info, debug} controls logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path


from . import landscape as ls
from . import theorem
from .config import ExperimentConfig, load_experiment_config
from .errors import (
    ConfigurationError,
    MisspecError,
    SchemaError,
    TrainingDivergenceError,
)
from .oracle import FeatureMask
from .sem import make_shift_family, sample_dataset
from .svgplot import ScatterSeries, line_svg, panel_strip_svg, scatter_svg
from .trainer import TrainConfig, epoch_records_to_csv, train_diverse, train_erm

log = logging.getLogger("misspec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("MISSPEC_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _parse_int_list(text: str):
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated integer list, got '{text}'")


def _load(args) -> ExperimentConfig:
    cfg = load_experiment_config(args.config, seed_override=args.seed)
    if args.out is not None:
        object.__setattr__(cfg, "out_dir", args.out)
    return cfg


def _mask_from_arg(cfg: ExperimentConfig, mask_arg: str | None) -> FeatureMask:
    if mask_arg is None:
        return FeatureMask.all_invariant(cfg.task)
    return FeatureMask.from_indices(cfg.task, _parse_int_list(mask_arg))


# --- experiment protocol shared by train / landscape tests -------------------

def run_training_protocol(cfg: ExperimentConfig):
    """n_seeds ERM runs plus one diverse-set run, as (method, seed, record)
    triples.  Dataset and training seeds all derive from cfg.seed."""
    g = cfg.seed
    eval_id = sample_dataset(cfg.task, cfg.env_id, cfg.eval_size, seed=g * 1000 + 1)
    eval_ood = sample_dataset(cfg.task, cfg.env_ood, cfg.eval_size, seed=g * 1000 + 2)
    entries = []
    for s in range(cfg.n_seeds):
        train = sample_dataset(cfg.task, cfg.env_id, cfg.train_size, seed=g * 1000 + 10 + s)
        erm_cfg = TrainConfig(
            n_models=1,
            diversity_weight=0.0,
            similarity=cfg.trainer.similarity,
            learning_rate=cfg.trainer.learning_rate,
            epochs=cfg.trainer.epochs,
            batch_size=cfg.trainer.batch_size,
            seed=g * 1000 + 100 + s,
            record_every_epoch=cfg.trainer.record_every_epoch,
        )
        try:
            records, _ = train_erm(train, eval_id, eval_ood, erm_cfg)
        except TrainingDivergenceError as exc:
            raise TrainingDivergenceError(exc.epoch, f"run erm-{s}") from None
        entries += [("erm", s, rec) for rec in records]
    if cfg.trainer.n_models >= 2:
        train = sample_dataset(cfg.task, cfg.env_id, cfg.train_size, seed=g * 1000 + 500)
        div_cfg = TrainConfig(
            n_models=cfg.trainer.n_models,
            diversity_weight=cfg.trainer.diversity_weight,
            similarity=cfg.trainer.similarity,
            learning_rate=cfg.trainer.learning_rate,
            epochs=cfg.trainer.epochs,
            batch_size=cfg.trainer.batch_size,
            seed=g * 1000 + 600,
            record_every_epoch=cfg.trainer.record_every_epoch,
        )
        try:
            records, _ = train_diverse(train, eval_id, eval_ood, div_cfg)
        except TrainingDivergenceError as exc:
            raise TrainingDivergenceError(exc.epoch, "run diverse-0") from None
        entries += [("diverse", 0, rec) for rec in records]
    return entries


# --- subcommands --------------------------------------------------------------

def cmd_certify(args) -> int:
    cfg = _load(args)
    mask = _mask_from_arg(cfg, args.mask)
    cert = theorem.certify(
        cfg.task, cfg.env_id, cfg.env_ood, mask, args.add_feature,
    )
    d, t = cert.delta_id, cert.delta_ood_transfer
    summary = (
        f"certificate: verdict={cert.verdict.value}; "
        f"delta_id {'<' if d < 0 else '>='} 0 ({d:.6g}); "
        f"delta_ood {'>' if t > 0 else '<='} 0 ({t:.6g}); "
        f"alpha_gap={cert.alpha_gap:.6g} threshold={cert.alpha_threshold:.6g}"
    )
    text = _json_text(cert.to_json_dict())
    print(summary)
    sys.stdout.write(text)
    _write_atomic(Path(cfg.out_dir) / "certificate.json", text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    order = (
        list(range(cfg.task.d_spu))
        if args.order is None
        else _parse_int_list(args.order)
    )
    steps = theorem.spurious_sweep(cfg.task, cfg.env_id, cfg.env_ood, order)
    csv_text = theorem.sweep_to_csv(steps)
    _write_atomic(Path(cfg.out_dir) / "sweep.csv", csv_text)
    svg = line_svg(
        [s.step for s in steps],
        [
            ("L_ID", [s.l_id for s in steps]),
            ("L_OOD (transfer)", [s.l_ood_transfer for s in steps]),
        ],
        xlabel="spurious features added",
        ylabel="population risk",
        title="risk vs. added spurious features",
    )
    _write_atomic(Path(cfg.out_dir) / "sweep.svg", svg)
    print(f"sweep: {len(steps)} steps written to {cfg.out_dir}/sweep.csv")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load(args)
    entries = run_training_protocol(cfg)
    csv_text = epoch_records_to_csv(entries)
    _write_atomic(Path(cfg.out_dir) / "train.csv", csv_text)
    n_erm = sum(1 for m, _, _ in entries if m == "erm")
    n_div = sum(1 for m, _, _ in entries if m == "diverse")
    print(f"train: wrote {n_erm} erm + {n_div} diverse records to {cfg.out_dir}/train.csv")
    return EXIT_OK


def _landscape_svg(points, report) -> str:
    erm = tuple(
        (p.id_metric, p.ood_metric) for p in points if p.method != "diverse"
    )
    diverse = tuple(
        (p.id_metric, p.ood_metric) for p in points if p.method == "diverse"
    )
    sel_id = tuple((p.id_metric, p.ood_metric) for p in report.selected_by_id)
    sel_ood = tuple((p.id_metric, p.ood_metric) for p in report.selected_by_ood)
    series = [ScatterSeries("erm", erm, color="#d62728", radius=2.5)]
    if diverse:
        series.append(ScatterSeries("diverse", diverse, color="#9e9e9e", radius=2.5))
    series.append(
        ScatterSeries("best ID / run", sel_id, color="none", radius=5.0,
                      stroke="#1f77b4", stroke_width=1.5)
    )
    series.append(
        ScatterSeries("best OOD / run", sel_ood, color="none", radius=6.5,
                      stroke="#d62728", stroke_width=1.5)
    )
    return scatter_svg(series, title="ID vs. OOD accuracy")


def cmd_landscape(args) -> int:
    thresholds = ls.PatternThresholds()
    out_dir = args.out or "out"
    if args.config is not None:
        cfg = load_experiment_config(args.config, seed_override=args.seed)
        thresholds = cfg.thresholds
        out_dir = args.out or cfg.out_dir
    text = Path(args.points).read_text()
    points = ls.points_from_csv(text)
    if args.fixed_epoch is not None:
        fixed_epoch = args.fixed_epoch
    else:
        fixed_epoch = max(p.epoch for p in points)
    report = ls.selection_bias_report(points, fixed_epoch, thresholds)
    text = _json_text(ls.selection_report_to_json_dict(report))
    sys.stdout.write(text)
    _write_atomic(Path(out_dir) / "selection_report.json", text)
    _write_atomic(Path(out_dir) / "landscape.svg", _landscape_svg(points, report))
    print(
        f"landscape: full={report.pattern_full.label} "
        f"filtered={report.pattern_filtered.label} "
        f"ood_regret={report.ood_regret:.6g}"
    )
    return EXIT_OK


def cmd_shift_sweep(args) -> int:
    cfg = _load(args)
    if cfg.shift_alpha_far is None:
        raise ConfigurationError("shift-sweep needs a [shift] section with alpha_far")
    family = make_shift_family(
        cfg.task, cfg.env_id.alpha, cfg.shift_alpha_far, cfg.shift_steps
    )
    reports = ls.shift_sweep_report(
        cfg.task,
        cfg.env_id,
        family,
        cfg.trainer if cfg.trainer.n_models == 1 else TrainConfig(
            n_models=1,
            learning_rate=cfg.trainer.learning_rate,
            epochs=cfg.trainer.epochs,
            batch_size=cfg.trainer.batch_size,
            seed=cfg.trainer.seed,
        ),
        n_seeds=cfg.n_seeds,
        train_size=cfg.train_size,
        eval_size=cfg.eval_size,
        thresholds=cfg.thresholds,
    )
    lines = ["t,pattern,pearson_r,mean_ood"]
    for rep in reports:
        lines.append(f"{rep.t:.6g},{rep.label.label},{rep.pearson_r:.12g},{rep.mean_ood:.12g}")
    _write_atomic(Path(cfg.out_dir) / "shift_sweep.csv", "\n".join(lines) + "\n")
    panels = []
    for rep in reports:
        pts = tuple((p.id_metric, p.ood_metric) for p in rep.points)
        panels.append(
            (
                f"t={rep.t:.3g}: {rep.label.label}",
                [ScatterSeries("erm", pts, color="#d62728", radius=2.0)],
            )
        )
    _write_atomic(Path(cfg.out_dir) / "shift_sweep.svg", panel_strip_svg(panels))
    print(
        "shift-sweep: "
        + " ".join(f"t={rep.t:.3g}:{rep.label.label}" for rep in reports)
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misspec",
        description="Inverse ID/OOD correlation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_config: bool = True):
        if needs_config:
            p.add_argument("--config", required=True, help="experiment TOML file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the global seed")

    p = sub.add_parser("certify", help="Theorem-1 certificate for one feature addition")
    common(p)
    p.add_argument("--mask", default=None,
                   help="comma list of selected full-vector indices (default: invariant block)")
    p.add_argument("--add-feature", type=int, default=0,
                   help="spurious coordinate to add (0-based within the spurious block)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="risk curves along spurious-feature additions")
    common(p)
    p.add_argument("--order", default=None, help="comma list of spurious indices")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="run the ERM-seeds + diverse-set protocol")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("landscape", help="selection-bias report from a points CSV")
    p.add_argument("--points", required=True, help="CSV in the trainer schema")
    p.add_argument("--config", default=None, help="optional TOML for thresholds")
    p.add_argument("--fixed-epoch", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("shift-sweep", help="pattern classification across a shift family")
    common(p)
    p.set_defaults(func=cmd_shift_sweep)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MisspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
