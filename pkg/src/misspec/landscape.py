"""ID/OOD scatter analysis: pattern taxonomy, selection bias, shift sweeps.

A cloud of (ID metric, OOD metric) model points is classified into one of
five scatter shapes by a deterministic rule on simple diagnostics
(Pearson r, the two metric spreads, the mean OOD level):

    Horizontal  if ood spread < eps_y and mean OOD <= chance + delta
    Vertical    elif id spread < eps_x
    Positive    elif r >= r_positive
    Negative    elif r <= r_negative
    NoTrend     otherwise

The thresholds are explicit stand-ins for what the source material describes
visually; they live in one configurable record.  The module also reproduces
the model-selection experiments: filtering a cloud to one fixed epoch (which
can collapse a negative trend into a vertical line), selecting per run by
best ID or best OOD metric, and the regret of picking the globally best-ID
point instead of the best-OOD one.

Point collections are immutable snapshots and every report is a pure
function of its point set; sweep runs are independent across seeds and
shift steps.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SchemaError
from .sem import Environment, TaskSpec, sample_dataset
from .trainer import TrainConfig, evaluate, train_erm_checkpoints

__all__ = [
    "ModelPoint",
    "PatternThresholds",
    "PatternLabel",
    "SelectionReport",
    "ShiftSweepPoint",
    "classify_pattern",
    "filter_fixed_epoch",
    "select_max_id",
    "select_max_ood",
    "selection_bias_report",
    "shift_sweep_report",
    "points_from_records",
    "points_to_csv",
    "points_from_csv",
    "selection_report_to_json_dict",
]

PATTERNS = ("Positive", "Vertical", "Horizontal", "Negative", "NoTrend")


@dataclass(frozen=True)
class ModelPoint:
    """One model evaluation: (run, epoch, model) with its two metrics."""

    id_metric: float
    ood_metric: float
    run_id: str
    epoch: int
    method: str
    model_idx: int = 0

    def __post_init__(self):
        if not (0.0 <= self.id_metric <= 1.0 and 0.0 <= self.ood_metric <= 1.0):
            raise ConfigurationError("metrics must lie in [0, 1]")


@dataclass(frozen=True)
class PatternThresholds:
    eps_x: float = 0.01
    eps_y: float = 0.01
    delta: float = 0.05
    r_positive: float = 0.5
    r_negative: float = -0.5
    chance: float = 0.5


@dataclass(frozen=True)
class PatternLabel:
    label: str
    pearson_r: float
    id_spread: float
    ood_spread: float
    mean_ood: float

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "pearson_r": self.pearson_r,
            "id_spread": self.id_spread,
            "ood_spread": self.ood_spread,
            "mean_ood": self.mean_ood,
        }


@dataclass(frozen=True)
class SelectionReport:
    pattern_full: PatternLabel
    pattern_filtered: PatternLabel
    selected_by_id: list
    selected_by_ood: list
    ood_regret: float


@dataclass(frozen=True)
class ShiftSweepPoint:
    t: float
    label: PatternLabel
    pearson_r: float
    mean_ood: float
    points: tuple


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    sx, sy = float(np.std(x)), float(np.std(y))
    if sx < 1e-15 or sy < 1e-15:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def classify_pattern(
    points, thresholds: PatternThresholds = PatternThresholds()
) -> PatternLabel:
    """Deterministic five-way classification of a point cloud (>= 3 points)."""
    points = list(points)
    if len(points) < 3:
        raise ConfigurationError("pattern classification needs at least 3 points")
    x = np.array([p.id_metric for p in points])
    y = np.array([p.ood_metric for p in points])
    r = _pearson(x, y)
    sx, sy = float(np.std(x)), float(np.std(y))
    mean_ood = float(np.mean(y))
    if sy < thresholds.eps_y and mean_ood <= thresholds.chance + thresholds.delta:
        label = "Horizontal"
    elif sx < thresholds.eps_x:
        label = "Vertical"
    elif r >= thresholds.r_positive:
        label = "Positive"
    elif r <= thresholds.r_negative:
        label = "Negative"
    else:
        label = "NoTrend"
    return PatternLabel(
        label=label, pearson_r=r, id_spread=sx, ood_spread=sy, mean_ood=mean_ood
    )


def filter_fixed_epoch(points, epoch: int) -> list:
    """Points with exactly the given epoch, original order preserved."""
    kept = [p for p in points if p.epoch == epoch]
    if not kept:
        warnings.warn(f"no points with epoch {epoch}")
    return kept


def _select_extreme(points, key) -> list:
    by_run: dict[str, ModelPoint] = {}
    for p in points:
        cur = by_run.get(p.run_id)
        if cur is None or key(p) > key(cur) or (
            key(p) == key(cur)
            and (p.epoch, p.model_idx) < (cur.epoch, cur.model_idx)
        ):
            by_run[p.run_id] = p
    return [by_run[r] for r in sorted(by_run)]


def select_max_id(points) -> list:
    """Per run_id, the point with maximal ID metric; ties go to the earliest
    epoch (then the lowest model index)."""
    return _select_extreme(points, lambda p: p.id_metric)


def select_max_ood(points) -> list:
    """Per run_id, the point with maximal OOD metric; same tie rule."""
    return _select_extreme(points, lambda p: p.ood_metric)


def _global_max_id(points) -> ModelPoint:
    best = points[0]
    for p in points[1:]:
        if p.id_metric > best.id_metric or (
            p.id_metric == best.id_metric
            and (p.epoch, p.run_id, p.model_idx) < (best.epoch, best.run_id, best.model_idx)
        ):
            best = p
    return best


def selection_bias_report(
    points,
    fixed_epoch: int,
    thresholds: PatternThresholds = PatternThresholds(),
) -> SelectionReport:
    """Patterns of the full cloud vs. the fixed-epoch pooled subsample, the
    per-run ID/OOD selections, and the OOD regret of global ID-based
    selection (max OOD among all points minus the OOD of the best-ID point).
    """
    points = list(points)
    epochs = {p.epoch for p in points}
    runs = {p.run_id for p in points}
    if len(epochs) < 2 or len(runs) < 2:
        raise ConfigurationError(
            "selection bias analysis needs at least 2 epochs and 2 runs"
        )
    full = classify_pattern(points, thresholds)
    filtered = classify_pattern(filter_fixed_epoch(points, fixed_epoch), thresholds)
    chosen = _global_max_id(points)
    regret = max(p.ood_metric for p in points) - chosen.ood_metric
    return SelectionReport(
        pattern_full=full,
        pattern_filtered=filtered,
        selected_by_id=select_max_id(points),
        selected_by_ood=select_max_ood(points),
        ood_regret=float(regret),
    )


def shift_sweep_report(
    task: TaskSpec,
    env_id: Environment,
    shift_family,
    train_config: TrainConfig,
    n_seeds: int,
    train_size: int = 2048,
    eval_size: int = 32768,
    thresholds: PatternThresholds = PatternThresholds(),
) -> list[ShiftSweepPoint]:
    """Per-step pattern classification across a family of OOD environments.

    n_seeds ERM runs (every epoch recorded) are trained on the ID
    environment; because training never touches the OOD data, the same
    checkpoints serve every step of the family and the per-step run seeds
    are step-independent.  OOD evaluation sets use a matched dataset seed
    across steps (common random numbers), so consecutive steps differ only
    through the interpolated spurious scales.
    """
    if n_seeds < 1:
        raise ConfigurationError("n_seeds must be at least 1")
    if train_config.n_models != 1:
        raise ConfigurationError("shift sweeps use single-model ERM configs")
    base = train_config.seed
    eval_id = sample_dataset(task, env_id, eval_size, seed=base * 1000 + 1)
    ood_data_seed = base * 1000 + 2

    checkpoints = []  # (seed index, epoch, classifier, id accuracy)
    for s in range(n_seeds):
        train = sample_dataset(task, env_id, train_size, seed=base * 1000 + 10 + s)
        cfg = TrainConfig(
            n_models=1,
            diversity_weight=0.0,
            similarity=train_config.similarity,
            learning_rate=train_config.learning_rate,
            epochs=train_config.epochs,
            batch_size=train_config.batch_size,
            seed=base * 1000 + 100 + s,
            record_every_epoch=True,
        )
        recs, snaps = train_erm_checkpoints(train, eval_id, eval_id, cfg)
        by_epoch = {rec.epoch: rec.id_accuracy for rec in recs}
        for epoch, model in snaps:
            checkpoints.append((s, epoch, model, by_epoch[epoch]))

    steps = len(shift_family)
    out = []
    for k, env in enumerate(shift_family):
        t = k / (steps - 1) if steps > 1 else 0.0
        eval_ood = sample_dataset(task, env, eval_size, seed=ood_data_seed)
        pts = []
        for s, epoch, model, id_acc in checkpoints:
            ood_acc, _ = evaluate(model, eval_ood)
            pts.append(
                ModelPoint(
                    id_metric=id_acc,
                    ood_metric=ood_acc,
                    run_id=f"erm-{s}",
                    epoch=epoch,
                    method="erm",
                    model_idx=0,
                )
            )
        label = classify_pattern(pts, thresholds)
        out.append(
            ShiftSweepPoint(
                t=t,
                label=label,
                pearson_r=label.pearson_r,
                mean_ood=label.mean_ood,
                points=tuple(pts),
            )
        )
    return out


# --- trainer-schema interchange ----------------------------------------------

def points_from_records(entries) -> list:
    """ModelPoints from (method, seed, EpochRecord) triples; run_id is
    ``method-seed``, metrics are the accuracies."""
    pts = []
    for method, seed, rec in entries:
        pts.append(
            ModelPoint(
                id_metric=rec.id_accuracy,
                ood_metric=rec.ood_accuracy,
                run_id=f"{method}-{seed}",
                epoch=rec.epoch,
                method=method,
                model_idx=rec.model_idx,
            )
        )
    return pts


def points_to_csv(points) -> str:
    """Scatter data in the trainer CSV schema (risk columns zeroed when the
    points carry accuracies only)."""
    buf = io.StringIO()
    buf.write("method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk\n")
    for p in points:
        method, _, seed = p.run_id.rpartition("-")
        buf.write(
            f"{p.method},{seed},{p.model_idx},{p.epoch},"
            f"{p.id_metric!r},{p.ood_metric!r},0,0\n"
        )
    return buf.getvalue()


_CSV_COLUMNS = ["method", "seed", "model_idx", "epoch", "id_acc", "ood_acc", "id_risk", "ood_risk"]


def points_from_csv(text: str) -> list:
    """Parse the trainer CSV schema into ModelPoints, validating as we go.

    Raises SchemaError with the 1-based row number of the first violation.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty CSV") from None
    if header != _CSV_COLUMNS:
        raise SchemaError(f"header must be {','.join(_CSV_COLUMNS)}", row=1)
    pts = []
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(_CSV_COLUMNS):
            raise SchemaError(f"expected {len(_CSV_COLUMNS)} fields, got {len(row)}", row=rownum)
        try:
            method = row[0]
            seed = row[1]
            model_idx = int(row[2])
            epoch = int(row[3])
            id_acc = float(row[4])
            ood_acc = float(row[5])
        except ValueError as exc:
            raise SchemaError(str(exc), row=rownum) from None
        if not (0.0 <= id_acc <= 1.0 and 0.0 <= ood_acc <= 1.0):
            raise SchemaError(
                f"accuracies must lie in [0, 1], got ({id_acc}, {ood_acc})", row=rownum
            )
        pts.append(
            ModelPoint(
                id_metric=id_acc,
                ood_metric=ood_acc,
                run_id=f"{method}-{seed}",
                epoch=epoch,
                method=method,
                model_idx=model_idx,
            )
        )
    return pts


def _point_dict(p: ModelPoint) -> dict:
    return {
        "id_metric": p.id_metric,
        "ood_metric": p.ood_metric,
        "run_id": p.run_id,
        "epoch": p.epoch,
        "method": p.method,
        "model_idx": p.model_idx,
    }


def selection_report_to_json_dict(report: SelectionReport) -> dict:
    return {
        "pattern_full": report.pattern_full.to_json_dict(),
        "pattern_filtered": report.pattern_filtered.to_json_dict(),
        "selected_by_id": [_point_dict(p) for p in report.selected_by_id],
        "selected_by_ood": [_point_dict(p) for p in report.selected_by_ood],
        "ood_regret": report.ood_regret,
    }
