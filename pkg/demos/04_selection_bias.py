"""Why fixed-epoch, best-ID model selection hides inverse correlations.

Part 1, the collapse: on the misspecified benchmark, the full cloud of ERM
checkpoints (10 seeds x 10 epochs) forms a clean decreasing line — later
epochs fit the spurious features harder, gaining ID accuracy and losing OOD
accuracy.  Keep only the final epoch of each run and the line collapses to a
vertical sliver that shows nothing.

Part 2, the regret: on the two-feature task, add a diversified set to the
cloud and compare the OOD accuracy of the best-ID point (what training
-domain validation would deploy) with the best OOD accuracy present.

Writes demos/output/selection_bias.svg.  Run:  python demos/04_selection_bias.py
"""

from pathlib import Path

import numpy as np

from misspec import (
    Environment,
    PatternThresholds,
    TaskSpec,
    TrainConfig,
    sample_dataset,
    selection_bias_report,
    train_diverse,
    train_erm,
)
from misspec.landscape import points_from_records
from misspec.svgplot import ScatterSeries, scatter_svg

bench = TaskSpec(d_inv=4, d_spu=4, gamma=np.full(4, 0.5), sigma_inv_sq=1.0,
                 sigma_spu_sq=np.ones(4))
bench_id = Environment(alpha=np.full(4, 0.1), env_id="ID")
bench_ood = Environment(alpha=np.full(4, 3.0), env_id="OOD")

eval_id = sample_dataset(bench, bench_id, 65536, seed=1001)
eval_ood = sample_dataset(bench, bench_ood, 65536, seed=1002)
entries = []
for s in range(10):
    train = sample_dataset(bench, bench_id, 8192, seed=1010 + s)
    cfg = TrainConfig(n_models=1, epochs=10, batch_size=256, seed=1100 + s)
    recs, _ = train_erm(train, eval_id, eval_ood, cfg)
    entries += [("erm", s, r) for r in recs]
points = points_from_records(entries)

# the probe accuracies on this task span <1% on the ID axis, so the spread
# cutoff is calibrated to the task scale
report = selection_bias_report(points, fixed_epoch=10, thresholds=PatternThresholds(eps_x=0.0012))
print("== benchmark, ERM checkpoints ==")
print(f"full cloud    : {report.pattern_full.label:<9} "
      f"(r={report.pattern_full.pearson_r:+.2f}, id spread {report.pattern_full.id_spread:.4f})")
print(f"epoch-10 slice: {report.pattern_filtered.label:<9} "
      f"(id spread {report.pattern_filtered.id_spread:.4f})")
print("the decreasing line is invisible in the fixed-epoch slice\n")

e0 = TaskSpec(d_inv=1, d_spu=1, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0])
e0_id = Environment(alpha=[0.1], env_id="ID")
e0_ood = Environment(alpha=[3.0], env_id="OOD")
eval_id = sample_dataset(e0, e0_id, 32768, seed=2001)
eval_ood = sample_dataset(e0, e0_ood, 32768, seed=2002)
entries = []
for s in range(10):
    train = sample_dataset(e0, e0_id, 2048, seed=2010 + s)
    cfg = TrainConfig(n_models=1, epochs=10, batch_size=64, seed=2100 + s)
    recs, _ = train_erm(train, eval_id, eval_ood, cfg)
    entries += [("erm", s, r) for r in recs]
train = sample_dataset(e0, e0_id, 2048, seed=2500)
cfg = TrainConfig(n_models=24, diversity_weight=10.0, similarity="cosine",
                  epochs=10, batch_size=64, seed=2600)
recs, _ = train_diverse(train, eval_id, eval_ood, cfg)
entries += [("diverse", 0, r) for r in recs]
points = points_from_records(entries)
report = selection_bias_report(points, fixed_epoch=10)

best_id = max(points, key=lambda p: p.id_metric)
print("== two-feature task, ERM + diverse cloud ==")
print(f"best-ID point : ID {best_id.id_metric:.3f}, OOD {best_id.ood_metric:.3f} ({best_id.run_id})")
print(f"best OOD seen : {max(p.ood_metric for p in points):.3f}")
print(f"ood_regret of ID-based selection: {report.ood_regret:.3f}")

erm = tuple((p.id_metric, p.ood_metric) for p in points if p.method == "erm")
div = tuple((p.id_metric, p.ood_metric) for p in points if p.method == "diverse")
sel_id = tuple((p.id_metric, p.ood_metric) for p in report.selected_by_id)
sel_ood = tuple((p.id_metric, p.ood_metric) for p in report.selected_by_ood)
svg = scatter_svg(
    [ScatterSeries("erm", erm, color="#d62728", radius=2.5),
     ScatterSeries("diverse", div, color="#9e9e9e", radius=2.5),
     ScatterSeries("best ID / run", sel_id, color="none", radius=5.0,
                   stroke="#1f77b4", stroke_width=1.5),
     ScatterSeries("best OOD / run", sel_ood, color="none", radius=6.5,
                   stroke="#d62728", stroke_width=1.5)],
    title="two-feature task: ID-selected vs OOD-selected checkpoints",
)
out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
(out / "selection_bias.svg").write_text(svg)
print(f"wrote {out / 'selection_bias.svg'}")
