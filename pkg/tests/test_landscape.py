"""Landscape tests: pattern classification, filtering, selection, reports."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misspec import (
    ConfigurationError,
    ModelPoint,
    TrainConfig,
    classify_pattern,
    filter_fixed_epoch,
    make_shift_family,
    select_max_id,
    select_max_ood,
    selection_bias_report,
    shift_sweep_report,
)
from misspec.errors import SchemaError
from misspec.landscape import points_from_csv, points_to_csv

from util import E0_ID, E0_TASK


def mk(id_m, ood_m, run="r0", epoch=1, method="erm", idx=0):
    return ModelPoint(
        id_metric=id_m, ood_metric=ood_m, run_id=run, epoch=epoch,
        method=method, model_idx=idx,
    )


def cloud(xs, ys, run="r0"):
    return [mk(x, y, run=run, epoch=i + 1) for i, (x, y) in enumerate(zip(xs, ys))]


class TestClassifyPattern:
    def test_identity_line_positive(self):
        xs = np.linspace(0.3, 0.9, 10)
        label = classify_pattern(cloud(xs, xs))
        assert label.label == "Positive"
        assert label.pearson_r == pytest.approx(1.0)

    def test_inverted_line_negative(self):
        xs = np.linspace(0.3, 0.9, 10)
        label = classify_pattern(cloud(xs, 1.0 - xs))
        assert label.label == "Negative"
        assert label.pearson_r == pytest.approx(-1.0)

    def test_narrow_id_spread_is_vertical(self):
        rng = np.random.default_rng(0)
        xs = rng.uniform(0.899, 0.901, 40)
        ys = rng.uniform(0.3, 0.9, 40)
        assert classify_pattern(cloud(xs, ys)).label == "Vertical"

    def test_low_flat_ood_is_horizontal(self):
        rng = np.random.default_rng(1)
        xs = rng.uniform(0.3, 0.95, 40)
        ys = np.full(40, 0.51) + rng.uniform(-0.003, 0.003, 40)
        assert classify_pattern(cloud(xs, ys)).label == "Horizontal"

    def test_flat_but_high_ood_is_not_horizontal(self):
        rng = np.random.default_rng(2)
        xs = rng.uniform(0.3, 0.95, 40)
        ys = np.full(40, 0.9) + rng.uniform(-0.003, 0.003, 40)
        assert classify_pattern(cloud(xs, ys)).label != "Horizontal"

    def test_diffuse_blob_is_no_trend(self):
        rng = np.random.default_rng(3)
        xs = rng.uniform(0.3, 0.9, 200)
        ys = rng.uniform(0.3, 0.9, 200)
        assert classify_pattern(cloud(xs, ys)).label == "NoTrend"

    def test_needs_three_points(self):
        with pytest.raises(ConfigurationError):
            classify_pattern([mk(0.5, 0.5), mk(0.6, 0.6)])

    @given(st.permutations(list(range(8))))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_order_and_run_relabeling(self, perm):
        rng = np.random.default_rng(4)
        xs = rng.uniform(0.3, 0.9, 8)
        ys = 1.0 - xs + rng.normal(0, 0.01, 8)
        pts = [mk(xs[i], ys[i], run=f"r{i}", epoch=i) for i in range(8)]
        base = classify_pattern(pts)
        shuffled = [
            mk(pts[i].id_metric, pts[i].ood_metric, run=f"q{k}", epoch=pts[i].epoch)
            for k, i in enumerate(perm)
        ]
        relabeled = classify_pattern(shuffled)
        assert relabeled.label == base.label
        assert relabeled.pearson_r == pytest.approx(base.pearson_r)


class TestFilterAndSelect:
    def test_filter_keeps_only_requested_epoch(self):
        pts = [mk(0.5, 0.5, epoch=e) for e in range(1, 11)]
        kept = filter_fixed_epoch(pts, 10)
        assert [p.epoch for p in kept] == [10]
        assert set(kept) <= set(pts)

    def test_filter_missing_epoch_warns_and_returns_empty(self):
        pts = [mk(0.5, 0.5, epoch=e) for e in range(1, 4)]
        with pytest.warns(UserWarning):
            assert filter_fixed_epoch(pts, 99) == []

    def test_select_max_id_monotone_run_takes_last_epoch(self):
        pts = [mk(0.1 * e, 0.5, epoch=e) for e in range(1, 6)]
        sel = select_max_id(pts)
        assert len(sel) == 1 and sel[0].epoch == 5

    def test_select_max_id_peak_then_decline(self):
        accs = [0.6, 0.8, 0.9, 0.7, 0.5]
        pts = [mk(a, 0.5, epoch=e + 1) for e, a in enumerate(accs)]
        assert select_max_id(pts)[0].epoch == 3

    def test_select_tie_goes_to_earliest_epoch(self):
        pts = [mk(0.9, 0.5, epoch=e) for e in (3, 1, 2)]
        assert select_max_id(pts)[0].epoch == 1

    def test_selection_outputs_are_subsets(self):
        rng = np.random.default_rng(5)
        pts = [
            mk(rng.uniform(0, 1), rng.uniform(0, 1), run=f"r{i % 3}", epoch=i)
            for i in range(12)
        ]
        assert set(select_max_id(pts)) <= set(pts)
        assert set(select_max_ood(pts)) <= set(pts)


class TestSelectionBiasReport:
    def _negative_trajectories_aligned_endpoints(self):
        # per-run trajectories descend in OOD as ID rises; all runs end at
        # nearly the same (high-ID, low-OOD) corner, so a fixed-epoch slice
        # across runs is a vertical sliver
        rng = np.random.default_rng(6)
        pts = []
        for r in range(8):
            start_ood = 0.75 + 0.1 * rng.uniform()
            for e in range(1, 11):
                frac = (e - 1) / 9
                id_m = 0.80 + 0.185 * frac + rng.normal(0, 0.002)
                ood_m = start_ood * (1 - frac) + 0.55 * frac + rng.normal(0, 0.002)
                pts.append(mk(id_m, min(ood_m, 1.0), run=f"r{r}", epoch=e))
        return pts

    def test_full_negative_filtered_vertical(self):
        pts = self._negative_trajectories_aligned_endpoints()
        report = selection_bias_report(pts, fixed_epoch=10)
        assert report.pattern_full.label == "Negative"
        assert report.pattern_filtered.label == "Vertical"

    def test_positive_cloud_has_near_zero_regret(self):
        rng = np.random.default_rng(7)
        pts = []
        for r in range(5):
            for e in range(1, 8):
                base = 0.3 + 0.08 * e
                pts.append(
                    mk(base + rng.normal(0, 0.002), base + rng.normal(0, 0.002),
                       run=f"r{r}", epoch=e)
                )
        report = selection_bias_report(pts, fixed_epoch=7)
        assert report.ood_regret == pytest.approx(0.0, abs=0.02)

    def test_regret_nonnegative_and_comonotone_zero(self):
        pts = []
        for r in range(3):
            for e in range(1, 5):
                v = 0.1 * e + 0.02 * r
                pts.append(mk(v, v, run=f"r{r}", epoch=e))
        report = selection_bias_report(pts, fixed_epoch=4)
        assert report.ood_regret == pytest.approx(0.0, abs=1e-12)

    def test_needs_two_epochs_and_two_runs(self):
        pts = [mk(0.5, 0.5, run="r0", epoch=1), mk(0.6, 0.6, run="r1", epoch=1)]
        with pytest.raises(ConfigurationError):
            selection_bias_report(pts, fixed_epoch=1)


class TestCsvInterchange:
    def test_roundtrip(self):
        pts = [
            mk(0.5, 0.6, run="erm-0", epoch=1, method="erm", idx=0),
            mk(0.7, 0.4, run="diverse-0", epoch=2, method="diverse", idx=3),
        ]
        back = points_from_csv(points_to_csv(pts))
        assert back == pts

    def test_bad_header_rejected(self):
        with pytest.raises(SchemaError) as exc:
            points_from_csv("a,b,c\n1,2,3\n")
        assert exc.value.row == 1

    def test_out_of_range_accuracy_names_row(self):
        text = (
            "method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk\n"
            "erm,0,0,1,0.5,0.5,0,0\n"
            "erm,0,0,2,1.5,0.5,0,0\n"
        )
        with pytest.raises(SchemaError) as exc:
            points_from_csv(text)
        assert exc.value.row == 3

    def test_malformed_number_names_row(self):
        text = (
            "method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk\n"
            "erm,0,0,one,0.5,0.5,0,0\n"
        )
        with pytest.raises(SchemaError) as exc:
            points_from_csv(text)
        assert exc.value.row == 2

    def test_reingested_csv_reproduces_identical_report(self):
        rng = np.random.default_rng(8)
        pts = [
            mk(float(rng.uniform(0.3, 0.9)), float(rng.uniform(0.3, 0.9)),
               run=f"erm-{i % 4}", epoch=1 + i // 4, method="erm", idx=0)
            for i in range(20)
        ]
        again = points_from_csv(points_to_csv(pts))
        a = selection_bias_report(pts, fixed_epoch=5)
        b = selection_bias_report(again, fixed_epoch=5)
        assert a == b


class TestShiftSweepReport:
    def test_degenerate_family_has_constant_reports(self):
        family = make_shift_family(E0_TASK, [0.1], [0.1], steps=2)
        cfg = TrainConfig(n_models=1, epochs=3, batch_size=32, seed=1)
        reports = shift_sweep_report(
            E0_TASK, E0_ID, family, cfg, n_seeds=3,
            train_size=256, eval_size=1024,
        )
        assert len(reports) == 2
        assert reports[0].t == 0.0 and reports[1].t == 1.0
        # matched eval seeds + identical alphas: identical point clouds
        assert reports[0].label.label == reports[1].label.label
        assert reports[0].pearson_r == pytest.approx(reports[1].pearson_r)
