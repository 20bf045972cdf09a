"""Config loading and CLI contract tests (exit codes, artifacts, determinism)."""

import json

import numpy as np
import pytest

from misspec import ConfigurationError, dump_experiment_config, load_experiment_config
from misspec.cli import main

E0_CONFIG = """\
seed = 0

[task]
d_inv = 1
d_spu = 1
gamma = [1.0]
sigma_inv_sq = 1.0
sigma_spu_sq = [1.0]
inv_scale_sq = 1.0

[env_id]
alpha = [0.1]

[env_ood]
alpha = [3.0]

[shift]
alpha_far = [3.0]
steps = 2

[trainer]
n_models = 4
diversity_weight = 10.0
similarity = "cosine"
learning_rate = 0.1
epochs = 3
batch_size = 32

[experiment]
n_seeds = 2
train_size = 256
eval_size = 512
fixed_epoch = 3
"""

BENCH_CONFIG = """\
seed = 1

[task]
d_inv = 4
d_spu = 4
gamma = [0.5, 0.5, 0.5, 0.5]
sigma_inv_sq = 1.0
sigma_spu_sq = [1.0, 1.0, 1.0, 1.0]

[env_id]
alpha = [0.1, 0.1, 0.1, 0.1]

[env_ood]
alpha = [3.0, 3.0, 3.0, 3.0]

[trainer]
n_models = 2
diversity_weight = 0.5
similarity = "cosine"
learning_rate = 0.1
epochs = 10
batch_size = 64

[experiment]
n_seeds = 5
train_size = 2048
eval_size = 32768
fixed_epoch = 10

[landscape]
eps_x = 0.001
"""


@pytest.fixture
def e0_config(tmp_path):
    path = tmp_path / "e0.toml"
    path.write_text(E0_CONFIG)
    return path


class TestConfig:
    def test_load_and_dump_roundtrip(self, e0_config):
        cfg = load_experiment_config(e0_config)
        assert cfg.task.d_spu == 1
        assert cfg.trainer.similarity == "cosine"
        text = dump_experiment_config(cfg)
        path2 = e0_config.parent / "dumped.toml"
        path2.write_text(text)
        cfg2 = load_experiment_config(path2)
        assert cfg2.task == cfg.task
        assert cfg2.trainer == cfg.trainer
        assert cfg2.n_seeds == cfg.n_seeds
        np.testing.assert_array_equal(cfg2.env_ood.alpha, cfg.env_ood.alpha)

    def test_missing_field_named_in_error(self, tmp_path):
        broken = E0_CONFIG.replace("d_spu = 1\n", "")
        path = tmp_path / "broken.toml"
        path.write_text(broken)
        with pytest.raises(ConfigurationError, match="d_spu"):
            load_experiment_config(path)

    def test_seed_override(self, e0_config):
        cfg = load_experiment_config(e0_config, seed_override=99)
        assert cfg.seed == 99
        assert cfg.trainer.seed == 99

    def test_alpha_dimension_mismatch_rejected(self, tmp_path):
        bad = E0_CONFIG.replace("alpha = [0.1]", "alpha = [0.1, 0.2]", 1)
        path = tmp_path / "bad.toml"
        path.write_text(bad)
        with pytest.raises(ConfigurationError):
            load_experiment_config(path)


class TestCertifyCommand:
    def test_e0_summary_and_artifact(self, e0_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["certify", "--config", str(e0_config), "--out", str(out)])
        captured = capsys.readouterr().out
        assert code == 0
        assert "delta_id < 0" in captured
        assert "delta_ood > 0" in captured
        doc = json.loads((out / "certificate.json").read_text())
        assert doc["verdict"] == "InverseCertified"
        assert doc["delta_id"] == pytest.approx(-100.0 / 101.0, abs=1e-9)

    def test_missing_field_exits_2_and_names_it(self, tmp_path, capsys):
        path = tmp_path / "broken.toml"
        path.write_text(E0_CONFIG.replace("d_spu = 1\n", ""))
        code = main(["certify", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "d_spu" in capsys.readouterr().err

    def test_identical_environments_report_id_only(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace("[env_ood]\nalpha = [3.0]", "[env_ood]\nalpha = [0.1]")
        path = tmp_path / "same.toml"
        path.write_text(cfgtext)
        out = tmp_path / "out"
        code = main(["certify", "--config", str(path), "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "certificate.json").read_text())
        assert doc["verdict"] == "IdOnlyImproved"

    def test_rerun_byte_identical(self, e0_config, tmp_path, capsys):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["certify", "--config", str(e0_config), "--out", str(out1)])
        main(["certify", "--config", str(e0_config), "--out", str(out2)])
        assert (out1 / "certificate.json").read_bytes() == (out2 / "certificate.json").read_bytes()


class TestSweepCommand:
    def test_misspecified_three_feature_csv(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace("d_spu = 1", "d_spu = 3")
        cfgtext = cfgtext.replace("sigma_spu_sq = [1.0]", "sigma_spu_sq = [1.0, 1.0, 1.0]")
        cfgtext = cfgtext.replace("alpha = [0.1]", "alpha = [0.1, 0.1, 0.1]")
        cfgtext = cfgtext.replace("alpha = [3.0]", "alpha = [3.0, 3.0, 3.0]")
        cfgtext = cfgtext.replace("alpha_far = [3.0]", "alpha_far = [3.0, 3.0, 3.0]")
        path = tmp_path / "m3.toml"
        path.write_text(cfgtext)
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(path), "--out", str(out)])
        assert code == 0
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "step,d_hat,L_ID,L_OOD"
        assert len(lines) == 5  # baseline + 3 additions
        l_id = [float(line.split(",")[2]) for line in lines[1:]]
        assert all(b < a for a, b in zip(l_id, l_id[1:]))
        assert (out / "sweep.svg").read_text().startswith("<svg")

    def test_zero_spurious_single_row(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace("d_spu = 1", "d_spu = 0")
        cfgtext = cfgtext.replace("sigma_spu_sq = [1.0]", "sigma_spu_sq = []")
        cfgtext = cfgtext.replace("alpha = [0.1]", "alpha = []")
        cfgtext = cfgtext.replace("alpha = [3.0]", "alpha = []")
        cfgtext = cfgtext.replace("alpha_far = [3.0]", "alpha_far = []")
        path = tmp_path / "zero.toml"
        path.write_text(cfgtext)
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(path), "--out", str(out)])
        assert code == 0
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert len(lines) == 2

    def test_rerun_byte_identical(self, e0_config, tmp_path, capsys):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["sweep", "--config", str(e0_config), "--out", str(out1)])
        main(["sweep", "--config", str(e0_config), "--out", str(out2)])
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
        assert (out1 / "sweep.svg").read_bytes() == (out2 / "sweep.svg").read_bytes()


class TestTrainCommand:
    def test_row_counts(self, e0_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["train", "--config", str(e0_config), "--out", str(out)])
        assert code == 0
        lines = (out / "train.csv").read_text().strip().split("\n")
        # header + n_seeds*epochs erm rows + n_models*epochs diverse rows
        assert len(lines) == 1 + 2 * 3 + 4 * 3
        assert lines[0] == "method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk"

    def test_single_epoch_single_record_per_model(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace("epochs = 3", "epochs = 1")
        path = tmp_path / "one.toml"
        path.write_text(cfgtext)
        out = tmp_path / "out"
        main(["train", "--config", str(path), "--out", str(out)])
        lines = (out / "train.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 2 + 4

    def test_final_epoch_only_when_not_recording(self, tmp_path, capsys):
        cfgtext = E0_CONFIG + "\n"
        cfgtext = cfgtext.replace("batch_size = 32", "batch_size = 32\nrecord_every_epoch = false")
        path = tmp_path / "final.toml"
        path.write_text(cfgtext)
        out = tmp_path / "out"
        main(["train", "--config", str(path), "--out", str(out)])
        lines = (out / "train.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 2 + 4
        assert all(line.split(",")[3] == "3" for line in lines[1:])

    def test_rerun_byte_identical(self, e0_config, tmp_path, capsys):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["train", "--config", str(e0_config), "--out", str(out1)])
        main(["train", "--config", str(e0_config), "--out", str(out2)])
        assert (out1 / "train.csv").read_bytes() == (out2 / "train.csv").read_bytes()

    def test_divergent_run_exits_3_naming_the_run(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace('similarity = "cosine"', 'similarity = "raw_dot"')
        cfgtext = cfgtext.replace("diversity_weight = 10.0", "diversity_weight = 1e6")
        cfgtext = cfgtext.replace("learning_rate = 0.1", "learning_rate = 0.5")
        cfgtext = cfgtext.replace("epochs = 3", "epochs = 40")
        cfgtext = cfgtext.replace("n_models = 4", "n_models = 8")
        path = tmp_path / "div.toml"
        path.write_text(cfgtext)
        with np.errstate(over="ignore", invalid="ignore"):
            code = main(["train", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 3
        err = capsys.readouterr().err
        assert "diverged" in err and "diverse" in err


class TestLandscapeCommand:
    def test_negative_cloud_csv(self, tmp_path, capsys):
        rows = ["method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk"]
        for r in range(4):
            for e in range(1, 6):
                id_acc = 0.5 + 0.08 * e + 0.001 * r
                ood_acc = 0.95 - 0.08 * e - 0.001 * r
                rows.append(f"erm,{r},0,{e},{id_acc},{ood_acc},0,0")
        path = tmp_path / "pts.csv"
        path.write_text("\n".join(rows) + "\n")
        out = tmp_path / "out"
        code = main(["landscape", "--points", str(path), "--fixed-epoch", "5",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "selection_report.json").read_text())
        assert doc["pattern_full"]["label"] == "Negative"
        assert (out / "landscape.svg").read_text().startswith("<svg")

    def test_out_of_range_accuracy_exits_2_with_row(self, tmp_path, capsys):
        text = (
            "method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk\n"
            "erm,0,0,1,0.5,0.5,0,0\n"
            "erm,0,0,2,1.2,0.5,0,0\n"
        )
        path = tmp_path / "bad.csv"
        path.write_text(text)
        code = main(["landscape", "--points", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "row 3" in capsys.readouterr().err

    def test_end_to_end_full_differs_from_filtered(self, tmp_path, capsys):
        path = tmp_path / "bench.toml"
        path.write_text(BENCH_CONFIG)
        out = tmp_path / "out"
        assert main(["train", "--config", str(path), "--out", str(out)]) == 0
        code = main([
            "landscape", "--points", str(out / "train.csv"),
            "--config", str(path), "--fixed-epoch", "10", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads((out / "selection_report.json").read_text())
        assert doc["pattern_full"]["label"] != doc["pattern_filtered"]["label"]


class TestShiftSweepCommand:
    def test_degenerate_two_step_family(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace("alpha_far = [3.0]", "alpha_far = [0.1]")
        path = tmp_path / "deg.toml"
        path.write_text(cfgtext)
        out = tmp_path / "out"
        code = main(["shift-sweep", "--config", str(path), "--out", str(out)])
        assert code == 0
        lines = (out / "shift_sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "t,pattern,pearson_r,mean_ood"
        assert len(lines) == 3
        assert lines[1].split(",")[1] == lines[2].split(",")[1]

    def test_single_step_rejected(self, tmp_path, capsys):
        cfgtext = E0_CONFIG.replace("steps = 2", "steps = 1")
        path = tmp_path / "one.toml"
        path.write_text(cfgtext)
        code = main(["shift-sweep", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
