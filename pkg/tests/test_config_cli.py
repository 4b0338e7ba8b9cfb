"""Config parsing, snapshot round-trip, experiment artifacts, and the
CLI verbs."""

import numpy as np
import pytest

from srlab.cli import (
    CSV_HEADER,
    SNAPSHOT_NAME,
    main,
    run_experiment,
)
from srlab.config import (
    ConfigError,
    parse_config,
    parse_config_file,
    render_config,
)
from srlab.losses import lambda_at

TINY_EXPERIMENT = """
dataset.source = blobs
dataset.k = 3
dataset.n_per_class = 40
dataset.d = 4
dataset.separation = 5.0
dataset.seed = 0
noise.kind = symmetric
noise.eta = 0.4
loss.kind = ce
optimizer.lr0 = 0.02
optimizer.epochs = 4
optimizer.batch_size = 32
run.repeats = 3
run.seed = 10
run.output_dir = {out}
"""

SR_EXPERIMENT = TINY_EXPERIMENT + """
sr.enabled = true
sr.tau = 0.5
sr.p = 0.1
sr.lambda0 = 1.1
sr.rho = 1.03
sr.r = 1
"""


class TestConfigParsing:
    def test_defaults_fill_missing_keys(self):
        cfg = parse_config("run.output_dir = /tmp/x\n")
        assert cfg["dataset.source"] == "blobs"
        assert cfg["optimizer.momentum"] == 0.9
        assert cfg["model.hidden"] == (128, 128)
        assert cfg.sr_config() is None

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match="line 2: unknown key 'noise.etaa'"):
            parse_config("run.output_dir = /tmp/x\nnoise.etaa = 0.3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_config("noise.eta = 0.1\nnoise.eta = 0.2\n"
                         "run.output_dir = /tmp/x\n")

    def test_bad_value_reports_field(self):
        with pytest.raises(ConfigError, match="field 'optimizer.epochs'"):
            parse_config("optimizer.epochs = soon\nrun.output_dir = /tmp/x\n")

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config("hello world\n")

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("# a comment\n\nnoise.eta = 0.25  # inline\n"
                           "noise.kind = symmetric\nrun.output_dir = /tmp/x\n")
        assert cfg["noise.eta"] == 0.25

    def test_output_dir_required(self):
        with pytest.raises(ConfigError, match="output_dir"):
            parse_config("noise.eta = 0.1\n")

    def test_invalid_enums_rejected(self):
        with pytest.raises(ConfigError, match="dataset.source"):
            parse_config("dataset.source = imagenet\nrun.output_dir = /tmp/x\n")
        with pytest.raises(ConfigError, match="noise.kind"):
            parse_config("noise.kind = salty\nrun.output_dir = /tmp/x\n")

    def test_owning_type_invariants_enforced(self):
        with pytest.raises(ConfigError, match="tau"):
            parse_config("sr.enabled = true\nsr.tau = 2.0\n"
                         "run.output_dir = /tmp/x\n")
        with pytest.raises(ConfigError, match="eta"):
            parse_config("noise.kind = asymmetric\nnoise.eta = 0.7\n"
                         "run.output_dir = /tmp/x\n")

    def test_hidden_widths_list(self):
        cfg = parse_config("model.hidden = 64,32\nrun.output_dir = /tmp/x\n")
        assert cfg["model.hidden"] == (64, 32)

    def test_round_trip_identity(self):
        cfg = parse_config(SR_EXPERIMENT.format(out="/tmp/y"))
        again = parse_config(render_config(cfg))
        assert again == cfg


@pytest.fixture(scope="module")
def experiment_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg_path = out / "exp.cfg"
    cfg_path.write_text(TINY_EXPERIMENT.format(out=out / "artifacts"))
    status = run_experiment(cfg_path, echo=lambda *_: None)
    assert status == 0
    return out


class TestRunArtifacts:
    def test_one_csv_per_repeat_plus_summary_and_snapshot(self, experiment_dir):
        artifacts = experiment_dir / "artifacts"
        names = sorted(p.name for p in artifacts.iterdir())
        assert names == ["config_snapshot.txt", "run_10.csv", "run_11.csv",
                         "run_12.csv", "summary.csv"]

    def test_run_csv_schema_and_length(self, experiment_dir):
        lines = (experiment_dir / "artifacts" / "run_10.csv").read_text().strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert len(lines) == 1 + 4  # header + one row per epoch
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[2]) == 0.02

    def test_lambda_column_constant_zero_without_sr(self, experiment_dir):
        lines = (experiment_dir / "artifacts" / "run_10.csv").read_text().strip().split("\n")
        assert all(row.split(",")[1] == "0" for row in lines[1:])

    def test_summary_aggregates_three_finals(self, experiment_dir):
        artifacts = experiment_dir / "artifacts"
        finals = []
        for seed in (10, 11, 12):
            rows = (artifacts / f"run_{seed}.csv").read_text().strip().split("\n")
            finals.append(float(rows[-1].split(",")[5]))
        header, row = (artifacts / "summary.csv").read_text().strip().split("\n")
        assert header == "repeats,mean_final_test_accuracy,std_final_test_accuracy"
        repeats, mean, std = row.split(",")
        assert repeats == "3"
        np.testing.assert_allclose(float(mean), np.mean(finals), rtol=1e-15)
        np.testing.assert_allclose(float(std), np.std(finals, ddof=1), rtol=1e-12)

    def test_snapshot_reparses_to_identical_config(self, experiment_dir):
        artifacts = experiment_dir / "artifacts"
        cfg = parse_config_file(experiment_dir / "exp.cfg")
        snapshot = parse_config_file(artifacts / SNAPSHOT_NAME)
        assert snapshot == cfg

    def test_rerun_is_byte_identical(self, experiment_dir, tmp_path):
        cfg_path = tmp_path / "again.cfg"
        cfg_path.write_text(TINY_EXPERIMENT.format(out=tmp_path / "artifacts"))
        assert run_experiment(cfg_path, echo=lambda *_: None) == 0
        for seed in (10, 11, 12):
            a = (experiment_dir / "artifacts" / f"run_{seed}.csv").read_bytes()
            b = (tmp_path / "artifacts" / f"run_{seed}.csv").read_bytes()
            assert a == b


class TestSrRunArtifacts:
    def test_lambda_column_follows_schedule(self, tmp_path):
        cfg_path = tmp_path / "sr.cfg"
        cfg_path.write_text(SR_EXPERIMENT.format(out=tmp_path / "artifacts")
                            .replace("run.repeats = 3", "run.repeats = 1"))
        assert run_experiment(cfg_path, echo=lambda *_: None) == 0
        cfg = parse_config_file(cfg_path)
        sr = cfg.sr_config()
        lines = (tmp_path / "artifacts" / "run_10.csv").read_text().strip().split("\n")
        for row in lines[1:]:
            fields = row.split(",")
            assert float(fields[1]) == lambda_at(int(fields[0]), sr)


class TestCliEntry:
    def test_run_verb(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(TINY_EXPERIMENT.format(out=tmp_path / "artifacts")
                            .replace("run.repeats = 3", "run.repeats = 1"))
        assert main(["run", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "final test accuracy" in out and "summary" in out

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text("nope = 1\n")
        assert main(["run", str(cfg_path)]) == 2
        assert "unknown key" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # diverges on purpose
    def test_divergent_run_exits_1_with_location(self, tmp_path, capsys):
        cfg_path = tmp_path / "diverge.cfg"
        cfg_path.write_text(TINY_EXPERIMENT.format(out=tmp_path / "artifacts")
                            .replace("optimizer.lr0 = 0.02",
                                     "optimizer.lr0 = 1e30"))
        assert main(["run", str(cfg_path)]) == 1
        err = capsys.readouterr().err
        assert "non-finite objective" in err and "epoch" in err

    def test_verify_lemma1_exits_0(self, capsys):
        assert main(["verify", "lemma1"]) == 0
        out = capsys.readouterr().out
        assert "[ok]" in out and "all checks passed" in out

    def test_verify_theorem1_flags(self, capsys):
        assert main(["verify", "theorem1", "--eta", "0.4", "--k", "3"]) == 0
        out = capsys.readouterr().out
        assert "argmin sets equal" in out

    def test_noise_preview_symmetric_bound_line(self, capsys):
        assert main(["noise-preview", "symmetric", "--k", "10",
                     "--eta", "0.8"]) == 0
        out = capsys.readouterr().out
        assert "0.8 < 0.9 -> True" in out

    def test_noise_preview_mnist_row(self, capsys):
        assert main(["noise-preview", "mnist", "--eta", "0.3"]) == 0
        out = capsys.readouterr().out
        rows = [line for line in out.split("\n") if line.startswith("  ")]
        # row 5 puts 0.3 on class 6
        fields = rows[5].split()
        assert fields[5] == "0.700" and fields[6] == "0.300"

    def test_noise_preview_eta_zero_identity(self, capsys):
        assert main(["noise-preview", "symmetric", "--k", "3",
                     "--eta", "0.0"]) == 0
        out = capsys.readouterr().out
        assert " 1.000  0.000  0.000" in out

    def test_noise_preview_custom_map_file(self, tmp_path, capsys):
        flips = tmp_path / "flips.txt"
        flips.write_text("0->2\n")
        assert main(["noise-preview", str(flips), "--k", "3",
                     "--eta", "0.2"]) == 0
        out = capsys.readouterr().out
        assert "0.800  0.000  0.200" in out

    def test_missing_k_for_symmetric_preview(self, capsys):
        assert main(["noise-preview", "symmetric", "--eta", "0.5"]) == 2
        assert "--k is required" in capsys.readouterr().err
