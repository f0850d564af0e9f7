"""Command-line interface tests: exit codes, round trips, reproducibility."""

import numpy as np
import pytest

from mdnn import data as dm
from mdnn.cli import run


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small synthetic dataset plus tiny trained model directories."""
    root = tmp_path_factory.mktemp("cli")
    assert run(["synth", "--kind", "separable", "--n", "5",
                "--seed", "9", "--out", str(root / "data")]) == 0
    manifest = root / "data" / "manifest.csv"
    common = ["--data", str(manifest), "--tiny", "--epochs", "1"]
    assert run(["train", "--model", "audio", "--out", str(root / "audio")] + common) == 0
    assert run(["train", "--model", "video", "--out", str(root / "video")] + common) == 0
    assert run(["train", "--model", "fusion", "--out", str(root / "bundle"),
                "--video-dir", str(root / "video"), "--audio-dir", str(root / "audio")]
               + common) == 0
    return root


class TestExitCodes:
    def test_missing_required_flag_is_usage_error(self, capsys):
        assert run(["synth", "--kind", "separable"]) == 1

    def test_unknown_command_is_usage_error(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_missing_input_file_is_data_error(self, tmp_path, capsys):
        assert run(["inspect", "--in", str(tmp_path / "nope.ntc")]) == 2

    def test_corrupt_container_is_data_error(self, tmp_path, capsys):
        p = tmp_path / "bad.ntc"
        p.write_bytes(b"XXXX\x01\x01\x01")
        assert run(["inspect", "--in", str(p)]) == 2

    def test_fusion_without_model_dirs_is_usage_error(self, tmp_path, capsys):
        assert run(["train", "--model", "fusion", "--data", "m.csv",
                    "--out", str(tmp_path / "o")]) == 1

    def test_help_is_success(self, capsys):
        assert run(["--help"]) == 0


class TestExtractInspect:
    def test_roundtrip(self, workspace, tmp_path, capsys):
        wav = dm.read_manifest(workspace / "data" / "manifest.csv")[0].audio_path
        out = tmp_path / "feats.ntc"
        assert run(["extract", "--in", wav, "--out", str(out)]) == 0
        assert run(["inspect", "--in", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "shape: (778, 13, 1)" in stdout
        assert dm.read_container(out).shape == (778, 13, 1)

    def test_extract_deterministic(self, workspace, tmp_path, capsys):
        wav = dm.read_manifest(workspace / "data" / "manifest.csv")[0].audio_path
        a, b = tmp_path / "a.ntc", tmp_path / "b.ntc"
        assert run(["extract", "--in", wav, "--out", str(a)]) == 0
        assert run(["extract", "--in", wav, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestTrainEvalPredict:
    def test_model_directory_layout(self, workspace):
        for part in ("audio", "video"):
            d = workspace / part
            assert (d / "model.txt").exists()
            assert (d / "params.txt").exists()
            assert (d / "epochs.csv").exists()
        assert (workspace / "bundle" / "bundle.txt").exists()

    def test_eval_each_model(self, workspace, capsys):
        for part in ("audio", "video", "bundle"):
            assert run(["eval", "--model-dir", str(workspace / part),
                        "--data", str(workspace / "data" / "manifest.csv"),
                        "--split", "test"]) == 0
            assert "accuracy=" in capsys.readouterr().out

    def test_predict(self, workspace, capsys):
        row = dm.read_manifest(workspace / "data" / "manifest.csv")[0]
        assert run(["predict", "--model-dir", str(workspace / "bundle"),
                    "--video", row.video_path, "--audio", row.audio_path]) == 0
        stdout = capsys.readouterr().out
        assert "label:" in stdout and "fused:" in stdout

    def test_train_seed_reproducible(self, workspace, tmp_path, capsys):
        manifest = str(workspace / "data" / "manifest.csv")
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run(["train", "--model", "audio", "--data", manifest, "--tiny",
                        "--epochs", "1", "--seed", "3", "--out", str(out)]) == 0
            outs.append((out / "epochs.csv").read_text())
        assert outs[0] == outs[1]


class TestConfigFile:
    def test_unknown_key_rejected(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("learning_rate=0.01\nbogus_key=1\n")
        assert run(["train", "--model", "audio", "--tiny", "--epochs", "1",
                    "--data", str(workspace / "data" / "manifest.csv"),
                    "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "bogus_key" in capsys.readouterr().err

    def test_flags_override_file(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("epochs=40\nbatch_size=4\n# comment\n")
        assert run(["train", "--model", "audio", "--tiny", "--epochs", "1",
                    "--data", str(workspace / "data" / "manifest.csv"),
                    "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        err = capsys.readouterr().err
        assert "epochs=1" in err      # flag wins
        assert "batch_size=4" in err  # file value survives


class TestDiagnostics:
    def test_param_count(self, capsys):
        assert run(["param-count", "--tiny"]) == 0
        stdout = capsys.readouterr().out
        assert "factored weights:" in stdout and "ratio:" in stdout

    def test_gradcheck_fusion_passes(self, capsys):
        assert run(["gradcheck", "--model", "fusion"]) == 0
        assert "PASS" in capsys.readouterr().out
