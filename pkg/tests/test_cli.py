import json
import logging
import math
from pathlib import Path

import pytest

from src.app.core.config import DatasetKind, Settings, parse_config
from src.app.core.errors import ConfigError
from src.app.main import main
from src.app.metrics import MetricKind
from src.app.training import load_report

SYNTHETIC = {
    "dim": 8,
    "num_classes": 12,
    "examples_per_class": 20,
    "min_angle_sep": math.pi / 3,
    "noise_sigma": 0.1,
}
RUN = {
    "epochs": 3,
    "episodes_per_epoch": 10,
    "val_episodes": 5,
    "eval_episodes": 20,
    "n": 2,
    "k": 3,
    "q": 3,
    "lr0": 0.1,
    "split": [6, 3, 3],
    "seed": 5,
}


def write_config(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture
def archive(tmp_path, settings) -> Path:
    config = write_config(tmp_path / "synth.json", {"dataset": {"synthetic": SYNTHETIC}, "seed": 5})
    assert main(["synth", "--config", str(config), "--out", str(tmp_path / "data")], settings) == 0
    return tmp_path / "data" / "synthetic.bin"


@pytest.fixture
def run_config_path(tmp_path, archive) -> Path:
    return write_config(tmp_path / "run.json", {**RUN, "dataset": {"synthetic_archive": str(archive)}})


class TestCommands:

    def test_synth_writes_archive(self, capsys, archive):
        assert archive.is_file()
        assert "12 classes x 20 vectors in R^8" in capsys.readouterr().out

    def test_train_then_eval(self, tmp_path, run_config_path, settings, capsys):
        out = tmp_path / "run"
        common = ["--config", str(run_config_path), "--out", str(out), "--metric", "cosine"]
        assert main(["train", *common], settings) == 0
        assert (out / "checkpoint.bin").is_file()
        assert len((out / "training_trace.csv").read_text(encoding="utf-8").splitlines()) == 4

        assert main(["eval", *common], settings) == 0
        report = load_report(out / "eval_report.json")
        assert report.num_episodes == 20
        assert report.mean_accuracy > 100 / 3
        assert (out / "confusion_matrix.csv").read_text(encoding="utf-8").startswith("true\\predicted,")
        assert "cosine 3-way 2-shot:" in capsys.readouterr().out

    def test_rerun_artifacts_are_byte_identical(self, tmp_path, run_config_path, settings):
        runs = [tmp_path / "first", tmp_path / "second"]
        for out in runs:
            common = ["--config", str(run_config_path), "--out", str(out), "--metric", "aam", "--margin", "0.5"]
            assert main(["train", *common], settings) == 0
            assert main(["eval", *common], settings) == 0
        for name in ("checkpoint.bin", "training_trace.csv", "eval_report.json", "confusion_matrix.csv"):
            assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes(), name

    def test_eval_without_checkpoint(self, tmp_path, run_config_path, settings, capsys):
        code = main(["eval", "--config", str(run_config_path), "--out", str(tmp_path / "empty")], settings)
        assert code == 2
        assert "checkpoint not found" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, settings, capsys):
        config = write_config(tmp_path / "bad.json", {"dataset": {"synthetic": SYNTHETIC}, "bogus": 1})
        assert main(["train", "--config", str(config), "--out", str(tmp_path / "x")], settings) == 2
        assert "bogus: unknown key" in capsys.readouterr().err

    def test_sweep_and_report(self, tmp_path, run_config_path, settings, capsys):
        settings.threads = 2
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(run_config_path), "--out", str(out), "--margins", "0,0.25,0.5"],
                    settings)
        assert code == 0
        summary = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
        assert summary[0] == "metric,3-way 2-shot"
        assert [line.split(",")[0] for line in summary[1:]] == ["aam(m=0.00)", "aam(m=0.25)", "aam(m=0.50)"]

        baseline = tmp_path / "cosine"
        common = ["--config", str(run_config_path), "--out", str(baseline), "--metric", "cosine"]
        assert main(["train", *common], settings) == 0
        assert main(["eval", *common], settings) == 0
        zero_margin = load_report(out / "margin_0.00" / "eval_report.json")
        assert zero_margin.episode_accuracies == load_report(baseline / "eval_report.json").episode_accuracies

        reports = [str(out / name / "eval_report.json") for name in ("margin_0.00", "margin_0.25", "margin_0.50")]
        capsys.readouterr()
        assert main(["report", *reports, "--out", str(tmp_path / "table")], settings) == 0
        assert "aam(m=0.25)" in capsys.readouterr().out
        assert (tmp_path / "table" / "summary.csv").read_text(encoding="utf-8") == "\n".join(summary) + "\n"
        assert json.loads((tmp_path / "table" / "summary.json").read_text(encoding="utf-8"))["columns"] == [
            "3-way 2-shot"
        ]

        baseline_report = str(baseline / "eval_report.json")
        assert main(["report", *reports, "--baseline", baseline_report, "--out", str(tmp_path / "deltas")],
                    settings) == 0
        deltas = (tmp_path / "deltas" / "per_class_deltas.csv").read_text(encoding="utf-8").splitlines()
        assert deltas[0] == "class,aam(m=0.00),aam(m=0.25),aam(m=0.50)"
        assert len(deltas) == 4
        assert all(line.split(",")[1] == "+0.00" for line in deltas[1:])

    def test_report_missing_file(self, tmp_path, settings, capsys):
        assert main(["report", str(tmp_path / "nothing.json")], settings) == 2
        assert "report not found" in capsys.readouterr().err


class TestParseConfig:

    def test_defaults(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = parse_config(write_config(tmp_path / "c.json", {"dataset": {"synthetic": {}}}), {"seed": 4})
        assert cfg.train.epochs == 200
        assert cfg.train.metric == MetricKind.aam(0.5)
        assert cfg.out == Path("runs/latest")
        assert cfg.eval_episodes == 1000
        assert cfg.margins == (0.0, 0.25, 0.5)
        assert cfg.dataset.kind is DatasetKind.synthetic
        assert cfg.dataset.synthetic.seed == 4

    def test_two_sources_rejected(self, tmp_path):
        payload = {"dataset": {"synthetic": {}, "synthetic_archive": "x.bin"}, "out": str(tmp_path)}
        with pytest.raises(ConfigError, match="exactly one dataset source"):
            parse_config(write_config(tmp_path / "c.json", payload))

    def test_missing_dataset(self, tmp_path):
        with pytest.raises(ConfigError, match="missing dataset source"):
            parse_config(write_config(tmp_path / "c.json", {"out": str(tmp_path)}))

    def test_type_mismatch_names_key(self, tmp_path):
        payload = {"dataset": {"synthetic": {}}, "n": "five", "out": str(tmp_path)}
        with pytest.raises(ConfigError) as raised:
            parse_config(write_config(tmp_path / "c.json", payload))
        assert raised.value.key_path == "n"

    def test_flags_override_file(self, tmp_path):
        payload = {"dataset": {"synthetic": {}}, "metric": "cosine", "out": str(tmp_path)}
        cfg = parse_config(write_config(tmp_path / "c.json", payload), {"metric": "aam", "margin": 0.3, "n": None})
        assert cfg.train.metric == MetricKind.aam(0.3)
        assert cfg.train.n == 5

    def test_margin_ignored_for_euclidean(self, tmp_path, caplog):
        payload = {"dataset": {"synthetic": {}}, "metric": "euclidean", "margin": 0.2, "out": str(tmp_path)}
        with caplog.at_level(logging.WARNING, logger="src.app.core.config"):
            cfg = parse_config(write_config(tmp_path / "c.json", payload))
        assert cfg.train.metric == MetricKind.euclidean()
        assert "ignored" in caplog.text

    def test_relative_dataset_path(self, tmp_path):
        (tmp_path / "conf").mkdir()
        (tmp_path / "conf" / "data.bin").write_bytes(b"")
        payload = {"dataset": {"synthetic_archive": "data.bin"}, "out": str(tmp_path)}
        cfg = parse_config(write_config(tmp_path / "conf" / "c.json", payload))
        assert cfg.dataset.path.resolve() == (tmp_path / "conf" / "data.bin").resolve()

    def test_missing_dataset_path(self, tmp_path):
        payload = {"dataset": {"image_folder": "nowhere"}, "out": str(tmp_path)}
        with pytest.raises(ConfigError) as raised:
            parse_config(write_config(tmp_path / "c.json", payload))
        assert raised.value.key_path == "dataset.image_folder"

    def test_split_and_margins(self, tmp_path):
        payload = {
            "dataset": {"synthetic": {}},
            "split": {"train": 6, "val": 2, "test": 2},
            "margins": "0.1, 0.2",
            "out": str(tmp_path),
        }
        cfg = parse_config(write_config(tmp_path / "c.json", payload))
        assert cfg.split == (6, 2, 2)
        assert cfg.margins == (0.1, 0.2)

    def test_margin_out_of_range(self, tmp_path):
        payload = {"dataset": {"synthetic": {}}, "margins": [0.0, 2.0], "out": str(tmp_path)}
        with pytest.raises(ConfigError) as raised:
            parse_config(write_config(tmp_path / "c.json", payload))
        assert raised.value.key_path == "margins[1]"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            parse_config(path)
