"""End-to-end command-line behavior: exit codes, files written, config flow."""

import json
import subprocess
import sys
import time

import pytest

from bcgsleep.cli import main
from bcgsleep.ingest import load_night
from bcgsleep.models import load_model


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small synthesized cohort plus features, built once through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    nights = root / "nights"
    assert main([
        "synth", "--out", str(nights), "--nights", "3", "--seed", "11",
        "--duration", "3600",
    ]) == 0
    features = root / "features"
    features.mkdir()
    for stem in ("night00", "night01", "night02"):
        assert main([
            "featurize",
            "--in", str(nights / f"{stem}.ndjson"),
            "--labels", str(nights / f"{stem}.labels.json"),
            "--out", str(features / f"{stem}.features.csv"),
        ]) == 0
    return root


def feature_args(workdir, stems=("night00", "night01", "night02")):
    return [str(workdir / "features" / f"{s}.features.csv") for s in stems]


class TestUsageErrors:
    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth"])  # --out is mandatory
        assert exc.value.code == 2

    def test_bad_choice_exits_2(self, workdir, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--features", feature_args(workdir)[0],
                  "--model", "svm", "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2


class TestDataErrors:
    def test_missing_input_exits_1(self, tmp_path, capsys):
        code = main(["sleepwake", "--in", str(tmp_path / "nope.ndjson"),
                     "--out", str(tmp_path / "out.csv")])
        assert code == 1
        assert "FileNotFoundError" in capsys.readouterr().err

    def test_malformed_night_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.ndjson"
        bad.write_text("this is not json\n")
        code = main(["sleepwake", "--in", str(bad), "--out", str(tmp_path / "o.csv")])
        assert code == 1
        assert "MalformedRow" in capsys.readouterr().err

    def test_evaluate_without_model_exits_1(self, workdir, tmp_path, capsys):
        code = main(["evaluate", "--features", *feature_args(workdir),
                     "--out-dir", str(tmp_path)])
        assert code == 1
        assert "ValueError" in capsys.readouterr().err


class TestSynth:
    def test_files_written(self, workdir):
        nights = workdir / "nights"
        assert sorted(p.name for p in nights.glob("*.ndjson")) == [
            "night00.ndjson", "night01.ndjson", "night02.ndjson",
        ]
        assert len(list(nights.glob("*.labels.json"))) == 3
        rec = load_night(nights / "night00.ndjson", night_id="night00")
        assert rec.samples[-1].t == 3599  # final second is always emitted

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--out", str(a), "--nights", "1", "--seed", "1",
                     "--duration", "1800"]) == 0
        assert main(["synth", "--out", str(b), "--nights", "1", "--seed", "2",
                     "--duration", "1800"]) == 0
        assert (a / "night00.ndjson").read_bytes() != (b / "night00.ndjson").read_bytes()


class TestSleepwakeCommand:
    def test_writes_epoch_csv(self, workdir, tmp_path, capsys):
        out = tmp_path / "epochs.csv"
        code = main(["sleepwake", "--in", str(workdir / "nights" / "night00.ndjson"),
                     "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "index,start_t,state,threshold,n_below,n_zero"
        assert len(lines) == 1 + 3600 // 30
        assert "efficiency=" in capsys.readouterr().out


class TestFeaturizeCommand:
    def test_feature_csv_shape(self, workdir):
        text = (workdir / "features" / "night00.features.csv").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("hr_mean,") and lines[0].endswith(",label")
        assert len(lines[1].split(",")) == 31
        assert len(lines) > 1000  # stride-1 windows over a labeled hour


class TestTrainCommand:
    def test_train_tree_and_reload(self, workdir, tmp_path, capsys):
        out = tmp_path / "tree.json"
        code = main(["train", "--features", *feature_args(workdir),
                     "--model", "tree", "--out", str(out), "--seed", "3"])
        assert code == 0
        assert load_model(out).kind == "DecisionTree"
        assert "trained DecisionTree" in capsys.readouterr().out

    def test_config_file_can_supply_all_flags(self, workdir, tmp_path):
        explicit = tmp_path / "explicit.json"
        assert main(["train", "--features", *feature_args(workdir),
                     "--model", "nb", "--out", str(explicit)]) == 0
        cfg = tmp_path / "cfg.json"
        from_config = tmp_path / "from_config.json"
        cfg.write_text(json.dumps({
            "features": feature_args(workdir),
            "model": "nb",
            "out": str(from_config),
        }))
        assert main(["train", "--config", str(cfg)]) == 0
        assert from_config.read_bytes() == explicit.read_bytes()

    def test_command_line_beats_config(self, workdir, tmp_path):
        out = tmp_path / "m.json"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "features": feature_args(workdir),
            "model": "tree",
            "out": str(out),
            "max-depth": 20,
        }))
        assert main(["train", "--config", str(cfg), "--model", "nb"]) == 0
        assert load_model(out).kind == "GaussianNB"

    def test_config_must_be_object(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2, 3]")
        code = main(["train", "--config", str(cfg)])
        assert code == 1
        assert "ValueError" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_single_split_metrics(self, workdir, tmp_path):
        model = tmp_path / "tree.json"
        assert main(["train", "--features", *feature_args(workdir),
                     "--model", "tree", "--out", str(model), "--seed", "5"]) == 0
        out_dir = tmp_path / "eval"
        assert main(["evaluate", "--features", *feature_args(workdir),
                     "--model", str(model), "--out-dir", str(out_dir),
                     "--seed", "5"]) == 0
        doc = json.loads((out_dir / "metrics.json").read_text())
        assert set(doc) >= {"accuracy", "macro_f1", "rmse", "confusion", "n"}
        assert doc["kind"] == "DecisionTree"
        assert doc["accuracy"] > 0.5  # separable synthetic stages
        csv = (out_dir / "confusion.csv").read_text().splitlines()
        assert csv[0] == "predicted\\true,wake,rem,light,deep"

    def test_kfold_metrics(self, workdir, tmp_path):
        out_dir = tmp_path / "kfold"
        assert main(["evaluate", "--features", *feature_args(workdir),
                     "--kfold", "3", "--model-kind", "nb",
                     "--out-dir", str(out_dir)]) == 0
        doc = json.loads((out_dir / "metrics.json").read_text())
        assert len(doc["kfold"]["folds"]) == 3
        assert 0.0 <= doc["kfold"]["mean"]["accuracy"] <= 1.0


class TestReportCommand:
    def test_night_report(self, workdir, tmp_path):
        out_dir = tmp_path / "rep"
        assert main(["report", "--night", str(workdir / "nights" / "night00.ndjson"),
                     "--out-dir", str(out_dir)]) == 0
        svg = (out_dir / "threshold_trace.svg").read_text()
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        doc = json.loads((out_dir / "metrics.json").read_text())
        assert "sleepwake" in doc

    def test_full_night_report_with_model(self, workdir, tmp_path):
        model = tmp_path / "tree.json"
        assert main(["train", "--features", *feature_args(workdir),
                     "--model", "tree", "--out", str(model)]) == 0
        out_dir = tmp_path / "rep2"
        assert main([
            "report",
            "--night", str(workdir / "nights" / "night01.ndjson"),
            "--labels", str(workdir / "nights" / "night01.labels.json"),
            "--model", str(model),
            "--out-dir", str(out_dir),
        ]) == 0
        for name in ("threshold_trace.svg", "hypnogram_pair.svg",
                     "confusion_heatmap.svg", "confusion.csv", "metrics.json"):
            assert (out_dir / name).exists(), name

    def test_cohort_report(self, workdir, tmp_path):
        out_dir = tmp_path / "rep3"
        assert main(["report", "--cohort-dir", str(workdir / "nights"),
                     "--out-dir", str(out_dir)]) == 0
        doc = json.loads((out_dir / "metrics.json").read_text())
        assert len(doc["efficiency"]["nights"]) == 3
        assert (out_dir / "efficiency_box.svg").exists()

    def test_report_without_inputs_fails(self, tmp_path, capsys):
        code = main(["report", "--out-dir", str(tmp_path / "r")])
        assert code == 1
        assert "ValueError" in capsys.readouterr().err

    def test_report_reruns_byte_identical(self, workdir, tmp_path):
        a, b = tmp_path / "ra", tmp_path / "rb"
        night = str(workdir / "nights" / "night02.ndjson")
        for out_dir in (a, b):
            assert main(["report", "--night", night, "--out-dir", str(out_dir)]) == 0
        assert (a / "threshold_trace.svg").read_bytes() == (b / "threshold_trace.svg").read_bytes()
        assert (a / "metrics.json").read_bytes() == (b / "metrics.json").read_bytes()


class TestServeRecordCommands:
    def test_stream_round_trip(self, workdir, tmp_path):
        night = workdir / "nights" / "night00.ndjson"
        server = subprocess.Popen(
            [sys.executable, "-m", "bcgsleep", "serve", "--in", str(night),
             "--endpoint", "127.0.0.1:0", "--tick", "0",
             "--dropout", "100:30:disconnect"],
            stdout=subprocess.PIPE, text=True,
        )
        try:
            banner = server.stdout.readline()
            endpoint = banner.rsplit(" on ", 1)[1].strip()
            out = tmp_path / "recorded.ndjson"
            code = main(["record", "--endpoint", endpoint, "--out", str(out),
                         "--retry-interval", "0.05", "--deadline", "2"])
            assert code == 0
            rec = load_night(out, night_id="recorded")
            assert (100, 30) in rec.gaps
            original = load_night(night, night_id="night00")
            want = [s.t for s in original.samples if not 100 <= s.t < 130]
            assert [s.t for s in rec.samples] == want
        finally:
            server.terminate()
            server.wait(timeout=10)
