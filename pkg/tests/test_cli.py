import json
import math

import numpy as np
import pytest

from danmakugen import cli, codec, render, templates


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus")
    assert run_cli("corpus", "build", "--count", "8", "--seed", "7", "--out", str(path)) == 0
    return path


class TestCorpusBuild:
    def test_outputs(self, corpus_dir):
        assert (corpus_dir / "manifest.json").exists()
        assert len(list(corpus_dir.glob("seq_*.json"))) == 8
        manifest = json.loads((corpus_dir / "run_manifest.json").read_text())
        assert manifest["subcommand"] == "corpus build"
        assert manifest["version"]

    def test_scale_example(self, tmp_path):
        out = tmp_path / "d"
        assert run_cli("corpus", "build", "--count", "34", "--seed", "7",
                       "--out", str(out)) == 0
        assert len(list(out.glob("seq_*.json"))) == 34


class TestEncodeDecode:
    def test_encode_then_decode(self, tmp_path):
        program = {"template_id": "ring_burst", "params": [8.0, 16.0, 2.0, 5.0, 0.0], "seed": 3}
        prog_path = tmp_path / "program.json"
        prog_path.write_text(json.dumps(program))
        seq_path = tmp_path / "seq.json"
        assert run_cli("encode", "--in", str(prog_path), "--out", str(seq_path)) == 0
        seq = codec.load_sequence(seq_path)
        expected = templates.unroll(templates.DanmakuProgram("ring_burst",
                                                             np.array(program["params"]), 3))
        assert np.array_equal(seq, expected)
        events_path = tmp_path / "events.json"
        assert run_cli("decode", "--in", str(seq_path), "--out", str(events_path)) == 0
        events = json.loads(events_path.read_text())["events"]
        assert len(events) == 64
        assert events[0]["itv"] == 0

    def test_missing_input_exits_1_without_partial_output(self, tmp_path):
        out = tmp_path / "seq.json"
        code = run_cli("encode", "--in", str(tmp_path / "missing.json"), "--out", str(out))
        assert code == 1
        assert not out.exists()


class TestSimulateRenderAgent:
    def test_simulate_report(self, corpus_dir, tmp_path):
        seq = next(iter(sorted(corpus_dir.glob("seq_*.json"))))
        report = tmp_path / "report.json"
        trace = tmp_path / "trace.json"
        assert run_cli("simulate", "--in", str(seq), "--report", str(report),
                       "--trace", str(trace)) == 0
        payload = json.loads(report.read_text())
        assert set(payload) == {"sf", "mm", "cov"}
        summary = json.loads(trace.read_text())
        assert summary["r"] * summary["c"] == 2688

    def test_render_writes_ppm_frames(self, corpus_dir, tmp_path):
        seq = next(iter(sorted(corpus_dir.glob("seq_*.json"))))
        out = tmp_path / "frames"
        assert run_cli("render", "--in", str(seq), "--out", str(out), "--stride", "50") == 0
        frames = sorted(out.glob("frame_*.ppm"))
        assert frames
        img = render.read_ppm(frames[0])
        assert img.shape == (448, 384, 3)

    def test_agent_report(self, corpus_dir, tmp_path):
        seq = next(iter(sorted(corpus_dir.glob("seq_*.json"))))
        report = tmp_path / "agent.json"
        assert run_cli("agent", "--in", str(seq), "--report", str(report)) == 0
        payload = json.loads(report.read_text())
        assert 0.0 <= payload["survival_ratio"] <= 1.0

    def test_unknown_flag_exits_1(self):
        assert run_cli("simulate", "--bogus", "x") == 1


@pytest.fixture(scope="module")
def train_dir(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    code = run_cli("train", "--model", "psgan", "--data", str(corpus_dir),
                   "--iters", "4", "--eval-every", "2", "--eval-samples", "3",
                   "--seed", "11", "--out", str(out))
    assert code == 0
    return out


class TestTrainGenerateEvaluateCurves:
    def test_train_artifacts(self, train_dir):
        assert (train_dir / "checkpoint.dgck").exists()
        assert (train_dir / "train_log.csv").exists()
        assert (train_dir / "train_log.json").exists()
        assert (train_dir / "run_manifest.json").exists()

    def test_generate(self, train_dir, tmp_path):
        out = tmp_path / "gen"
        assert run_cli("generate", "--ckpt", str(train_dir / "checkpoint.dgck"),
                       "--count", "5", "--seed", "2", "--out", str(out)) == 0
        files = sorted(out.glob("seq_*.json"))
        assert len(files) == 5
        seq = codec.load_sequence(files[0])
        assert seq.shape == (64, 8)

    def test_evaluate_baseline_then_compare(self, corpus_dir, train_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        assert run_cli("evaluate", "--real", str(corpus_dir), "--out", str(baseline)) == 0
        payload = json.loads(baseline.read_text())
        assert set(payload["metrics"]) == {"sf", "mm", "cov"}

        gen = tmp_path / "gen"
        assert run_cli("generate", "--ckpt", str(train_dir / "checkpoint.dgck"),
                       "--count", "6", "--seed", "3", "--out", str(gen)) == 0
        comparison = tmp_path / "compare.csv"
        assert run_cli("evaluate", "--real", str(corpus_dir), "--gen", str(gen),
                       "--out", str(comparison)) == 0
        lines = comparison.read_text().splitlines()
        assert lines[0] == "metric,js_value,n_a,n_b"
        assert len(lines) == 4
        for line in lines[1:]:
            metric, js, n_a, n_b = line.split(",")
            assert metric in {"sf", "mm", "cov"}
            assert 0.0 <= float(js) <= math.log(2) + 1e-12
            assert (int(n_a), int(n_b)) == (8, 6)

    def test_curves(self, corpus_dir, train_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        run_cli("evaluate", "--real", str(corpus_dir), "--out", str(baseline))
        out = tmp_path / "curves"
        assert run_cli("curves", "--log", str(train_dir / "train_log.json"),
                       "--baseline", str(baseline), "--out", str(out)) == 0
        assert (out / "curves.csv").exists()
        assert (out / "curve_sf.svg").exists()

    def test_generate_from_missing_checkpoint_exits_1(self, tmp_path):
        assert run_cli("generate", "--ckpt", str(tmp_path / "nope.dgck"),
                       "--count", "1", "--seed", "0", "--out", str(tmp_path / "g")) == 1


class TestRuntimeFailures:
    def test_unwritable_output_directory_exits_2(self, corpus_dir, tmp_path):
        seq = next(iter(sorted(corpus_dir.glob("seq_*.json"))))
        blocker = tmp_path / "blocked"
        blocker.write_text("a file where a directory must go")
        code = run_cli("render", "--in", str(seq), "--out", str(blocker), "--stride", "100")
        assert code == 2
