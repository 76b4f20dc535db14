import json
import subprocess
import sys
import time

import pytest

from hazardnav.cli import main
from hazardnav.danger import PredictionRecord, save_prediction_records
from hazardnav.environment import load_environment
from hazardnav.likelihood import load_matrix, synth_likelihood, save_matrix
from hazardnav.mission import full_knowledge_reference

from conftest import seeded


@pytest.fixture()
def matrix_files(tmp_path):
    vision = tmp_path / "vision.json"
    language = tmp_path / "language.json"
    save_matrix(synth_likelihood(0.6, "vision"), vision)
    save_matrix(synth_likelihood(0.45, "language"), language)
    return str(vision), str(language)


def run_cli(*argv):
    return main(list(argv))


class TestSimulateCommand:
    def test_default_grid_row_count(self, tmp_path, matrix_files, capsys):
        vision, language = matrix_files
        out = tmp_path / "results.csv"
        code = run_cli(
            "simulate", "school54", "--runs", "2",
            "--vision", vision, "--language", language, "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        # header + 7 default modalities x 4 default tolerances
        assert len(lines) == 1 + 28
        stdout = capsys.readouterr().out
        assert "# master seed: 12345" in stdout

    def test_missing_matrix_exit_code(self, tmp_path, capsys):
        out = tmp_path / "results.csv"
        code = run_cli(
            "simulate", "school54", "--runs", "1",
            "--modalities", "vision", "--out", str(out),
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("E_MATRIX_MISSING:")

    def test_single_run_smoke_under_one_second(self, tmp_path, matrix_files):
        vision, language = matrix_files
        out = tmp_path / "results.csv"
        start = time.monotonic()
        code = run_cli(
            "simulate", "school54", "--runs", "1",
            "--vision", vision, "--language", language,
            "--out", str(out), "--quiet",
        )
        elapsed = time.monotonic() - start
        assert code == 0
        assert elapsed < 1.0

    def test_config_file_with_flag_override(self, tmp_path, matrix_files, capsys):
        vision, language = matrix_files
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "runs": 3, "taus": [2], "modalities": ["no-sensor"], "master_seed": 5,
        }))
        out = tmp_path / "results.csv"
        code = run_cli(
            "simulate", "school54", "--config", str(config),
            "--modalities", "no-sensor,vision", "--vision", vision,
            "--out", str(out), "--quiet",
        )
        assert code == 0
        rows = out.read_text().strip().split("\n")[1:]
        assert [r.split(",")[0] for r in rows] == ["no-sensor", "vision"]
        assert all(r.split(",")[2] == "3" for r in rows)

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"runs": 1, "magic": True}))
        code = run_cli("simulate", "school54", "--config", str(config))
        assert code == 1
        assert capsys.readouterr().err.startswith("E_CONFIG_INVALID:")

    def test_byte_identical_reruns_and_worker_invariance(self, tmp_path, matrix_files):
        vision, language = matrix_files
        args = [
            "simulate", "school54", "--runs", "60", "--taus", "2,4",
            "--modalities", "no-sensor,vl-2", "--vision", vision,
            "--language", language, "--quiet",
        ]
        outputs = []
        for name, extra in (("a", []), ("b", []), ("c", ["--workers", "4"])):
            out = tmp_path / f"{name}.csv"
            assert run_cli(*args, "--out", str(out), *extra) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_per_run_csv(self, tmp_path, matrix_files):
        vision, language = matrix_files
        out, per_run = tmp_path / "r.csv", tmp_path / "runs.csv"
        code = run_cli(
            "simulate", "school54", "--runs", "4", "--taus", "3",
            "--modalities", "no-sensor", "--out", str(out),
            "--per-run", str(per_run), "--quiet",
        )
        assert code == 0
        lines = per_run.read_text().strip().split("\n")
        assert lines[0] == "modality,tau,run,success,exposures,steps"
        assert len(lines) == 5


class TestPlanCommand:
    def test_start_at_exit(self, tmp_path, capsys):
        env = tmp_path / "tiny.json"
        env.write_text(json.dumps({
            "undirected": True,
            "nodes": [{"id": 0, "truth": [1, 0, 0, 0, 0]},
                      {"id": 1, "truth": [1, 0, 0, 0, 0]}],
            "arcs": [[0, 1]],
            "start": 0,
            "exits": [0, 1],
        }))
        code = run_cli("plan", str(env), "--tau", "3", "--modality", "no-sensor")
        assert code == 0
        stdout = capsys.readouterr().out
        assert "outcome: success steps=0 exposures=0" in stdout

    def test_full_knowledge_follows_reference(self, tmp_path, capsys, school):
        code = run_cli(
            "plan", "school54", "--tau", "4", "--modality", "full-knowledge",
            "--seed", "3",
        )
        assert code == 0
        stdout = capsys.readouterr().out
        reference = full_knowledge_reference(school, 4)
        assert ">".join(str(n) for n in reference.nodes) in stdout

    def test_deterministic_stdout(self, matrix_files, capsys):
        vision, _ = matrix_files
        args = ["plan", "school54", "--tau", "2", "--modality", "vision",
                "--vision", vision, "--seed", "99"]
        assert run_cli(*args) == 0
        first = capsys.readouterr().out
        assert run_cli(*args) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_trace_file(self, tmp_path, matrix_files):
        vision, _ = matrix_files
        trace = tmp_path / "trace.jsonl"
        code = run_cli(
            "plan", "school54", "--tau", "2", "--modality", "vision",
            "--vision", vision, "--seed", "7", "--trace", str(trace), "--quiet",
        )
        assert code == 0
        rows = [json.loads(line) for line in trace.read_text().strip().split("\n")]
        assert rows
        for row in rows:
            assert {"position", "events", "beliefs", "planned", "moved_to",
                    "sampled_danger", "exposure"} <= set(row)

    def test_missing_env_file(self, capsys):
        code = run_cli("plan", "/nonexistent/env.json", "--tau", "2",
                       "--modality", "no-sensor")
        assert code == 1
        assert capsys.readouterr().err.startswith("E_ENV_MISSING:")


class TestEstimateCommand:
    def test_one_fold_equals_direct(self, tmp_path, capsys):
        rng = seeded(31)
        truth = synth_likelihood(0.7, "vision")
        records = [
            PredictionRecord(level, truth.sample_prediction(level, rng))
            for level in (1, 2, 3, 4, 5) for _ in range(200)
        ]
        csv_path = tmp_path / "records.csv"
        save_prediction_records(records, csv_path)
        out = tmp_path / "matrix.json"
        code = run_cli(
            "estimate-likelihood", str(csv_path), "--folds", "1",
            "--out", str(out), "--quiet",
        )
        assert code == 0
        from hazardnav.likelihood import estimate_likelihood

        assert load_matrix(out) == estimate_likelihood(records, "vision", 0.0)

    def test_too_few_records(self, tmp_path, capsys):
        csv_path = tmp_path / "records.csv"
        save_prediction_records([PredictionRecord(1, 1)] * 8, csv_path)
        code = run_cli("estimate-likelihood", str(csv_path), "--folds", "9",
                       "--out", str(tmp_path / "m.json"))
        assert code == 1
        assert capsys.readouterr().err.startswith("E_TOO_FEW_RECORDS:")


class TestEvalMetricsCommand:
    def test_perfect_records(self, tmp_path, capsys):
        csv_path = tmp_path / "records.csv"
        save_prediction_records([PredictionRecord(d, d) for d in range(1, 6)], csv_path)
        assert run_cli("eval-metrics", str(csv_path)) == 0
        assert capsys.readouterr().out.strip().endswith("100.0 0.00 100.0")

    def test_hand_example(self, tmp_path, capsys):
        csv_path = tmp_path / "records.csv"
        save_prediction_records(
            [PredictionRecord(1, 2), PredictionRecord(3, 3), PredictionRecord(5, 1)],
            csv_path,
        )
        assert run_cli("eval-metrics", str(csv_path), "--quiet") == 0
        assert capsys.readouterr().out.strip() == "33.3 2.38 66.7"

    def test_empty_records(self, tmp_path, capsys):
        csv_path = tmp_path / "records.csv"
        csv_path.write_text("true,predicted\n")
        assert run_cli("eval-metrics", str(csv_path)) == 1
        assert capsys.readouterr().err.startswith("E_RECORDS_EMPTY:")


class TestGenEnvCommand:
    def test_round_trip_into_simulate(self, tmp_path):
        env = tmp_path / "env.json"
        assert run_cli("gen-env", "--nodes", "54", "--exits", "2",
                       "--out", str(env), "--quiet") == 0
        graph = load_environment(env)
        assert graph.node_count == 54
        out = tmp_path / "results.csv"
        assert run_cli(
            "simulate", str(env), "--runs", "2", "--taus", "3",
            "--modalities", "no-sensor", "--out", str(out), "--quiet",
        ) == 0

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            assert run_cli("gen-env", "--nodes", "30", "--seed", "8",
                           "--out", str(path), "--quiet") == 0
        assert a.read_bytes() == b.read_bytes()

    def test_single_node_rejected(self, capsys):
        assert run_cli("gen-env", "--nodes", "1", "--out", "/tmp/never.json") == 1

    def test_custom_regions(self, tmp_path):
        env = tmp_path / "env.json"
        code = run_cli(
            "gen-env", "--nodes", "12",
            "--regions", "0.5:1,0,0,0,0;0.5:0,0,0,0.3,0.7",
            "--out", str(env), "--quiet",
        )
        assert code == 0
        graph = load_environment(env)
        assert graph.nodes[0].truth.probs == (1, 0, 0, 0, 0)
        assert graph.nodes[11].truth.probs == (0, 0, 0, 0.3, 0.7)


class TestCliContract:
    def test_help_snapshots(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("--help")
        assert exc.value.code == 0
        top = capsys.readouterr().out
        for command in ("simulate", "plan", "estimate-likelihood",
                        "eval-metrics", "gen-env", "serve"):
            assert command in top

        for command, flags in {
            "simulate": ["--runs", "--taus", "--modalities", "--gt-mode",
                         "--termination", "--step-cap", "--vision", "--language",
                         "--out", "--per-run", "--config", "--seed", "--workers",
                         "--quiet", "--server"],
            "plan": ["--tau", "--modality", "--trace", "--seed"],
            "estimate-likelihood": ["--folds", "--smoothing", "--modality", "--out"],
            "eval-metrics": ["--seed", "--quiet"],
            "gen-env": ["--nodes", "--connectivity", "--regions", "--exits", "--out"],
        }.items():
            with pytest.raises(SystemExit) as exc:
                run_cli(command, "--help")
            assert exc.value.code == 0
            text = capsys.readouterr().out
            for flag in flags:
                assert flag in text, f"{command} --help missing {flag}"
            assert "default" in text

    def test_usage_error_is_exit_1(self, capsys):
        assert run_cli("simulate", "school54", "--runs", "not-a-number") == 1
        assert capsys.readouterr().err.startswith("E_USAGE:")

    def test_unknown_command_is_exit_1(self, capsys):
        assert run_cli("explode") == 1

    def test_internal_error_is_exit_2(self, monkeypatch, capsys):
        # build_parser resolves command handlers by name at call time, so
        # patching the module attribute reroutes dispatch to the bomb.
        import hazardnav.cli as cli_module

        def boom(args):
            raise RuntimeError("wires crossed")

        monkeypatch.setattr(cli_module, "cmd_eval_metrics", boom)
        code = run_cli("eval-metrics", "whatever.csv")
        assert code == 2
        assert capsys.readouterr().err.startswith("E_INTERNAL:")

    def test_console_script_entry_point(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "hazardnav", "--version"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        assert "hazardnav" in result.stdout


class TestServerMode:
    @pytest.fixture()
    def fake_http(self, monkeypatch):
        # Route the CLI's HTTP calls through an in-process ASGI test client,
        # exercising the full request/response serialization path.
        from fastapi.testclient import TestClient

        import hazardnav.cli as cli_module
        from hazardnav.service.app import app

        test_client = TestClient(app, raise_server_exceptions=False)

        def fake_post(url, json=None, timeout=None):
            assert url.startswith("http://fake-server")
            return test_client.post(url.replace("http://fake-server", ""), json=json)

        monkeypatch.setattr(cli_module.httpx, "post", fake_post)

    def test_simulate_matches_local_mode(self, fake_http, tmp_path, matrix_files):
        vision, language = matrix_files
        args = [
            "simulate", "school54", "--runs", "10", "--taus", "2",
            "--modalities", "no-sensor,vision", "--vision", vision,
            "--language", language, "--quiet",
        ]
        local, remote = tmp_path / "local.csv", tmp_path / "remote.csv"
        assert run_cli(*args, "--out", str(local)) == 0
        assert run_cli(*args, "--out", str(remote), "--server", "http://fake-server") == 0
        assert local.read_bytes() == remote.read_bytes()

    def test_server_error_maps_to_exit_1(self, fake_http, tmp_path, capsys):
        code = run_cli(
            "simulate", "school54", "--runs", "1", "--modalities", "no-sensor",
            "--taus", "9", "--out", str(tmp_path / "r.csv"),
            "--server", "http://fake-server",
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("E_INPUT:")
