"""Command-line interface: subcommands, config precedence, exit codes."""

import json
import os

import pytest

from qmux.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def workload_dir(tmp_path, capsys):
    out = str(tmp_path / "wl")
    code, _, _ = run_cli(
        capsys,
        "gen",
        "--rate", "0.5",
        "--duration", "10",
        "--seed", "5",
        "--shot-min", "20",
        "--shot-max", "50",
        "--out", out,
    )
    assert code == 0
    return out


class TestGen:
    def test_writes_manifest_and_jobs(self, workload_dir):
        with open(os.path.join(workload_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
        assert manifest["kind"] == "workload"
        assert manifest["jobs"]
        for job in manifest["jobs"]:
            assert os.path.exists(os.path.join(workload_dir, job["file"]))
        with open(os.path.join(workload_dir, "spec.json")) as fh:
            spec = json.load(fh)
        assert spec["arrival_rate"] == 0.5
        assert spec["seed"] == 5

    def test_same_seed_same_files(self, tmp_path, capsys):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (a, b):
            code, _, _ = run_cli(
                capsys, "gen", "--rate", "0.4", "--duration", "8",
                "--seed", "3", "--out", out,
            )
            assert code == 0
        for name in sorted(os.listdir(os.path.join(a, "procs"))):
            fa = open(os.path.join(a, "procs", name)).read()
            fb = open(os.path.join(b, "procs", name)).read()
            assert fa == fb


class TestPlace:
    def test_layout_to_stdout(self, workload_dir, capsys):
        code, out, _ = run_cli(
            capsys,
            "place",
            "--workload", workload_dir,
            "--topology", "grid(5,6)",
            "--iterations", "3",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["kind"] == "placement"
        assert payload["topology"] == "grid(5,6)"
        assert payload["layout"]["assign"]
        assert payload["breakdown"]["total"] <= payload["start_cost"]

    def test_subset_by_ids(self, workload_dir, capsys):
        with open(os.path.join(workload_dir, "manifest.json")) as fh:
            first = json.load(fh)["jobs"][0]["id"]
        code, out, _ = run_cli(
            capsys,
            "place",
            "--workload", workload_dir,
            "--ids", first,
            "--topology", "grid(5,6)",
            "--iterations", "2",
        )
        assert code == 0
        assert json.loads(out)["members"] == [first]

    def test_unknown_id_fails(self, workload_dir, capsys):
        with pytest.raises(SystemExit):
            main([
                "place",
                "--workload", workload_dir,
                "--ids", "NOPE",
                "--topology", "grid(5,6)",
            ])


class TestSchedule:
    def test_writes_stream_and_program(self, workload_dir, tmp_path, capsys):
        out = str(tmp_path / "sched")
        code, text, _ = run_cli(
            capsys,
            "schedule",
            "--workload", workload_dir,
            "--topology", "grid(5,6)",
            "--iterations", "3",
            "--out", out,
        )
        assert code == 0
        assert "isolation: ok" in text
        assert os.path.exists(os.path.join(out, "stream.txt"))
        with open(os.path.join(out, "program.json")) as fh:
            prog = json.load(fh)
        assert prog["kind"] == "scheduled_program"
        assert prog["instructions"]

    def test_no_sharing_records_pools(self, workload_dir, tmp_path, capsys):
        out = str(tmp_path / "sched2")
        code, text, _ = run_cli(
            capsys,
            "schedule",
            "--workload", workload_dir,
            "--topology", "grid(5,6)",
            "--iterations", "2",
            "--no-sharing",
            "--out", out,
        )
        assert code == 0
        with open(os.path.join(out, "program.json")) as fh:
            prog = json.load(fh)
        assert prog["pools"] is not None
        assert "share ratio 0.000" in text


class TestRunAndMetrics:
    def test_run_then_summarize(self, workload_dir, tmp_path, capsys):
        out = str(tmp_path / "artifacts")
        code, text, _ = run_cli(
            capsys,
            "run",
            "--workload", workload_dir,
            "--topology", "grid(5,6)",
            "--iterations", "2",
            "--out", out,
        )
        assert code == 0
        assert "batches" in text
        code, text, _ = run_cli(capsys, "metrics", out)
        assert code == 0
        assert "space time utility" in text
        code, text, _ = run_cli(capsys, "metrics", out, "--csv")
        assert code == 0
        assert "space_utilization" in text

    def test_missing_run_dir_is_runtime_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "metrics", str(tmp_path / "missing"))
        assert code == 1
        assert "error:" in err


class TestSimulateAndSweep:
    def test_simulate_inline(self, capsys):
        code, text, _ = run_cli(
            capsys,
            "simulate",
            "--rate", "0.5",
            "--duration", "6",
            "--seed", "2",
            "--shot-min", "20",
            "--shot-max", "40",
            "--topology", "grid(5,6)",
            "--iterations", "2",
        )
        assert code == 0
        assert "jobs ->" in text

    def test_sweep_csv(self, tmp_path, capsys):
        out = str(tmp_path / "sweep.csv")
        code, text, _ = run_cli(
            capsys,
            "sweep",
            "--rate", "0.5",
            "--duration", "5",
            "--seed", "4",
            "--shot-min", "20",
            "--shot-max", "40",
            "--topology", "grid(5,6)",
            "--iterations", "2",
            "--lambdas", "0.3,0.6",
            "--policies", "shared+shotaware,shared+fifo",
            "--out", out,
        )
        assert code == 0
        with open(out) as fh:
            lines = fh.read().strip().splitlines()
        assert lines[0].startswith("occupancy_ratio,policy,")
        assert len(lines) == 5  # header + 2 lambdas x 2 policies

    def test_unknown_policy_rejected(self, capsys):
        with pytest.raises(SystemExit):
            main(["sweep", "--policies", "bogus", "--topology", "grid(4,4)"])


class TestConfigPrecedence:
    def test_flags_beat_config_beat_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "qmux.toml"
        cfg.write_text('rate = 0.9\nduration = 5.0\nseed = 12\n')
        out = str(tmp_path / "wl")
        code, _, _ = run_cli(
            capsys,
            "gen",
            "--config", str(cfg),
            "--rate", "0.3",  # flag wins over config
            "--out", out,
        )
        assert code == 0
        with open(os.path.join(out, "spec.json")) as fh:
            spec = json.load(fh)
        assert spec["arrival_rate"] == 0.3  # flag
        assert spec["duration"] == 5.0  # config
        assert spec["seed"] == 12  # config
        assert spec["shot_range"] == [500, 8000]  # default

    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["gen"])  # --out is required
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "qmux" in capsys.readouterr().out
