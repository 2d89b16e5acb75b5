"""Tests for the command-line interface and its exit codes."""

import json

import pytest
from click.testing import CliRunner

from gcs_planner.cli import EXIT_AUDIT, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, bench_stats, cli


@pytest.fixture
def run(no_user_config):
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, list(args))

    return invoke


@pytest.fixture
def planned(run, tmp_path):
    """Output directory of a successful static_avoidance plan."""
    out = tmp_path / "out"
    result = run("plan", "--scenario", "static_avoidance", "--out", str(out))
    assert result.exit_code == EXIT_OK, result.output
    return out


# ---- plan ----

def test_plan_writes_results(planned):
    assert {p.name for p in planned.iterdir()} == {"result.json", "timings.json", "profile.csv", "trajectory.svg"}
    doc = json.loads((planned / "result.json").read_text())
    assert doc["scenario"] == "static_avoidance"
    assert doc["audit"]["passed"] is True


def test_plan_output_summary(run, tmp_path):
    result = run("plan", "--scenario", "static_avoidance", "--strategy", "both", "--out", str(tmp_path))
    assert result.exit_code == EXIT_OK, result.output
    assert "Strategy:       both" in result.output
    assert "Lower bound:" in result.output
    assert "Phase times:" in result.output


def test_plan_from_file(run, tmp_path, chain_doc):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(chain_doc))
    result = run("plan", "--scenario", str(path), "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_OK, result.output
    assert "A > B" in result.output


def test_plan_needs_a_scenario(run):
    assert run("plan").exit_code == EXIT_USAGE


def test_plan_unknown_scenario(run):
    assert run("plan", "--scenario", "no_such_scenario").exit_code == EXIT_USAGE


def test_plan_invalid_scenario(run, tmp_path, chain_doc):
    chain_doc["ego"]["position"] = [30.0, 0.0]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(chain_doc))
    result = run("plan", "--scenario", str(path), "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_USAGE
    assert "start-containment" in result.output


def test_plan_degenerate_region(run, tmp_path, chain_doc):
    chain_doc["regions"][1] = {"id": "B", "vertices": [[15, 0], [30, 0], [60, 0]]}
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(chain_doc))
    result = run("plan", "--scenario", str(path), "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_USAGE
    assert "region-bounded" in result.output


def test_plan_infeasible(run, tmp_path):
    result = run("plan", "--scenario", "static_avoidance", "--t-max", "1", "--out", str(tmp_path))
    assert result.exit_code == EXIT_INFEASIBLE
    assert "Infeasible" in result.output
    assert not (tmp_path / "result.json").exists()


def test_plan_rejects_bad_degree(run, tmp_path):
    result = run("plan", "--scenario", "static_avoidance", "--degree", "3", "--out", str(tmp_path))
    assert result.exit_code == EXIT_USAGE


def test_plan_reads_config_file(run, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(f"scenario: static_avoidance\nout_dir: {tmp_path / 'cfg-out'}\n")
    result = run("plan", "--config", str(config))
    assert result.exit_code == EXIT_OK, result.output
    assert (tmp_path / "cfg-out" / "result.json").exists()


# ---- verify ----

def test_verify_passes(run, planned):
    result = run("verify", "--result", str(planned / "result.json"), "--scenario", "static_avoidance")
    assert result.exit_code == EXIT_OK, result.output
    assert "passes the audit" in result.output


def test_verify_with_lower_speed_limit(run, planned):
    result = run("verify", "--result", str(planned / "result.json"), "--scenario", "static_avoidance",
                 "--v-max", "2")
    assert result.exit_code == EXIT_AUDIT
    assert "speed bound" in result.output


def test_verify_detects_tampering(run, planned):
    path = planned / "result.json"
    doc = json.loads(path.read_text())
    doc["segments"][-1]["control_points"][-1] = [500.0, 500.0]
    path.write_text(json.dumps(doc))
    result = run("verify", "--result", str(path), "--scenario", "static_avoidance")
    assert result.exit_code == EXIT_AUDIT


def test_verify_against_other_scenario(run, planned):
    result = run("verify", "--result", str(planned / "result.json"), "--scenario", "lane_change")
    assert result.exit_code == EXIT_USAGE


def test_verify_malformed_result(run, tmp_path):
    path = tmp_path / "result.json"
    path.write_text("{}")
    result = run("verify", "--result", str(path), "--scenario", "static_avoidance")
    assert result.exit_code == EXIT_USAGE


def test_verify_missing_result(run, tmp_path):
    result = run("verify", "--result", str(tmp_path / "none.json"), "--scenario", "static_avoidance")
    assert result.exit_code == EXIT_USAGE


# ---- info and bench ----

def test_info(run):
    result = run("info", "--scenario", "static_avoidance")
    assert result.exit_code == EXIT_OK, result.output
    assert "Regions:        6" in result.output
    assert "Paths:          3" in result.output


def test_info_shows_windows(run):
    result = run("info", "--scenario", "lane_change")
    assert result.exit_code == EXIT_OK, result.output
    assert "Timing windows:" in result.output
    assert "entry [-, 2.400], dwell <= 4" in result.output


def test_bench_table(run):
    result = run("bench", "--scenario", "static_avoidance", "--scenario", "lane_change", "--runs", "2")
    assert result.exit_code == EXIT_OK, result.output
    assert "static_avoidance" in result.output
    assert "lane_change" in result.output
    assert "12.1" in result.output
    assert "13.9" in result.output


def test_bench_reports_planning_time_only(run, monkeypatch):
    import time
    from types import SimpleNamespace

    from gcs_planner import cli as cli_module

    real_load = cli_module.load_scenario

    def slow_load(ref):
        time.sleep(0.05)
        return real_load(ref)

    monkeypatch.setattr(cli_module, "load_scenario", slow_load)
    monkeypatch.setattr("gcs_planner.planner.plan", lambda scenario, options: SimpleNamespace(timings={"total": 0.004}))
    result = run("bench", "--scenario", "lane_change", "--runs", "3")
    assert result.exit_code == EXIT_OK, result.output
    assert "4.00" in result.output
    assert "0.00" in result.output


def test_bench_rejects_zero_runs(run):
    assert run("bench", "--runs", "0").exit_code == EXIT_USAGE


def test_bench_stats():
    mean, std = bench_stats([10.0, 12.0])
    assert mean == pytest.approx(11.0)
    assert std == pytest.approx(2 ** 0.5)
    assert bench_stats([5.0]) == (5.0, 0.0)
