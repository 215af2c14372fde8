"""The lco CLI through click's CliRunner."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from lcoracle.cli import cli
from lcoracle.trace import gen_trace
from tests.test_core import BOWTIE
from tests.test_replay import TINY


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.trace"
    path.write_text(TINY)
    return path


def test_help_and_version(runner) -> None:
    result = runner.invoke(cli, ["-h"])
    assert result.exit_code == 0
    assert "replay" in result.output
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output


# ─── config ─────────────────────────────────────────────────────

def test_config_get_tsv(runner) -> None:
    result = runner.invoke(cli, ["config", "get"])
    assert result.exit_code == 0
    rows = dict(line.split("\t", 1) for line in result.output.splitlines())
    assert rows["params.eps"] == "0.25"
    assert rows["replay.scheduler"] == "rotating"
    assert rows["maxflow.check_opt"] == "true"


def test_config_get_json(runner) -> None:
    result = runner.invoke(cli, ["config", "get", "--json"])
    assert result.exit_code == 0
    assert len(result.output.splitlines()) == 1
    assert json.loads(result.output)["params"]["stack_h"] == 4


# ─── replay ─────────────────────────────────────────────────────

def test_replay_prints_answers_then_summary(runner, tiny, small_kv) -> None:
    result = runner.invoke(cli, ["replay", str(tiny), "--config", str(small_kv), "--scheduler", "digit"])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("Q 0 3 -> ")
    assert "exact=4" in lines[0]
    assert lines[-1].split("\t")[:4] == ["PASS", "4", "3", "3"]


def test_replay_json_and_report(runner, tiny, small_kv, tmp_path) -> None:
    out = tmp_path / "out" / "run.json"
    result = runner.invoke(
        cli,
        ["replay", str(tiny), "--config", str(small_kv), "--scheduler", "digit", "--report", str(out), "--json"],
    )
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["ok"] is True
    assert data["report"] == str(out)
    assert out.exists() and out.with_suffix(".csv").exists()


def test_replay_malformed_trace(runner, tmp_path) -> None:
    bad = tmp_path / "bad.trace"
    bad.write_text("V 0\nE 0 1\n")
    result = runner.invoke(cli, ["replay", str(bad), "--json"])
    assert result.exit_code == 1
    data = json.loads(result.output)
    assert data["ok"] is False
    assert "line 2" in data["error"]


def test_replay_rejects_bad_scheduler(runner, tiny) -> None:
    result = runner.invoke(cli, ["replay", str(tiny), "--scheduler", "fifo"])
    assert result.exit_code == 2


# ─── query ──────────────────────────────────────────────────────

def test_query_with_path(runner, tiny, small_kv) -> None:
    result = runner.invoke(cli, ["query", str(tiny), "0", "3", "--prefix", "1", "--path", "--config", str(small_kv)])
    assert result.exit_code == 0, result.output
    line, path = result.output.splitlines()
    assert "exact=4" in line
    vertices = path.split()
    assert vertices[0] == "0" and vertices[-1] == "3"


def test_query_unknown_vertex(runner, tiny, small_kv) -> None:
    result = runner.invoke(cli, ["query", str(tiny), "0", "9", "--config", str(small_kv), "--json"])
    assert result.exit_code == 1
    assert json.loads(result.output)["ok"] is False


# ─── gen-trace ──────────────────────────────────────────────────

def test_gen_trace_stdout(runner) -> None:
    result = runner.invoke(cli, ["gen-trace", "--n", "6", "--updates", "8", "--queries", "4", "--seed", "1"])
    assert result.exit_code == 0
    assert result.output == gen_trace(6, 8, 4, 1)


def test_gen_trace_to_file(runner, tmp_path) -> None:
    out = tmp_path / "t.trace"
    result = runner.invoke(cli, ["gen-trace", "--n", "6", "--updates", "8", "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0
    path, lines = result.output.strip().split("\t")
    assert path == str(out)
    assert int(lines) == out.read_text().count("\n")


def test_gen_trace_needs_two_vertices(runner) -> None:
    result = runner.invoke(cli, ["gen-trace", "--n", "1"])
    assert result.exit_code == 2


# ─── maxflow ────────────────────────────────────────────────────

def test_maxflow_tsv(runner, tmp_path) -> None:
    inst = tmp_path / "bowtie.txt"
    inst.write_text(BOWTIE)
    result = runner.invoke(cli, ["maxflow", str(inst), "--delta", "0.05"])
    assert result.exit_code == 0, result.output
    value, opt, ratio, feasible, dual_ok, *_ = result.output.strip().split("\t")
    assert 0 < float(value) <= 1.0 + 1e-9
    assert float(opt) == pytest.approx(1.0)
    assert (feasible, dual_ok) == ("true", "true")


def test_maxflow_rejects_delta_out_of_range(runner, tmp_path) -> None:
    inst = tmp_path / "bowtie.txt"
    inst.write_text(BOWTIE)
    result = runner.invoke(cli, ["maxflow", str(inst), "--delta", "1.5"])
    assert result.exit_code == 2


def test_maxflow_bad_instance(runner, tmp_path) -> None:
    inst = tmp_path / "bad.txt"
    inst.write_text("3 1\n0 5\nP 0 1\n")
    result = runner.invoke(cli, ["maxflow", str(inst), "--json"])
    assert result.exit_code == 1
    assert json.loads(result.output)["ok"] is False
