"""Trace replay through the fully dynamic oracle and the RunReport it writes."""

from __future__ import annotations

import json

import pytest

from lcoracle.errors import AuditFailure
from lcoracle.report import CSV_FIELDS, RunReport, replay
from lcoracle.schedule import DigitScheduler
from lcoracle.trace import gen_trace, parse_trace

TINY = """\
V 0
V 1
V 2
V 3
E 0 1 1
E 1 2 1
E 2 3 2
Q 0 3
--
E 0 3 1
Q 0 3
QP 3 1
--
D 1 2
Q 0 2
Q 1 2
"""


def _replay(text: str, small_params, **kwargs) -> RunReport:
    return replay(parse_trace(text), small_params, scheduler=DigitScheduler(2, 2), **kwargs)


# ─── Replay ─────────────────────────────────────────────────────

def test_empty_trace_passes(small_params) -> None:
    report = replay([], small_params)
    assert report.ok
    assert report.blocks == []
    assert report.queries == []


def test_tiny_trace(small_params) -> None:
    report = _replay(TINY, small_params)
    assert report.ok, report.violations
    assert [row.units for row in report.blocks] == [7, 1, 1]
    assert len(report.queries) == 5
    assert report.queries[0].startswith("Q 0 3 -> ")
    assert report.queries[0].split()[5] == "exact=4"
    assert report.queries[2].split()[5] == "exact=2"
    assert report.paths and report.paths[0][0] == 3 and report.paths[0][-1] == 1
    assert (report.n, report.m) == (4, 3)
    assert all(row.audit_ok for row in report.blocks)


def test_disconnection_is_reported(small_params) -> None:
    text = "V 0\nV 1\nV 2\nE 0 1 1\nE 1 2 1\n--\nD 1 2\nQ 0 2\n"
    report = _replay(text, small_params)
    assert report.ok, report.violations
    assert report.queries == ["Q 0 2 -> DISCONNECTED exact=inf ratio=1"]


def test_audit_cadence(small_params) -> None:
    report = _replay(TINY, small_params, audit_every=2)
    assert [row.audit_ok is not None for row in report.blocks] == [True, False, True]


def test_strict_replay_raises_on_failure(small_params, monkeypatch) -> None:
    monkeypatch.setattr(RunReport, "ok", property(lambda self: False))
    with pytest.raises(AuditFailure):
        _replay(TINY, small_params, strict=True)


# ─── Determinism and files ──────────────────────────────────────

def test_replay_is_deterministic(small_params) -> None:
    text = gen_trace(6, 8, 10, seed=5, batch=4)
    first = _replay(text, small_params)
    second = _replay(text, small_params)
    assert first.to_json() == second.to_json()
    assert first.to_csv() == second.to_csv()
    assert first.ok, first.violations


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("n", [6, 10, 15, 20, 30])
def test_random_traces_pass(n: int, seed: int, small_params) -> None:
    text = gen_trace(n, 8, 8, seed=seed, batch=4)
    report = replay(parse_trace(text), small_params, scheduler=DigitScheduler(2, 3), audit_every=10)
    assert report.ok, report.violations
    assert len(report.queries) == 8
    assert report.blocks[0].audit_ok and report.blocks[-1].audit_ok


def test_sixty_vertex_trace_passes(small_params) -> None:
    text = gen_trace(60, 8, 8, seed=60, batch=4)
    report = replay(parse_trace(text), small_params, scheduler=DigitScheduler(2, 3), audit_every=10)
    assert report.ok, report.violations
    assert report.n == 60


def test_report_files(tmp_path, small_params) -> None:
    report = _replay(TINY, small_params)
    json_path, csv_path = report.write(tmp_path / "out" / "run.json")
    data = json.loads(json_path.read_text())
    assert data["status"] == "PASS"
    assert len(data["blocks"]) == 3
    rows = csv_path.read_text().splitlines()
    assert rows[0] == ",".join(CSV_FIELDS)
    assert len(rows) == 4


def test_timings_are_opt_in(small_params) -> None:
    plain = _replay(TINY, small_params)
    timed = _replay(TINY, small_params, timings=True)
    assert all(row.seconds is None for row in plain.blocks)
    assert all(row.seconds is not None for row in timed.blocks)
