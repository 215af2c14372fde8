"""lcoracle.report — trace replay against the fully dynamic oracle, and its RunReport.

Replay builds the initial graph from the first block, wraps an `OracleStack`
factory in the fully dynamic wrapper, then feeds every later update one unit
at a time. Each query is checked against Dijkstra on the replayed graph;
full audits run every `audit_every` blocks.

Reports are deterministic unless `timings=True`: JSON uses sorted keys and
the CSV holds one row per block.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from lcoracle.errors import AuditFailure
from lcoracle.graph import INF, dist_exact
from lcoracle.oracle import OracleStack, oracle_wrapper, query_line
from lcoracle.params import DEFAULT_PARAMS, GlobalParams
from lcoracle.schedule import DigitScheduler, FullyDynWrapper
from lcoracle.trace import Block, Query, initial_graph, queries_of, units_of

logger = logging.getLogger(__name__)

CSV_FIELDS = ("block", "units", "work", "restarts", "queries", "max_ratio", "violations", "audit_ok", "seconds")


@dataclass
class BlockRow:
    block: int
    units: int = 0
    work: int = 0
    restarts: int = 0
    queries: int = 0
    max_ratio: float = 1.0
    violations: int = 0
    audit_ok: Optional[bool] = None
    seconds: Optional[float] = None


@dataclass
class RunReport:
    status: str = "PASS"
    n: int = 0
    m: int = 0
    blocks: list[BlockRow] = field(default_factory=list)
    queries: list[str] = field(default_factory=list)
    paths: list[list[int]] = field(default_factory=list)
    audits: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    max_ratio: float = 1.0
    fallbacks: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "PASS"

    def fail(self, message: str) -> None:
        self.violations.append(message)
        self.status = "FAILED"
        logger.warning("replay violation: %s", message)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.blocks:
            writer.writerow(asdict(row))
        return buf.getvalue()

    def write(self, json_path: Union[str, Path]) -> tuple[Path, Path]:
        """Write `<name>.json` and the per-block `<name>.csv` next to it."""
        json_path = Path(json_path)
        csv_path = json_path.with_suffix(".csv")
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(self.to_json(), encoding="utf-8")
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        return json_path, csv_path


# ═══════════════════════════════════════════════════════════════
# Replay
# ═══════════════════════════════════════════════════════════════

def _answer(report: RunReport, row: BlockRow, wrapper: FullyDynWrapper, q: Query) -> None:
    stack: OracleStack = wrapper.designated  # type: ignore[assignment]
    est = stack.query(q.u, q.v)
    exact = dist_exact(wrapper.g, q.u, q.v)
    report.queries.append(query_line(q.u, q.v, est.d, exact))
    row.queries += 1
    where = f"query {q.render()!r} in block {row.block}"
    if est.disconnected != (exact == INF):
        row.violations += 1
        report.fail(f"{where}: connectivity mismatch")
        return
    if est.disconnected:
        return
    if est.d < exact:
        row.violations += 1
        report.fail(f"{where}: estimate {est.d} below distance {int(exact)}")
        return
    if exact > 0:
        row.max_ratio = max(row.max_ratio, est.d / exact)
    assert est.path is not None
    if not est.path.is_valid(wrapper.g) or (est.path.start, est.path.end) != (q.u, q.v):
        row.violations += 1
        report.fail(f"{where}: reported path is not a walk between the endpoints")
    elif est.path.length(wrapper.g) > est.d:
        row.violations += 1
        report.fail(f"{where}: path longer than the estimate")
    if q.path:
        report.paths.append(list(est.path.vertices))


def _audit(report: RunReport, row: BlockRow, wrapper: FullyDynWrapper) -> None:
    stack: OracleStack = wrapper.designated  # type: ignore[assignment]
    result = stack.audit()
    result["in_sync"] = wrapper.in_sync()
    result["block"] = row.block
    row.audit_ok = result["ok"] and result["in_sync"]
    report.audits.append(result)
    if not row.audit_ok:
        report.fail(f"audit failed after block {row.block}")


def replay(
    blocks: list[Block],
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    audit_every: Optional[int] = None,
    scheduler: Optional[DigitScheduler] = None,
    timings: bool = False,
    strict: bool = False,
) -> RunReport:
    """Replay a parsed trace; `strict` raises AuditFailure when the run fails."""
    report = RunReport()
    if not blocks:
        return report
    audit_every = audit_every or params.audit_every
    g0 = initial_graph(blocks[0], max_len=params.max_len)
    wrapper = oracle_wrapper(g0, params.phi, params, scheduler=scheduler)
    logger.info("replay: n=%d m=%d, %d blocks", g0.n, g0.m, len(blocks))
    for i, block in enumerate(blocks):
        row = BlockRow(i)
        started = time.perf_counter()
        if i:
            restarts = wrapper.restarts
            for unit in units_of(block):
                wrapper.update(unit)
                row.work += wrapper.work[-1]
                row.units += 1
            row.restarts = wrapper.restarts - restarts
        else:
            row.units = len(units_of(block))
        for q in queries_of(block):
            _answer(report, row, wrapper, q)
        if i % audit_every == 0 or i == len(blocks) - 1:
            _audit(report, row, wrapper)
        if timings:
            row.seconds = round(time.perf_counter() - started, 6)
        report.blocks.append(row)
        report.max_ratio = max(report.max_ratio, row.max_ratio)
    report.n, report.m = wrapper.g.n, wrapper.g.m
    report.fallbacks = wrapper.designated.fallbacks  # type: ignore[attr-defined]
    logger.info("replay %s: %d queries, max ratio %.3f", report.status, len(report.queries), report.max_ratio)
    if strict and not report.ok:
        raise AuditFailure(f"replay failed with {len(report.violations)} violations", {"violations": report.violations})
    return report


__all__ = [
    "BlockRow",
    "CSV_FIELDS",
    "RunReport",
    "replay",
]
