"""lcoracle.protocol — shared return-shape types for MCP + CLI surfaces.

TypedDicts mirror the dicts returned by the `*_impl` verbs in lcoracle.core,
so CLI JSON output matches the MCP tools field for field.

Source-of-truth mapping to MCP tools in lcoracle.server:
- ReplayResult   ← replay
- MaxflowResult  ← maxflow
- GenTraceResult ← gen_trace
- QueryResult    ← query
- ErrorResult    ← any tool when the verb raises
"""

from __future__ import annotations

from typing import Optional, TypedDict


class ReplayResult(TypedDict, total=False):
    """Summary of one trace replay; the full report lives in the JSON/CSV files."""
    ok: bool
    status: str  # "PASS" | "FAILED"
    n: int
    m: int
    blocks: int
    queries: list[str]
    paths: list[list[int]]
    max_ratio: float
    fallbacks: int
    violations: list[str]
    report: Optional[str]
    csv: Optional[str]


class MaxflowResult(TypedDict, total=False):
    ok: bool
    value: float
    eta: float
    phases: int
    routed: int
    paths: int  # distinct paths carrying flow
    max_load: float
    feasible: bool
    dual_ok: bool
    rescaled: bool
    backend: str
    observed_alpha: Optional[float]
    n: int
    m: int
    k: int
    opt: float
    ratio: Optional[float]


class GenTraceResult(TypedDict, total=False):
    n: int
    updates: int
    queries: int
    seed: int
    lines: int
    path: str
    trace: str  # only when no output path was given


class QueryResult(TypedDict, total=False):
    u: int
    v: int
    d: Optional[int]
    exact: Optional[int]
    x: Optional[int]
    y: Optional[int]
    fallback: bool
    line: str
    path: Optional[list[int]]


class ErrorResult(TypedDict):
    ok: bool
    error: str


__all__ = [
    "ErrorResult",
    "GenTraceResult",
    "MaxflowResult",
    "QueryResult",
    "ReplayResult",
]
