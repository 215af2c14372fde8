#!/usr/bin/env python3
"""
lcoracle.server — distance-oracle MCP server.

Thin FastMCP wrapper around lcoracle.core. Config layering and the verbs
themselves live in lcoracle.core; return shapes live in lcoracle.protocol.
Library errors come back as `{"ok": false, "error": ...}` instead of
tracebacks.
"""

import logging
from typing import Optional

from mcp.server.fastmcp import FastMCP

from lcoracle.core import (
    gen_trace_impl,
    get_config_impl,
    maxflow_impl,
    query_impl,
    replay_impl,
)
from lcoracle.errors import LcoracleError
from lcoracle.protocol import ErrorResult

logger = logging.getLogger(__name__)

# Initialize MCP server
mcp = FastMCP("lcoracle")


def _error(exc: Exception) -> ErrorResult:
    logger.debug("tool failed: %s", exc)
    return {"ok": False, "error": str(exc)}


@mcp.tool()
async def replay(
    trace_path: str,
    config_file: Optional[str] = None,
    audit_every: Optional[int] = None,
    report_path: Optional[str] = None,
    scheduler: Optional[str] = None,
) -> dict:
    """
    Replay a trace file through the fully dynamic distance oracle.

    Every query is checked against exact Dijkstra; audits run every
    `audit_every` blocks.

    Args:
        trace_path: Trace file (V/X/E/D/W/T+/T- updates, Q/QP queries, `--` batches)
        config_file: Optional key=value parameter file
        audit_every: Audit cadence in blocks (default from config)
        report_path: Where to write the JSON report; a CSV lands next to it
        scheduler: "rotating" or "digit" (default from config)

    Returns:
        ReplayResult dict with status, answered query lines and report paths
    """
    try:
        return replay_impl(
            trace_path,
            config_file=config_file,
            audit_every=audit_every,
            report_path=report_path,
            scheduler=scheduler,
        )
    except (LcoracleError, OSError) as exc:
        return _error(exc)


@mcp.tool()
async def maxflow(
    instance_path: str,
    delta: Optional[float] = None,
    backend: Optional[str] = None,
    check_opt: Optional[bool] = None,
) -> dict:
    """
    Approximate vertex-capacitated multicommodity flow on an instance file.

    Args:
        instance_path: Instance file (`n k` header, `u v` edges, `P s t` pairs)
        delta: Accuracy parameter in (0, 1) (default from config)
        backend: "exact" or "oracle" distance backend
        check_opt: Also solve the exact LP and report OPT/value

    Returns:
        MaxflowResult dict with the flow value, feasibility and dual checks
    """
    try:
        return maxflow_impl(instance_path, delta=delta, backend=backend, check_opt=check_opt)
    except (LcoracleError, OSError) as exc:
        return _error(exc)


@mcp.tool()
async def gen_trace(
    n: int,
    updates: int,
    queries: int,
    seed: int = 0,
    batch: int = 10,
    out: Optional[str] = None,
) -> dict:
    """
    Generate a deterministic random trace.

    Args:
        n: Vertex count (>= 2)
        updates: Number of edge insertions/deletions after the initial graph
        queries: Number of queries spread across the batches
        seed: Random seed
        batch: Updates per batch
        out: Output file; the trace text is returned inline when omitted

    Returns:
        GenTraceResult dict with counts and either `path` or `trace`
    """
    try:
        return gen_trace_impl(n, updates, queries, seed, batch=batch, out=out)
    except (ValueError, OSError) as exc:
        return _error(exc)


@mcp.tool()
async def query(
    trace_path: str,
    u: int,
    v: int,
    prefix: Optional[int] = None,
    path: bool = False,
    simple: bool = False,
) -> dict:
    """
    Answer one distance query on the graph a trace prefix builds.

    Args:
        trace_path: Trace file
        u: Source vertex
        v: Target vertex
        prefix: Number of blocks to apply (default: all)
        path: Include the reported walk
        simple: Report a simple path instead of a walk

    Returns:
        QueryResult dict with the estimate, exact distance and rendered answer line
    """
    try:
        return query_impl(trace_path, u, v, prefix=prefix, path=path, simple=simple)
    except (LcoracleError, OSError) as exc:
        return _error(exc)


@mcp.tool()
async def get_config() -> dict:
    """
    Get the effective lcoracle config (defaults merged with ~/.config/lcoracle/config.json).

    Returns:
        Config dict with `params`, `replay` and `maxflow` sections
    """
    return get_config_impl()


def main() -> None:
    """Console-script entry point: run the FastMCP stdio server.

    Wired via pyproject.toml [project.scripts]:
        lcoracle-mcp = "lcoracle.server:main"
    """
    mcp.run()


if __name__ == "__main__":
    main()
