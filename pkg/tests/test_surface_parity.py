"""Surface-parity tests — every shared verb exists on both MCP and CLI.

The `lco` CLI and the `lcoracle-mcp` server are two surfaces over
lcoracle.core. `SHARED_SURFACE` locks the verbs both must carry; rename a
registration on one side only and these tests go red.

MCP names are flat snake_case. When the CLI path differs (dashed or
grouped `<noun> <verb>`), register it in `CLI_PATH_MAP`.
"""

from __future__ import annotations

import asyncio

import click

SHARED_SURFACE: list[str] = [
    "replay",
    "maxflow",
    "gen_trace",
    "query",
    "get_config",
]

# MCP name -> CLI path (space-separated). Missing entries mean the CLI
# path is identical to the MCP name.
CLI_PATH_MAP: dict[str, str] = {
    "gen_trace": "gen-trace",
    "get_config": "config get",
}


# ─── Helpers ────────────────────────────────────────────────────

def _mcp_tool_names() -> set[str]:
    from lcoracle.server import mcp

    tools = asyncio.run(mcp.list_tools())
    return {t.name for t in tools}


def _walk_cli(group: click.Group, prefix: str = "") -> set[str]:
    """Space-separated paths of every leaf command under `group`."""
    paths: set[str] = set()
    for name, cmd in group.commands.items():
        path = f"{prefix} {name}" if prefix else name
        if isinstance(cmd, click.Group):
            paths |= _walk_cli(cmd, prefix=path)
        else:
            paths.add(path)
    return paths


def _cli_paths() -> set[str]:
    from lcoracle.cli import cli

    return _walk_cli(cli)


def _resolve_cli_path(mcp_name: str) -> str:
    return CLI_PATH_MAP.get(mcp_name, mcp_name)


# ─── Tests ──────────────────────────────────────────────────────

def test_mcp_has_all_shared() -> None:
    mcp_names = _mcp_tool_names()
    missing = [name for name in SHARED_SURFACE if name not in mcp_names]
    assert not missing, (
        f"Missing MCP tools for shared surface: {missing}. "
        f"Got MCP tools: {sorted(mcp_names)}"
    )


def test_cli_has_all_shared() -> None:
    cli_paths = _cli_paths()
    missing = [
        (name, _resolve_cli_path(name))
        for name in SHARED_SURFACE
        if _resolve_cli_path(name) not in cli_paths
    ]
    assert not missing, (
        f"Missing CLI paths for shared surface: {missing}. "
        f"Got CLI paths: {sorted(cli_paths)}"
    )


def test_cli_path_map_targets_exist() -> None:
    """Stale mappings left behind by a CLI rename fail here."""
    cli_paths = _cli_paths()
    bad = [(name, path) for name, path in CLI_PATH_MAP.items() if path not in cli_paths]
    assert not bad, f"CLI_PATH_MAP points at non-existent paths: {bad}"


def test_no_mcp_only_tools() -> None:
    assert _mcp_tool_names() == set(SHARED_SURFACE)
