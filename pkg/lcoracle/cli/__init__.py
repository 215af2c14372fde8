"""lcoracle.cli — the lco CLI.

Subcommands register themselves on the `cli` click.Group by decorating with
`@cli.command(...)` or `@cli.group(...)`. The import block at the bottom of
this module triggers registration; a new verb module needs a matching
`from lcoracle.cli import <mod>  # noqa: F401` line. Every subcommand:

- Exposes `--json` for structured output (terse TSV is the default).
- Prints no header row for TSV output.
- Calls into `lcoracle.core.<verb>_impl(...)`, never into `lcoracle.server`.

MCP tool names are flat snake_case. The CLI uses the same name, or a
dashed / grouped form (`gen_trace` → `lco gen-trace`, `get_config` →
`lco config get`); `tests/test_surface_parity.py` holds the mapping.
"""

from __future__ import annotations

import logging

import click


@click.group(
    help=(
        "lco — fully dynamic distance oracle CLI. Replays update/query "
        "traces with exact verification, runs the approximate maxflow, and "
        "generates traces. The MCP server (lcoracle-mcp) and this CLI share "
        "all logic via lcoracle.core."
    ),
    epilog=(
        "Examples:\n"
        "\n"
        "\b\n"
        "  lco gen-trace --n 12 --updates 40 --queries 20 --out t.trace\n"
        "  lco replay t.trace --report out/run.json\n"
        "  lco query t.trace 0 5 --path\n"
        "  lco maxflow inst.txt --delta 0.2 --backend oracle\n"
        "  lco config get --json\n"
        "\n"
        "Every verb supports --json for single-line structured output; "
        "default is terse TSV (no header). Run `lco <verb> --help` for details."
    ),
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.version_option(package_name="lcoracle", prog_name="lco")
@click.option("-v", "--verbose", is_flag=True, default=False, help="Debug logging on stderr.")
def cli(verbose: bool) -> None:
    """Root command group. Subcommands register via sibling-module imports."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main() -> None:
    """Console-script entry point referenced by pyproject.toml."""
    cli()


# ─── Subcommand registration ────────────────────────────────────
# Each import registers a verb on `cli` as a side-effect. Keep this list
# alphabetised.
from lcoracle.cli import config as _config  # noqa: F401,E402  (registers config group)
from lcoracle.cli import gen as _gen  # noqa: F401,E402  (registers gen-trace)
from lcoracle.cli import maxflow as _maxflow  # noqa: F401,E402  (registers maxflow)
from lcoracle.cli import query as _query  # noqa: F401,E402  (registers query)
from lcoracle.cli import replay as _replay  # noqa: F401,E402  (registers replay)


__all__ = ["cli", "main"]
