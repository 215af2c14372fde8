"""lco replay — replay a trace through the fully dynamic oracle with exact checks.

Default output is one answer line per query (`Q u v -> d exact=e ratio=r`)
followed by one TSV summary row:
`status<TAB>n<TAB>m<TAB>blocks<TAB>max_ratio<TAB>fallbacks<TAB>report`.
A FAILED run lists its violations on stderr and exits 1.
"""

from __future__ import annotations

import sys

import click

from lcoracle.cli import cli
from lcoracle.cli._output import emit_json, emit_lines, emit_tsv, fail
from lcoracle.core import SCHEDULERS, replay_impl

SUMMARY_FIELDS = ["status", "n", "m", "blocks", "max_ratio", "fallbacks", "report"]


@cli.command(
    "replay",
    short_help="Replay a trace file with exact verification.",
    help=(
        "Replay TRACE: the first block builds the graph, later blocks are "
        "applied one unit update at a time. Every query is checked against "
        "Dijkstra, and audits run every --audit-every blocks. With --report, "
        "writes the JSON report and a per-block CSV next to it."
    ),
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key=value parameter file.")
@click.option("--audit-every", type=click.IntRange(min=1), default=None, help="Audit cadence in blocks.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None, help="JSON report path.")
@click.option("--scheduler", type=click.Choice(SCHEDULERS), default=None, help="Update scheduler.")
@click.option("--timings/--no-timings", default=None, help="Record wall-clock seconds per block.")
@click.option("--json", "as_json", is_flag=True, default=False, help="Emit the result as single-line JSON.")
def replay_cmd(
    trace: str,
    config_file: str | None,
    audit_every: int | None,
    report_path: str | None,
    scheduler: str | None,
    timings: bool | None,
    as_json: bool,
) -> None:
    """Implementation of `lco replay`."""
    try:
        result = replay_impl(
            trace,
            config_file=config_file,
            audit_every=audit_every,
            report_path=report_path,
            scheduler=scheduler,
            timings=timings,
        )
    except Exception as exc:
        fail(f"replay failed: {exc}", as_json=as_json)
        return

    if as_json:
        emit_json(result)
    else:
        emit_lines(result["queries"])
        emit_tsv([result], SUMMARY_FIELDS)
    if not result["ok"]:
        for violation in result["violations"]:
            sys.stderr.write(f"violation: {violation}\n")
        raise SystemExit(1)


__all__ = ["replay_cmd"]
