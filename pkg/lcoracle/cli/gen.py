"""lco gen-trace — deterministic random trace generator.

Without --out the trace text goes to stdout (or inside the JSON record).
With --out, prints `path<TAB>lines`.
"""

from __future__ import annotations

import sys

import click

from lcoracle.cli import cli
from lcoracle.cli._output import emit, fail
from lcoracle.core import gen_trace_impl


@cli.command(
    "gen-trace",
    short_help="Generate a random update/query trace.",
    help=(
        "Generate a trace: a random connected graph on N vertices, then "
        "UPDATES edge insertions/deletions in batches with QUERIES queries "
        "spread between them. The same seed always gives the same trace."
    ),
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.option("--n", "n", type=click.IntRange(min=2), required=True, help="Vertex count.")
@click.option("--updates", type=click.IntRange(min=0), default=0, show_default=True, help="Update count.")
@click.option("--queries", type=click.IntRange(min=0), default=0, show_default=True, help="Query count.")
@click.option("--seed", type=int, default=0, show_default=True, help="Random seed.")
@click.option("--batch", type=click.IntRange(min=1), default=10, show_default=True, help="Updates per batch.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
@click.option("--json", "as_json", is_flag=True, default=False, help="Emit the result as single-line JSON.")
def gen_trace_cmd(
    n: int,
    updates: int,
    queries: int,
    seed: int,
    batch: int,
    out: str | None,
    as_json: bool,
) -> None:
    """Implementation of `lco gen-trace`."""
    try:
        result = gen_trace_impl(n, updates, queries, seed, batch=batch, out=out)
    except Exception as exc:
        fail(f"gen-trace failed: {exc}", as_json=as_json)
        return

    if as_json:
        emit(result, json=True)
    elif out is None:
        sys.stdout.write(result["trace"])
    else:
        emit(result, json=False, fields=["path", "lines"])


__all__ = ["gen_trace_cmd"]
