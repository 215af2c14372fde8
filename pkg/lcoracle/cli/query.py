"""lco query — one ad-hoc distance query on a trace prefix.

Default output is the answer line, plus the path as a space-separated
vertex list on a second line when --path or --simple is given.
"""

from __future__ import annotations

import click

from lcoracle.cli import cli
from lcoracle.cli._output import emit_json, emit_lines, fail
from lcoracle.core import query_impl


@cli.command(
    "query",
    short_help="Answer one query on the graph a trace builds.",
    help=(
        "Apply the first --prefix blocks of TRACE (all by default), build "
        "the oracle stack on the result and answer the distance query U V."
    ),
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.argument("u", type=int)
@click.argument("v", type=int)
@click.option("--prefix", type=click.IntRange(min=1), default=None, help="Blocks to apply.")
@click.option("--path", "want_path", is_flag=True, default=False, help="Also report the walk.")
@click.option("--simple", is_flag=True, default=False, help="Report a simple path.")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key=value parameter file.")
@click.option("--json", "as_json", is_flag=True, default=False, help="Emit the result as single-line JSON.")
def query_cmd(
    trace: str,
    u: int,
    v: int,
    prefix: int | None,
    want_path: bool,
    simple: bool,
    config_file: str | None,
    as_json: bool,
) -> None:
    """Implementation of `lco query`."""
    try:
        result = query_impl(trace, u, v, prefix=prefix, path=want_path, simple=simple, config_file=config_file)
    except Exception as exc:
        fail(f"query failed: {exc}", as_json=as_json)
        return

    if as_json:
        emit_json(result)
        return
    lines = [result["line"]]
    if "path" in result and result["path"] is not None:
        lines.append(" ".join(str(x) for x in result["path"]))
    emit_lines(lines)


__all__ = ["query_cmd"]
