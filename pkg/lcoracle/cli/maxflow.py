"""lco maxflow — approximate vertex-capacitated multicommodity flow."""

from __future__ import annotations

import click

from lcoracle.cli import cli
from lcoracle.cli._output import emit, fail
from lcoracle.core import maxflow_impl

FIELDS = ["value", "opt", "ratio", "feasible", "dual_ok", "phases", "routed", "backend"]


@cli.command(
    "maxflow",
    short_help="Multiplicative-weights maxflow on an instance file.",
    help=(
        "Route INSTANCE (an `n k` header, `u v` edges, `P s t` pairs) with "
        "the multiplicative-weights method. --backend oracle answers the "
        "shortest-path calls with the dynamic simple-path oracle; exact uses "
        "Dijkstra. Prints value, OPT from the exact LP, OPT/value and checks."
    ),
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--delta", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None, help="Accuracy parameter.")
@click.option("--backend", type=click.Choice(["exact", "oracle"]), default=None, help="Distance backend.")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key=value parameter file.")
@click.option("--no-opt", is_flag=True, default=False, help="Skip the exact LP.")
@click.option("--json", "as_json", is_flag=True, default=False, help="Emit the result as single-line JSON.")
def maxflow_cmd(
    instance: str,
    delta: float | None,
    backend: str | None,
    config_file: str | None,
    no_opt: bool,
    as_json: bool,
) -> None:
    """Implementation of `lco maxflow`."""
    try:
        result = maxflow_impl(
            instance,
            delta=delta,
            backend=backend,
            config_file=config_file,
            check_opt=False if no_opt else None,
        )
    except Exception as exc:
        fail(f"maxflow failed: {exc}", as_json=as_json)
        return

    emit(result, json=as_json, fields=FIELDS)
    if not result["ok"]:
        raise SystemExit(1)


__all__ = ["maxflow_cmd"]
