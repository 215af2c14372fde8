"""lcoracle.core — pure helpers shared by the MCP server and the CLI.

No MCP decorators here, no click decorators here. Config loading and
layering, plus the `*_impl` verbs both surfaces call: replay, maxflow,
gen_trace, query, get_config.
"""

from __future__ import annotations

import copy
import json
import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from lcoracle.brute import exact_mcf_lp
from lcoracle.errors import AuditFailure, ConfigError
from lcoracle.graph import INF, apply_units_inplace, dist_exact
from lcoracle.multiflow import make_backend, mwu_multiflow
from lcoracle.oracle import OracleStack, SimplePathOracle, query_line
from lcoracle.params import DEFAULT_PARAMS, GlobalParams
from lcoracle.report import replay
from lcoracle.schedule import DigitScheduler, RotatingScheduler
from lcoracle.trace import gen_trace, initial_graph, read_instance, read_trace, units_of

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ═══════════════════════════════════════════════════════════════
# Paths & constants
# ═══════════════════════════════════════════════════════════════

CONFIG_DIR = Path.home() / ".config" / "lcoracle"
CONFIG_FILE = CONFIG_DIR / "config.json"

SCHEDULERS = ("rotating", "digit")

DEFAULT_CONFIG: dict[str, Any] = {
    "params": DEFAULT_PARAMS.as_dict(),
    "replay": {
        "scheduler": "rotating",
        "timings": False,
        "report_dir": "",
    },
    "maxflow": {
        "backend": "exact",
        "check_opt": True,
    },
}


# ═══════════════════════════════════════════════════════════════
# Config helpers
# ═══════════════════════════════════════════════════════════════

def _merge(base: dict, over: Mapping) -> dict:
    for key, value in over.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path: Optional[Path] = None) -> dict:
    """Defaults merged key by key with the JSON config file, when it exists and parses."""
    path = path or CONFIG_FILE
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path.exists():
        try:
            with open(path) as f:
                _merge(config, json.load(f))
        except (json.JSONDecodeError, OSError) as exc:
            logger.warning("ignoring unreadable config %s: %s", path, exc)
    return config


def save_config(config: dict, path: Optional[Path] = None) -> None:
    """Save config to file."""
    path = path or CONFIG_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(config, f, indent=2)


def read_kv_file(path: PathLike) -> dict[str, str]:
    """`key=value` lines; blank lines and `#` comments skipped."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {raw.strip()!r}")
        out[key.strip()] = value.strip()
    return out


def load_params(
    config_file: Optional[PathLike] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    *,
    config: Optional[dict] = None,
) -> GlobalParams:
    """Defaults → JSON config → key=value file → explicit overrides (None values skipped)."""
    merged: dict[str, Any] = dict((config or load_config())["params"])
    if config_file:
        merged.update(read_kv_file(config_file))
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    return GlobalParams.from_mapping(merged)


def make_scheduler(name: str, n: int, params: GlobalParams) -> DigitScheduler:
    if name == "rotating":
        return RotatingScheduler.for_sensitivity(max(n, 2) ** 2, params.xi)
    if name == "digit":
        return DigitScheduler.for_graph(n, params.eps)
    raise ConfigError(f"scheduler must be one of {', '.join(SCHEDULERS)}, got {name!r}")


# ═══════════════════════════════════════════════════════════════
# Shared verbs
# ═══════════════════════════════════════════════════════════════

def get_config_impl() -> dict:
    """Effective config dict. Shared by MCP `get_config` and `lco config get`."""
    return load_config()


def replay_impl(
    trace_path: PathLike,
    *,
    config_file: Optional[PathLike] = None,
    audit_every: Optional[int] = None,
    report_path: Optional[PathLike] = None,
    scheduler: Optional[str] = None,
    timings: Optional[bool] = None,
    strict: bool = False,
) -> dict:
    """Replay a trace file; writes the JSON + CSV report when a path is given or configured."""
    config = load_config()
    params = load_params(config_file, {"audit_every": audit_every}, config=config)
    blocks = read_trace(trace_path)
    n = initial_graph(blocks[0], max_len=params.max_len).n if blocks else 0
    sched = make_scheduler(scheduler or config["replay"]["scheduler"], n, params)
    report = replay(
        blocks,
        params,
        scheduler=sched,
        timings=config["replay"]["timings"] if timings is None else timings,
    )
    if report_path is None and config["replay"]["report_dir"]:
        report_path = Path(config["replay"]["report_dir"]) / (Path(trace_path).stem + ".json")
    json_path = csv_path = None
    if report_path is not None:
        json_path, csv_path = report.write(report_path)
    result = {
        "ok": report.ok,
        "status": report.status,
        "n": report.n,
        "m": report.m,
        "blocks": len(report.blocks),
        "queries": report.queries,
        "paths": report.paths,
        "max_ratio": report.max_ratio,
        "fallbacks": report.fallbacks,
        "violations": report.violations,
        "report": str(json_path) if json_path else None,
        "csv": str(csv_path) if csv_path else None,
    }
    if strict and not report.ok:
        raise AuditFailure(f"replay failed with {len(report.violations)} violations", result)
    return result


def maxflow_impl(
    instance_path: PathLike,
    *,
    delta: Optional[float] = None,
    backend: Optional[str] = None,
    config_file: Optional[PathLike] = None,
    check_opt: Optional[bool] = None,
) -> dict:
    """Run the multiplicative-weights maxflow on an instance file."""
    config = load_config()
    params = load_params(config_file, {"delta": delta}, config=config)
    inst = read_instance(instance_path, delta=params.delta)
    res = mwu_multiflow(inst, make_backend(backend or config["maxflow"]["backend"], params), audit_every=params.audit_every)
    out = {"ok": res.ok, **res.as_dict(), "k": len(inst.pairs), "n": inst.g.n, "m": inst.g.m}
    if config["maxflow"]["check_opt"] if check_opt is None else check_opt:
        opt = exact_mcf_lp(inst.g, inst.pairs, cap=params.path_enum_cap)
        out["opt"] = opt
        out["ratio"] = opt / res.value if res.value > 0 else (1.0 if opt == 0 else None)
    return out


def gen_trace_impl(
    n: int,
    updates: int,
    queries: int,
    seed: int,
    *,
    batch: int = 10,
    max_len: int = 4,
    out: Optional[PathLike] = None,
) -> dict:
    """Generate a deterministic trace; written to `out` when given, returned inline otherwise."""
    text = gen_trace(n, updates, queries, seed, batch=batch, max_len=max_len)
    result: dict[str, Any] = {"n": n, "updates": updates, "queries": queries, "seed": seed, "lines": text.count("\n")}
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        result["path"] = str(out)
    else:
        result["trace"] = text
    return result


def query_impl(
    trace_path: PathLike,
    u: int,
    v: int,
    *,
    prefix: Optional[int] = None,
    path: bool = False,
    simple: bool = False,
    config_file: Optional[PathLike] = None,
) -> dict:
    """Answer one query on the graph after the first `prefix` blocks (all by default)."""
    params = load_params(config_file)
    blocks = read_trace(trace_path)
    if prefix is not None:
        blocks = blocks[:prefix]
    if not blocks:
        raise ConfigError("trace prefix is empty; nothing to query")
    g = initial_graph(blocks[0], max_len=params.max_len)
    for block in blocks[1:]:
        apply_units_inplace(g, units_of(block))
    stack = OracleStack.create(g, params.phi, params)
    est = stack.query(u, v)
    exact = dist_exact(g, u, v)
    result: dict[str, Any] = {
        "u": u,
        "v": v,
        "d": est.d,
        "exact": None if exact == INF else int(exact),
        "x": est.x,
        "y": est.y,
        "fallback": est.fallback,
        "a_cfg": est.a_cfg,
        "line": query_line(u, v, est.d, exact),
    }
    if path or simple:
        walk = est.path
        if simple and est.d is not None:
            walk = SimplePathOracle(stack, params.phi, params).path(u, v)
        result["path"] = list(walk.vertices) if walk is not None else None
    return result


__all__ = [
    "CONFIG_DIR",
    "CONFIG_FILE",
    "DEFAULT_CONFIG",
    "SCHEDULERS",
    "gen_trace_impl",
    "get_config_impl",
    "load_config",
    "load_params",
    "make_scheduler",
    "maxflow_impl",
    "query_impl",
    "read_kv_file",
    "replay_impl",
    "save_config",
]
