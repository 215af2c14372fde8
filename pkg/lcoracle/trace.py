"""lcoracle.trace — trace and flow-instance files, plus a deterministic trace generator.

Trace files are line-oriented:

    V u | X u | E u v len | D u v | W v a | T+ v | T- v    updates
    Q u v | QP u v                                        distance / path query
    --                                                    batch boundary

Blank lines and `#` comments are skipped. The first block builds the initial
graph; every later block is replayed one unit update at a time.

Flow instances start with an `n k` header, then `u v` edge lines and `P s t`
pair lines; vertices are 0..n-1.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

from lcoracle.errors import ParseError
from lcoracle.graph import DynGraph, Unit, UpdateKind, apply_units_inplace
from lcoracle.multiflow import FlowInstance
from lcoracle.params import DEFAULT_PARAMS

logger = logging.getLogger(__name__)

BOUNDARY = "--"

_ARITY = {
    UpdateKind.ADD_VERTEX: 1,
    UpdateKind.DEL_VERTEX: 1,
    UpdateKind.ADD_EDGE: 3,
    UpdateKind.DEL_EDGE: 2,
    UpdateKind.ADD_WEIGHT: 2,
    UpdateKind.ADD_TERMINAL: 1,
    UpdateKind.DEL_TERMINAL: 1,
}


@dataclass(frozen=True)
class Query:
    u: int
    v: int
    path: bool = False
    line_no: int = 0

    def render(self) -> str:
        return f"{'QP' if self.path else 'Q'} {self.u} {self.v}"


Item = Union[Unit, Query]
Block = list[Item]


# ═══════════════════════════════════════════════════════════════
# Traces
# ═══════════════════════════════════════════════════════════════

def _ints(parts: Sequence[str], line_no: int) -> list[int]:
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ParseError(line_no, f"expected integers, got {' '.join(parts)!r}") from None


def parse_line(line: str, line_no: int) -> Item:
    parts = line.split()
    op, args = parts[0], parts[1:]
    if op in ("Q", "QP"):
        if len(args) != 2:
            raise ParseError(line_no, f"{op} takes 2 arguments, got {len(args)}")
        u, v = _ints(args, line_no)
        return Query(u, v, op == "QP", line_no)
    try:
        kind = UpdateKind(op)
    except ValueError:
        raise ParseError(line_no, f"unknown operation {op!r}") from None
    if len(args) != _ARITY[kind]:
        raise ParseError(line_no, f"{op} takes {_ARITY[kind]} arguments, got {len(args)}")
    nums = _ints(args, line_no)
    if kind is UpdateKind.ADD_EDGE:
        if nums[2] < 1:
            raise ParseError(line_no, f"edge length must be positive, got {nums[2]}")
        return Unit(kind, nums[0], nums[1], nums[2])
    if kind is UpdateKind.DEL_EDGE:
        return Unit(kind, nums[0], nums[1])
    if kind is UpdateKind.ADD_WEIGHT:
        return Unit(kind, nums[0], value=nums[1])
    return Unit(kind, nums[0])


def parse_trace(text: str) -> list[Block]:
    """Blocks of updates and queries, split at `--` lines."""
    blocks: list[Block] = [[]]
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == BOUNDARY:
            blocks.append([])
            continue
        blocks[-1].append(parse_line(line, line_no))
    if not blocks[-1] and len(blocks) > 1:
        blocks.pop()
    return blocks if blocks != [[]] else []


def render_trace(blocks: Iterable[Block]) -> str:
    lines: list[str] = []
    for i, block in enumerate(blocks):
        if i:
            lines.append(BOUNDARY)
        lines.extend(item.render() for item in block)
    return "\n".join(lines) + ("\n" if lines else "")


def read_trace(path: Union[str, Path]) -> list[Block]:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def units_of(block: Block) -> list[Unit]:
    return [item for item in block if isinstance(item, Unit)]


def queries_of(block: Block) -> list[Query]:
    return [item for item in block if isinstance(item, Query)]


def initial_graph(block: Block, *, max_len: int = DEFAULT_PARAMS.max_len) -> DynGraph:
    """Graph built by the updates of the first block; bad updates raise MalformedBatch."""
    g = DynGraph(max_len=max_len)
    apply_units_inplace(g, units_of(block))
    return g


# ═══════════════════════════════════════════════════════════════
# Flow instances
# ═══════════════════════════════════════════════════════════════

def parse_instance(text: str, *, delta: float = DEFAULT_PARAMS.delta) -> FlowInstance:
    header: list[int] = []
    edges: list[tuple[int, int]] = []
    pairs: list[tuple[int, int]] = []
    last = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        last = line_no
        parts = line.split()
        if not header:
            if len(parts) != 2:
                raise ParseError(line_no, "expected an `n k` header")
            header = _ints(parts, line_no)
            continue
        if parts[0] == "P":
            if len(parts) != 3:
                raise ParseError(line_no, "pair lines read `P s t`")
            s, t = _ints(parts[1:], line_no)
            pairs.append((s, t))
            continue
        if len(parts) not in (2, 3):
            raise ParseError(line_no, "edge lines read `u v`")
        u, v = _ints(parts[:2], line_no)
        if u == v:
            raise ParseError(line_no, f"self-loop at {u}")
        edges.append((u, v))
    if not header:
        raise ParseError(max(last, 1), "empty instance")
    n, k = header
    if len(pairs) != k:
        raise ParseError(last, f"header promises {k} pairs, found {len(pairs)}")
    for s, t in pairs + edges:
        for x in (s, t):
            if not 0 <= x < n:
                raise ParseError(last, f"vertex {x} outside 0..{n - 1}")
    g = DynGraph.from_edges([(u, v, 1) for u, v in edges], range(n))
    return FlowInstance(g, pairs, delta)


def render_instance(inst: FlowInstance) -> str:
    lines = [f"{inst.g.n} {len(inst.pairs)}"]
    lines.extend(f"{e.u} {e.v}" for _, e in sorted(inst.g.edges.items()))
    lines.extend(f"P {s} {t}" for s, t in inst.pairs)
    return "\n".join(lines) + "\n"


def read_instance(path: Union[str, Path], *, delta: float = DEFAULT_PARAMS.delta) -> FlowInstance:
    return parse_instance(Path(path).read_text(encoding="utf-8"), delta=delta)


# ═══════════════════════════════════════════════════════════════
# Generator
# ═══════════════════════════════════════════════════════════════

def gen_trace(
    n: int,
    updates: int,
    queries: int,
    seed: int,
    *,
    batch: int = 10,
    max_len: int = 4,
) -> str:
    """Random connected start graph, then edge insert/delete batches with queries spread between them.

    The same arguments always produce the same text.
    """
    if n < 2:
        raise ValueError(f"need at least 2 vertices, got {n}")
    rng = random.Random(seed)
    shadow = DynGraph()
    first: Block = [Unit(UpdateKind.ADD_VERTEX, v) for v in range(n)]
    for v in range(1, n):
        first.append(Unit(UpdateKind.ADD_EDGE, rng.randrange(v), v, rng.randint(1, max_len)))
    for _ in range(n // 2):
        u, v = rng.sample(range(n), 2)
        first.append(Unit(UpdateKind.ADD_EDGE, u, v, rng.randint(1, max_len)))
    apply_units_inplace(shadow, first)
    blocks: list[Block] = [first]

    nbatches = max(1, -(-updates // batch)) if updates else 0
    per_block = [queries // max(nbatches, 1)] * max(nbatches, 1)
    for i in range(queries - sum(per_block)):
        per_block[i] += 1
    done = 0
    for b in range(max(nbatches, 1)):
        block: Block = []
        for _ in range(min(batch, updates - done)):
            if shadow.edges and rng.random() < 0.4:
                e = shadow.edges[rng.choice(sorted(shadow.edges))]
                unit = Unit(UpdateKind.DEL_EDGE, e.u, e.v)
            else:
                u, v = rng.sample(range(n), 2)
                unit = Unit(UpdateKind.ADD_EDGE, u, v, rng.randint(1, max_len))
            apply_units_inplace(shadow, [unit])
            block.append(unit)
            done += 1
        for j in range(per_block[b]):
            u, v = rng.sample(range(n), 2)
            block.append(Query(u, v, path=j % 5 == 4))
        if block:
            blocks.append(block)
    logger.debug("generated trace: n=%d updates=%d queries=%d seed=%d", n, updates, queries, seed)
    return render_trace(blocks)


__all__ = [
    "BOUNDARY",
    "Block",
    "Item",
    "Query",
    "gen_trace",
    "initial_graph",
    "parse_instance",
    "parse_line",
    "parse_trace",
    "queries_of",
    "read_instance",
    "read_trace",
    "render_instance",
    "render_trace",
    "units_of",
]
