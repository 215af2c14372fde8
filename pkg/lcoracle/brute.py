"""lcoracle.brute — exhaustive ground-truth oracles for tests and audits.

Dijkstra for distances, simple-path enumeration for anything path-based, and
small LPs over enumerated paths for flow values. Every entry point refuses
instances above its cap with InstanceTooLarge instead of hanging.
"""

from __future__ import annotations

import logging
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from lcoracle.errors import InstanceTooLarge, UnknownVertex
from lcoracle.graph import INF, DynGraph, Walk, dijkstra

logger = logging.getLogger(__name__)

DIJKSTRA_CAP = 300
PATH_ENUM_CAP = 14

# Relative slack for float weight comparisons.
WEIGHT_EPS = 1e-9


def all_pairs(
    g: DynGraph,
    cut: Optional[Mapping[int, int]] = None,
    *,
    vertices: Optional[Iterable[int]] = None,
    cap: int = DIJKSTRA_CAP,
) -> dict[int, dict[int, float]]:
    """dist_{G−C} from every vertex in `vertices` (default: all) to all reachable vertices."""
    if g.n > cap:
        raise InstanceTooLarge(f"{g.n} vertices exceeds the Dijkstra audit cap {cap}")
    sources = sorted(g.vertices if vertices is None else vertices)
    return {s: dijkstra(g, [s], cut)[0] for s in sources}


def exact_dijkstra(
    g: DynGraph,
    u: int,
    v: int,
    cut: Optional[Mapping[int, int]] = None,
    *,
    cap: int = DIJKSTRA_CAP,
) -> float:
    if g.n > cap:
        raise InstanceTooLarge(f"{g.n} vertices exceeds the Dijkstra audit cap {cap}")
    for x in (u, v):
        if x not in g.vertices:
            raise UnknownVertex(f"vertex {x} is not in the graph")
    return dijkstra(g, [u], cut)[0].get(v, INF)


def simple_paths(
    g: DynGraph,
    s: int,
    t: int,
    *,
    bound: Optional[float] = None,
    cut: Optional[Mapping[int, int]] = None,
    cap: int = PATH_ENUM_CAP,
) -> Iterator[Walk]:
    """Every simple s–t path (as a Walk), optionally only those of G−C length ≤ bound."""
    if g.m > cap:
        raise InstanceTooLarge(f"{g.m} edges exceeds the path-enumeration cap {cap}")
    for x in (s, t):
        if x not in g.vertices:
            raise UnknownVertex(f"vertex {x} is not in the graph")
    if s == t:
        yield Walk.trivial(s)
        return
    vertices = [s]
    eids: list[int] = []
    on_path = {s}

    def extend(x: int, length: float) -> Iterator[Walk]:
        for y, e in g.neighbors(x):
            if y in on_path:
                continue
            nl = length + e.length + (cut.get(e.eid, 0) if cut else 0)
            if bound is not None and nl > bound:
                continue
            vertices.append(y)
            eids.append(e.eid)
            if y == t:
                yield Walk(tuple(vertices), tuple(eids))
            else:
                on_path.add(y)
                yield from extend(y, nl)
                on_path.discard(y)
            vertices.pop()
            eids.pop()

    yield from extend(s, 0)


def enum_distance(g: DynGraph, u: int, v: int, *, cap: int = PATH_ENUM_CAP) -> float:
    """Shortest distance by exhaustive simple-path enumeration."""
    best = INF
    for walk in simple_paths(g, u, v, cap=cap):
        best = min(best, walk.length(g))
    return best


# ═══════════════════════════════════════════════════════════════
# Directed flow networks
# ═══════════════════════════════════════════════════════════════

def net_paths(net: Any, h: float, *, cap: int = PATH_ENUM_CAP) -> list[tuple[int, ...]]:
    """All simple s→t arc sequences of total length ≤ h in a FlowNet."""
    if len(net.arcs) > cap * 2:
        raise InstanceTooLarge(f"{len(net.arcs)} arcs exceeds the enumeration cap {cap * 2}")
    out: list[tuple[int, ...]] = []
    stack: list[int] = []
    seen = {net.s}

    def extend(x: Any, length: float) -> None:
        for aid in net.out.get(x, ()):
            arc = net.arcs[aid]
            nl = length + arc.length
            if nl > h or arc.head in seen:
                continue
            stack.append(aid)
            if arc.head == net.t:
                out.append(tuple(stack))
            else:
                seen.add(arc.head)
                extend(arc.head, nl)
                seen.discard(arc.head)
            stack.pop()

    extend(net.s, 0)
    return out


def exact_hflow(net: Any, h: float, *, cap: int = PATH_ENUM_CAP) -> float:
    """Maximum h-length s–t flow value, by LP over enumerated paths."""
    paths = net_paths(net, h, cap=cap)
    if not paths:
        return 0.0
    arc_ids = sorted(net.arcs)
    row = {aid: i for i, aid in enumerate(arc_ids)}
    A = np.zeros((len(arc_ids), len(paths)))
    for j, path in enumerate(paths):
        for aid in path:
            A[row[aid], j] = 1.0
    b = np.array([net.arcs[aid].cap for aid in arc_ids], dtype=float)
    res = linprog(-np.ones(len(paths)), A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    value = float(-res.fun) if res.status == 0 else 0.0
    logger.debug("exact h-flow over %d paths: %.6g", len(paths), value)
    return value


def unblocked_paths(
    net: Any,
    flow_on_arc: Mapping[int, float],
    weights: Mapping[int, float],
    h: float,
    limit: float,
    *,
    cap: int = PATH_ENUM_CAP,
) -> list[tuple[int, ...]]:
    """h-length paths with weight ≤ limit that have no saturated arc."""
    bad = []
    for path in net_paths(net, h, cap=cap):
        weight = sum(weights.get(aid, 0.0) for aid in path)
        if weight > limit * (1 + WEIGHT_EPS):
            continue
        if not any(flow_on_arc.get(aid, 0) >= net.arcs[aid].cap for aid in path):
            bad.append(path)
    return bad


def min_path_weight(net: Any, weights: Mapping[int, float], h: float, *, cap: int = PATH_ENUM_CAP) -> float:
    best = INF
    for path in net_paths(net, h, cap=cap):
        best = min(best, sum(weights.get(aid, 0.0) for aid in path))
    return best


def fractional_cut_feasible(net: Any, weights: Mapping[int, float], h: float, *, cap: int = PATH_ENUM_CAP) -> bool:
    """Every h-length s–t path has weight ≥ 1 (up to WEIGHT_EPS)."""
    return min_path_weight(net, weights, h, cap=cap) >= 1 - WEIGHT_EPS


# ═══════════════════════════════════════════════════════════════
# Vertex-capacitated multicommodity flow
# ═══════════════════════════════════════════════════════════════

def exact_mcf_lp(
    g: DynGraph,
    pairs: Sequence[tuple[int, int]],
    *,
    cap: int = PATH_ENUM_CAP,
) -> float:
    """max Σ f(P) s.t. every vertex carries ≤ 1, P ranging over simple s_j–t_j paths."""
    columns: list[tuple[int, ...]] = []
    for s, t in pairs:
        if s == t:
            continue
        for walk in simple_paths(g, s, t, cap=cap):
            columns.append(walk.vertices)
    if not columns:
        return 0.0
    verts = sorted(g.vertices)
    row = {v: i for i, v in enumerate(verts)}
    A = np.zeros((len(verts), len(columns)))
    for j, path in enumerate(columns):
        for v in path:
            A[row[v], j] = 1.0
    res = linprog(
        -np.ones(len(columns)),
        A_ub=A,
        b_ub=np.ones(len(verts)),
        bounds=(0, None),
        method="highs",
    )
    value = float(-res.fun) if res.status == 0 else 0.0
    logger.debug("exact vertex-capacitated MCF over %d paths: %.6g", len(columns), value)
    return value


__all__ = [
    "DIJKSTRA_CAP",
    "PATH_ENUM_CAP",
    "WEIGHT_EPS",
    "all_pairs",
    "enum_distance",
    "exact_dijkstra",
    "exact_hflow",
    "exact_mcf_lp",
    "fractional_cut_feasible",
    "min_path_weight",
    "net_paths",
    "simple_paths",
    "unblocked_paths",
]
