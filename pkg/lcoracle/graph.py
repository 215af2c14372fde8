"""lcoracle.graph — dynamic multigraph, batched updates, cuts and landmarks.

Everything downstream shares these representations:

- `DynGraph` is an undirected multigraph with positive integer lengths and
  stable edge ids, so a moving cut survives parallel edges.
- Updates arrive as `Unit`s; `split_batch` sorts a mixed batch into pure
  sub-batches and `apply_batch` applies them to a copy (the input is never
  touched, so replaying a trace is deterministic).
- A moving cut is a plain `dict[eid, int]`; lengths in G−C are ℓ(e)+C(e).
- `dijkstra` is the single shortest-path primitive. Heap entries are keyed
  by (distance, vertex) and adjacency is scanned in edge-id order, so ties
  always resolve the same way.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Container, Iterable, Iterator, Mapping, Optional, Sequence

from lcoracle.errors import MalformedBatch, NonIsolatedDeletion, NotAPath, UnknownVertex

logger = logging.getLogger(__name__)


# ═══════════════════════════════════════════════════════════════
# Vertex ids
# ═══════════════════════════════════════════════════════════════

# Ids at or above this come from a VertexPool; trace ids stay below it.
FRESH_BASE = 2**40

INF = math.inf

MovingCut = dict[int, int]
NodeWeighting = dict[int, int]
Node = tuple[int, int]


class VertexPool:
    """Monotone source of fresh vertex ids, shared by a structure and its copies."""

    def __init__(self, start: int = FRESH_BASE) -> None:
        self._next = start

    def fresh(self) -> int:
        v = self._next
        self._next += 1
        return v

    def observe(self, v: int) -> None:
        if v >= self._next:
            self._next = v + 1

    @property
    def issued(self) -> int:
        return self._next


# ═══════════════════════════════════════════════════════════════
# Graph
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Edge:
    eid: int
    u: int
    v: int
    length: int

    def other(self, x: int) -> int:
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise NotAPath(f"vertex {x} is not an endpoint of edge {self.eid}")

    @property
    def ends(self) -> tuple[int, int]:
        return (self.u, self.v)


@dataclass
class DynGraph:
    vertices: set[int] = field(default_factory=set)
    edges: dict[int, Edge] = field(default_factory=dict)
    adj: dict[int, set[int]] = field(default_factory=dict)
    weights: NodeWeighting = field(default_factory=dict)
    terminals: set[int] = field(default_factory=set)
    epoch: int = 0
    next_eid: int = 0
    retired: set[int] = field(default_factory=set)
    log: list[tuple["Unit", ...]] = field(default_factory=list)
    max_len: int = 2**20
    pool: VertexPool = field(default_factory=VertexPool)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[int, int, int]],
        vertices: Iterable[int] = (),
        *,
        max_len: int = 2**20,
        pool: Optional[VertexPool] = None,
    ) -> "DynGraph":
        g = cls(max_len=max_len, pool=pool or VertexPool())
        for v in vertices:
            g.add_vertex(v)
        for u, v, length in edges:
            for x in (u, v):
                if x not in g.vertices:
                    g.add_vertex(x)
            g.add_edge(u, v, length)
        return g

    def copy(self) -> "DynGraph":
        return DynGraph(
            vertices=set(self.vertices),
            edges=dict(self.edges),
            adj={v: set(es) for v, es in self.adj.items()},
            weights=dict(self.weights),
            terminals=set(self.terminals),
            epoch=self.epoch,
            next_eid=self.next_eid,
            retired=set(self.retired),
            log=list(self.log),
            max_len=self.max_len,
            pool=self.pool,
        )

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.edges)

    def size(self) -> int:
        """|G| = n + m."""
        return len(self.vertices) + len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adj.get(v, ()))

    def incident(self, v: int) -> list[Edge]:
        return [self.edges[e] for e in sorted(self.adj.get(v, ()))]

    def neighbors(self, v: int) -> Iterator[tuple[int, Edge]]:
        for eid in sorted(self.adj.get(v, ())):
            e = self.edges[eid]
            yield e.other(v), e

    def edges_between(self, u: int, v: int) -> list[Edge]:
        return [e for e in self.incident(u) if e.other(u) == v]

    def has_vertex(self, v: int) -> bool:
        return v in self.vertices

    def add_vertex(self, v: int) -> None:
        if v in self.vertices:
            raise MalformedBatch(f"vertex {v} already exists")
        if v in self.retired:
            raise MalformedBatch(f"vertex id {v} was retired and cannot be reused")
        self.vertices.add(v)
        self.adj[v] = set()
        self.pool.observe(v)

    def remove_vertex(self, v: int) -> None:
        if v not in self.vertices:
            raise MalformedBatch(f"vertex {v} does not exist")
        if self.adj.get(v):
            raise NonIsolatedDeletion(f"vertex {v} still has {len(self.adj[v])} incident edges")
        self.vertices.discard(v)
        self.adj.pop(v, None)
        self.weights.pop(v, None)
        self.terminals.discard(v)
        self.retired.add(v)

    def add_edge(self, u: int, v: int, length: int, eid: Optional[int] = None) -> Edge:
        if u not in self.vertices or v not in self.vertices:
            missing = u if u not in self.vertices else v
            raise MalformedBatch(f"edge endpoint {missing} does not exist")
        if u == v:
            raise MalformedBatch(f"self-loop at {u}")
        if not isinstance(length, int) or length < 1 or length > self.max_len:
            raise MalformedBatch(f"edge length {length} outside 1..{self.max_len}")
        if eid is None:
            eid = self.next_eid
        elif eid in self.edges:
            raise MalformedBatch(f"edge id {eid} already in use")
        self.next_eid = max(self.next_eid, eid + 1)
        e = Edge(eid, u, v, length)
        self.edges[eid] = e
        self.adj[u].add(eid)
        self.adj[v].add(eid)
        return e

    def remove_edge(self, eid: int) -> Edge:
        e = self.edges.pop(eid, None)
        if e is None:
            raise MalformedBatch(f"edge id {eid} does not exist")
        self.adj[e.u].discard(eid)
        self.adj[e.v].discard(eid)
        return e


# ═══════════════════════════════════════════════════════════════
# Batched updates
# ═══════════════════════════════════════════════════════════════

class UpdateKind(str, Enum):
    ADD_VERTEX = "V"
    DEL_VERTEX = "X"
    ADD_EDGE = "E"
    DEL_EDGE = "D"
    ADD_WEIGHT = "W"
    ADD_TERMINAL = "T+"
    DEL_TERMINAL = "T-"


# Insertions first, then deletions; isolated-vertex deletion runs last so a
# batch may delete a vertex's edges and the vertex together.
CANONICAL_ORDER = (
    UpdateKind.ADD_VERTEX,
    UpdateKind.ADD_EDGE,
    UpdateKind.ADD_WEIGHT,
    UpdateKind.ADD_TERMINAL,
    UpdateKind.DEL_EDGE,
    UpdateKind.DEL_TERMINAL,
    UpdateKind.DEL_VERTEX,
)


@dataclass(frozen=True)
class Unit:
    kind: UpdateKind
    u: int
    v: Optional[int] = None
    value: int = 0
    eid: Optional[int] = None

    def render(self) -> str:
        if self.kind is UpdateKind.ADD_EDGE:
            return f"E {self.u} {self.v} {self.value}"
        if self.kind is UpdateKind.DEL_EDGE:
            return f"D {self.u} {self.v}"
        if self.kind is UpdateKind.ADD_WEIGHT:
            return f"W {self.u} {self.value}"
        return f"{self.kind.value} {self.u}"


@dataclass(frozen=True)
class Batch:
    """A pure batch: every unit has the same kind."""

    kind: UpdateKind
    units: tuple[Unit, ...]

    @property
    def size(self) -> int:
        if self.kind is UpdateKind.ADD_WEIGHT:
            return sum(u.value for u in self.units)
        return len(self.units)


def split_batch(units: Iterable[Unit]) -> list[Batch]:
    """Split a mixed unit list into pure batches in canonical order."""
    buckets: dict[UpdateKind, list[Unit]] = {k: [] for k in CANONICAL_ORDER}
    for unit in units:
        buckets[unit.kind].append(unit)
    return [Batch(k, tuple(buckets[k])) for k in CANONICAL_ORDER if buckets[k]]


def _apply_unit(g: DynGraph, unit: Unit) -> Optional[Unit]:
    kind = unit.kind
    if kind is UpdateKind.ADD_VERTEX:
        g.add_vertex(unit.u)
        return unit
    if kind is UpdateKind.DEL_VERTEX:
        g.remove_vertex(unit.u)
        return unit
    if kind is UpdateKind.ADD_EDGE:
        if unit.v is None:
            raise MalformedBatch("edge insertion without a second endpoint")
        e = g.add_edge(unit.u, unit.v, unit.value, unit.eid)
        return Unit(kind, e.u, e.v, e.length, e.eid)
    if kind is UpdateKind.DEL_EDGE:
        if unit.eid is not None:
            e = g.edges.get(unit.eid)
            if e is None:
                raise MalformedBatch(f"edge id {unit.eid} does not exist")
            if unit.v is not None and {unit.u, unit.v} != {e.u, e.v}:
                raise MalformedBatch(f"edge id {unit.eid} does not join {unit.u} and {unit.v}")
        else:
            if unit.u not in g.vertices or unit.v not in g.vertices:
                raise MalformedBatch(f"no edge {unit.u}-{unit.v}")
            between = g.edges_between(unit.u, unit.v)
            if not between:
                raise MalformedBatch(f"no edge {unit.u}-{unit.v}")
            e = between[0]
        g.remove_edge(e.eid)
        return Unit(kind, e.u, e.v, e.length, e.eid)
    if kind is UpdateKind.ADD_WEIGHT:
        if unit.u not in g.vertices:
            raise MalformedBatch(f"weight on missing vertex {unit.u}")
        if unit.value < 1:
            raise MalformedBatch(f"node-weighting increment must be positive, got {unit.value}")
        g.weights[unit.u] = g.weights.get(unit.u, 0) + unit.value
        return unit
    if kind is UpdateKind.ADD_TERMINAL:
        if unit.u not in g.vertices:
            raise MalformedBatch(f"terminal {unit.u} is not a vertex")
        if unit.u in g.terminals:
            raise MalformedBatch(f"vertex {unit.u} is already a terminal")
        g.terminals.add(unit.u)
        return unit
    if kind is UpdateKind.DEL_TERMINAL:
        if unit.u not in g.terminals:
            raise MalformedBatch(f"vertex {unit.u} is not a terminal")
        g.terminals.discard(unit.u)
        return unit
    raise MalformedBatch(f"unknown update kind {kind!r}")


def apply_units_inplace(g: DynGraph, units: Iterable[Unit]) -> list[Unit]:
    """Apply a mixed batch to `g` itself; returns the realized units."""
    realized: list[Unit] = []
    for batch in split_batch(units):
        for unit in batch.units:
            done = _apply_unit(g, unit)
            if done is not None:
                realized.append(done)
    g.epoch += 1
    g.log.append(tuple(realized))
    return realized


def apply_batch(g: DynGraph, batch: Batch | Iterable[Unit]) -> tuple[DynGraph, list[Unit]]:
    """Pure batch application: returns (g at epoch+1, realized units).

    Edge insertions come back with their assigned edge ids; edge deletions
    name the concrete edge removed (the smallest-id u–v edge unless the unit
    carries an id).
    """
    units = batch.units if isinstance(batch, Batch) else tuple(batch)
    out = g.copy()
    realized = apply_units_inplace(out, units)
    logger.debug("epoch %d: applied %d units", out.epoch, len(realized))
    return out, realized


# ═══════════════════════════════════════════════════════════════
# Shortest paths
# ═══════════════════════════════════════════════════════════════

def cut_length(g: DynGraph, e: Edge, cut: Optional[Mapping[int, int]] = None) -> int:
    if cut:
        return e.length + cut.get(e.eid, 0)
    return e.length


def dijkstra(
    g: DynGraph,
    sources: Iterable[int] | Mapping[int, float],
    cut: Optional[Mapping[int, int]] = None,
    bound: Optional[float] = None,
    skip: Optional[Container[int]] = None,
    extra: Optional[Mapping[int, int]] = None,
) -> tuple[dict[int, float], dict[int, tuple[int, int]]]:
    """Multi-source Dijkstra in G−C (−extra), optionally skipping edge ids.

    Returns (dist, parent) where parent[v] = (previous vertex, edge id).
    Vertices beyond `bound` are left out of `dist`.
    """
    if isinstance(sources, Mapping):
        start = dict(sources)
    else:
        start = {s: 0 for s in sources}
    dist: dict[int, float] = {}
    parent: dict[int, tuple[int, int]] = {}
    best: dict[int, float] = {}
    heap: list[tuple[float, int]] = []
    for s, d0 in start.items():
        if s not in g.vertices:
            raise UnknownVertex(f"vertex {s} is not in the graph")
        best[s] = d0
        heapq.heappush(heap, (d0, s))
    while heap:
        d, x = heapq.heappop(heap)
        if x in dist or d > best.get(x, INF):
            continue
        if bound is not None and d > bound:
            break
        dist[x] = d
        for eid in sorted(g.adj[x]):
            if skip is not None and eid in skip:
                continue
            e = g.edges[eid]
            y = e.other(x)
            if y in dist:
                continue
            w = e.length
            if cut:
                w += cut.get(eid, 0)
            if extra:
                w += extra.get(eid, 0)
            nd = d + w
            if nd < best.get(y, INF):
                best[y] = nd
                parent[y] = (x, eid)
                heapq.heappush(heap, (nd, y))
    parent = {v: p for v, p in parent.items() if v in dist}
    return dist, parent


def dist_exact(g: DynGraph, u: int, v: int, cut: Optional[Mapping[int, int]] = None) -> float:
    """Exact dist_{G−C}(u, v); math.inf when disconnected."""
    for x in (u, v):
        if x not in g.vertices:
            raise UnknownVertex(f"vertex {x} is not in the graph")
    if u == v:
        return 0
    dist, _ = dijkstra(g, [u], cut)
    return dist.get(v, INF)


def _trace_back(parent: Mapping[int, tuple[int, int]], sources: Container[int], v: int) -> "Walk":
    vertices = [v]
    eids: list[int] = []
    while vertices[-1] not in sources:
        prev, eid = parent[vertices[-1]]
        eids.append(eid)
        vertices.append(prev)
    return Walk(tuple(reversed(vertices)), tuple(reversed(eids)))


def shortest_path(
    g: DynGraph,
    u: int,
    v: int,
    cut: Optional[Mapping[int, int]] = None,
    skip: Optional[Container[int]] = None,
    bound: Optional[float] = None,
) -> Optional["Walk"]:
    dist, parent = dijkstra(g, [u], cut, bound=bound, skip=skip)
    if v not in dist:
        return None
    return _trace_back(parent, {u}, v)


def path_from_tree(parent: Mapping[int, tuple[int, int]], sources: Container[int], v: int) -> "Walk":
    return _trace_back(parent, sources, v)


# ═══════════════════════════════════════════════════════════════
# Walks
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Walk:
    vertices: tuple[int, ...]
    eids: tuple[int, ...] = ()

    @classmethod
    def trivial(cls, v: int) -> "Walk":
        return cls((v,), ())

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    @property
    def hops(self) -> int:
        return len(self.eids)

    def length(self, g: DynGraph, cut: Optional[Mapping[int, int]] = None) -> int:
        total = 0
        for eid in self.eids:
            e = g.edges.get(eid)
            if e is None:
                raise NotAPath(f"edge {eid} is not in the graph")
            total += cut_length(g, e, cut)
        return total

    def validate(self, g: DynGraph) -> None:
        if len(self.vertices) != len(self.eids) + 1:
            raise NotAPath("vertex and edge counts do not line up")
        for i, eid in enumerate(self.eids):
            e = g.edges.get(eid)
            if e is None:
                raise NotAPath(f"edge {eid} is not in the graph")
            a, b = self.vertices[i], self.vertices[i + 1]
            if {a, b} != {e.u, e.v}:
                raise NotAPath(f"edge {eid} does not join {a} and {b}")
        for v in self.vertices:
            if v not in g.vertices:
                raise NotAPath(f"vertex {v} is not in the graph")

    def is_valid(self, g: DynGraph) -> bool:
        try:
            self.validate(g)
        except NotAPath:
            return False
        return True

    def is_simple(self) -> bool:
        return len(set(self.vertices)) == len(self.vertices)

    def reverse(self) -> "Walk":
        return Walk(tuple(reversed(self.vertices)), tuple(reversed(self.eids)))

    def concat(self, other: "Walk") -> "Walk":
        if self.end != other.start:
            raise NotAPath(f"cannot join walk ending at {self.end} to one starting at {other.start}")
        return Walk(self.vertices + other.vertices[1:], self.eids + other.eids)

    def simple_subpath(self) -> "Walk":
        """Loop-erase: the result is simple, uses a subset of the edges, same endpoints."""
        vertices = [self.vertices[0]]
        eids: list[int] = []
        pos = {self.vertices[0]: 0}
        for i, eid in enumerate(self.eids):
            v = self.vertices[i + 1]
            if v in pos:
                k = pos[v]
                for w in vertices[k + 1:]:
                    del pos[w]
                del vertices[k + 1:]
                del eids[k:]
            else:
                eids.append(eid)
                pos[v] = len(vertices)
                vertices.append(v)
        return Walk(tuple(vertices), tuple(eids))


def concat_walks(walks: Sequence[Walk]) -> Walk:
    out = walks[0]
    for w in walks[1:]:
        out = out.concat(w)
    return out


# ═══════════════════════════════════════════════════════════════
# Moving cuts and landmarks
# ═══════════════════════════════════════════════════════════════

def add_cuts(*cuts: Optional[Mapping[int, int]]) -> MovingCut:
    out: MovingCut = {}
    for cut in cuts:
        if not cut:
            continue
        for eid, c in cut.items():
            if c:
                out[eid] = out.get(eid, 0) + c
    return out


def cut_size(cut: Mapping[int, int]) -> int:
    return sum(cut.values())


def restrict_cut(cut: Mapping[int, int], g: DynGraph) -> MovingCut:
    """Drop cut entries on edges that no longer exist."""
    return {eid: c for eid, c in cut.items() if c and eid in g.edges}


@dataclass
class LandmarkSet:
    landmarks: set[int]
    sigma: float


def landmark_violations(
    g: DynGraph,
    cut: Mapping[int, int],
    landmarks: Iterable[int],
    sigma: float,
    base: Optional[Mapping[int, int]] = None,
) -> list[int]:
    """Cut edges whose landmark condition fails, checked in G−base−C."""
    L = set(landmarks) & g.vertices
    full = add_cuts(base, cut)
    dist, _ = dijkstra(g, L, full, bound=sigma) if L else ({}, {})
    bad: list[int] = []
    for eid in sorted(cut):
        if not cut[eid] or eid not in g.edges:
            continue
        e = g.edges[eid]
        if e.length + full.get(eid, 0) > sigma:
            if e.u not in L or e.v not in L:
                bad.append(eid)
        elif dist.get(e.u, INF) > sigma or dist.get(e.v, INF) > sigma:
            bad.append(eid)
    return bad


def verify_landmarks(
    g: DynGraph,
    cut: Mapping[int, int],
    L: LandmarkSet,
    base: Optional[Mapping[int, int]] = None,
) -> bool:
    """Landmark condition for `cut` on G (or on G−base when base is given)."""
    return not landmark_violations(g, cut, L.landmarks, L.sigma, base)


def union_landmarks(L1: LandmarkSet, L2: LandmarkSet) -> LandmarkSet:
    """L1 for C1 on G, L2 for C2 on G−C1 → landmarks of C1+C2 with σ1+σ2."""
    return LandmarkSet(set(L1.landmarks) | set(L2.landmarks), L1.sigma + L2.sigma)


def landmarks_after_deletion(L: LandmarkSet, deleted: Iterable[Edge]) -> LandmarkSet:
    """Landmarks stay valid on G\\F once V(F) joins them."""
    out = set(L.landmarks)
    for e in deleted:
        out.add(e.u)
        out.add(e.v)
    return LandmarkSet(out, L.sigma)


def greedy_landmarks(
    g: DynGraph,
    cut: Mapping[int, int],
    sigma: float,
    base: Optional[Mapping[int, int]] = None,
    initial: Iterable[int] = (),
) -> set[int]:
    """Smallest-effort valid landmark set containing `initial`.

    Long cut edges contribute both endpoints; short ones add an endpoint only
    when no current landmark lies within σ of it.
    """
    L = set(initial) & g.vertices
    full = add_cuts(base, cut)
    short: list[Edge] = []
    for eid in sorted(cut):
        if not cut[eid] or eid not in g.edges:
            continue
        e = g.edges[eid]
        if e.length + full.get(eid, 0) > sigma:
            L.update(e.ends)
        else:
            short.append(e)
    if short:
        dist, _ = dijkstra(g, L, full, bound=sigma) if L else ({}, {})
        for e in short:
            for x in e.ends:
                if dist.get(x, INF) > sigma and x not in L:
                    L.add(x)
    return L


# ═══════════════════════════════════════════════════════════════
# Node weightings, demands and flows
# ═══════════════════════════════════════════════════════════════

def nodes_of(weights: Mapping[int, int]) -> list[Node]:
    """Virtual nodes (v, i) for i < A(v), ascending."""
    return [(v, i) for v in sorted(weights) for i in range(weights[v])]


def weighting_size(weights: Mapping[int, int]) -> int:
    return sum(weights.values())


def is_respecting(demand: Mapping[tuple[int, int], float], weights: Mapping[int, int]) -> bool:
    load: dict[int, float] = {}
    for (a, b), val in demand.items():
        if val < 0:
            return False
        load[a] = load.get(a, 0) + val
        load[b] = load.get(b, 0) + val
    return all(load[v] <= weights.get(v, 0) + 1e-9 for v in load)


def is_h_length(g: DynGraph, demand: Mapping[tuple[int, int], float], h: float) -> bool:
    return all(val <= 0 or dist_exact(g, a, b) <= h for (a, b), val in demand.items())


def edge_loads(flow: Iterable[tuple[Walk, float]]) -> dict[int, float]:
    loads: dict[int, float] = {}
    for walk, val in flow:
        for eid in walk.eids:
            loads[eid] = loads.get(eid, 0.0) + val
    return loads


def congestion(flow: Iterable[tuple[Walk, float]]) -> float:
    loads = edge_loads(flow)
    return max(loads.values(), default=0.0)


__all__ = [
    "FRESH_BASE",
    "INF",
    "Batch",
    "DynGraph",
    "Edge",
    "LandmarkSet",
    "MovingCut",
    "Node",
    "NodeWeighting",
    "Unit",
    "UpdateKind",
    "VertexPool",
    "Walk",
    "add_cuts",
    "apply_batch",
    "apply_units_inplace",
    "concat_walks",
    "congestion",
    "cut_length",
    "cut_size",
    "dijkstra",
    "dist_exact",
    "edge_loads",
    "greedy_landmarks",
    "is_h_length",
    "is_respecting",
    "landmark_violations",
    "landmarks_after_deletion",
    "nodes_of",
    "path_from_tree",
    "restrict_cut",
    "shortest_path",
    "split_batch",
    "union_landmarks",
    "verify_landmarks",
    "weighting_size",
]
