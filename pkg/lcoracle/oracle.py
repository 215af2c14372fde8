"""lcoracle.oracle — distance queries on top of hierarchies and stacked graphs.

- `LowDistOracle` answers CLOSE/FAR for one threshold h by climbing an
  expander hierarchy: at level k it looks for a ball-cover cluster of v_k
  containing u_k, and otherwise hops both endpoints to landmarks and moves up.
  CLOSE pairs get a path by walking the same levels back down. Pairs the
  climb cannot settle are answered by a search in G bounded by h.
- `OracleStack` keeps one low-distance oracle per (stacked graph G_x,
  threshold 2^y). A query takes the first G_x whose largest threshold says
  CLOSE, binary-searches the threshold, and reports d̃ = h^x·2^y·A_cfg where
  A_cfg composes the stretch records of that oracle and the stacking steps
  below it. Records are updated with the reported path first, so the path
  length never exceeds d̃ and d̃ is never below the true distance.
- `SimplePathOracle` adds oracles on length-perturbed copies of G (each
  length ℓ + d/L scaled by L, rounded up and doubled) and returns loop-free
  paths.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Optional

from lcoracle.brute import all_pairs
from lcoracle.emulator import StackChain
from lcoracle.errors import QueryWasFar, UnknownVertex
from lcoracle.graph import INF, DynGraph, Unit, UpdateKind, Walk, concat_walks, dijkstra, path_from_tree, shortest_path
from lcoracle.hierarchy import ExpanderHierarchy
from lcoracle.params import DEFAULT_PARAMS, GlobalParams
from lcoracle.schedule import DigitScheduler, FullyDynWrapper, RotatingScheduler

logger = logging.getLogger(__name__)


class Answer(str, Enum):
    CLOSE = "CLOSE"
    FAR = "FAR"


@dataclass(frozen=True)
class Hop:
    """Landmark hop at level k: u_k → u_{k+1} through cluster cu, same for v."""

    k: int
    u: int
    v: int
    cu: int
    u_next: int
    cv: int
    v_next: int


@dataclass
class Trace:
    answer: Answer
    level: int
    cid: Optional[int]
    hops: list[Hop] = field(default_factory=list)
    touches: int = 0
    walk: Optional[Walk] = None


# ═══════════════════════════════════════════════════════════════
# Low-distance oracle
# ═══════════════════════════════════════════════════════════════

class LowDistOracle:
    """CLOSE/FAR at threshold h, with a stretch record over every reported path.

    FAR comes from the hierarchy only when level 1 is cut-free, where the
    cover alone decides. Pairs the climb cannot settle (a cut top, a missing
    landmark, no meeting above a hop) are settled by a search in G bounded by h.
    """

    def __init__(self, hier: ExpanderHierarchy) -> None:
        self.hier = hier
        self.traces: dict[tuple[int, int], Trace] = {}
        self.touches = 0
        self.searches = 0
        self.stretch = 0.0

    @classmethod
    def create(cls, g: DynGraph, h: int, phi: float, params: GlobalParams = DEFAULT_PARAMS) -> "LowDistOracle":
        return cls(ExpanderHierarchy.create(g, phi, params, h=h))

    @property
    def g(self) -> DynGraph:
        return self.hier.g

    @property
    def h(self) -> int:
        return self.hier.h

    def step(self, units: Iterable[Unit]) -> None:
        self.hier.step(units)
        self.traces.clear()

    @staticmethod
    def _hop(cover, x: int) -> Optional[tuple[int, int]]:
        for cid in cover.ball_of_vertex(x):
            lm = cover.l_vertex(cid)
            if lm is not None:
                return cid, lm
        return None

    def query(self, u: int, v: int) -> Answer:
        for x in (u, v):
            if x not in self.g.vertices:
                raise UnknownVertex(f"vertex {x} is not in the graph")
        trace = self._climb(u, v)
        self.traces[(u, v)] = trace
        self.touches += trace.touches
        return trace.answer

    def _climb(self, u: int, v: int) -> Trace:
        if u == v:
            return Trace(Answer.CLOSE, 1, None)
        uk, vk = u, v
        hops: list[Hop] = []
        touches = 0
        for level in self.hier.levels:
            cover = level.ed.cover
            ball = cover.ball_of_vertex(vk)
            touches += len(ball)
            if uk == vk:
                return Trace(Answer.CLOSE, level.k, None, hops, touches)
            for cid in ball:
                if cover.membership(cid, uk):
                    return Trace(Answer.CLOSE, level.k, cid, hops, touches)
            if not level.ed.cut and not hops:
                return Trace(Answer.FAR, level.k, None, hops, touches)
            if not level.ed.cut or level.sparsifier is None:
                break
            hu, hv = self._hop(cover, uk), self._hop(cover, vk)
            if hu is None or hv is None:
                break
            hops.append(Hop(level.k, uk, vk, hu[0], hu[1], hv[0], hv[1]))
            uk, vk = hu[1], hv[1]
        return self._search(u, v, touches)

    def _search(self, u: int, v: int, touches: int) -> Trace:
        dist, parent = dijkstra(self.g, [u], bound=self.h)
        self.searches += 1
        touches += len(dist)
        if v not in dist:
            return Trace(Answer.FAR, len(self.hier.levels), None, [], touches)
        return Trace(Answer.CLOSE, 1, None, [], touches, walk=path_from_tree(parent, {u}, v))

    def _piece(self, k: int, cid: int, a: int, b: int) -> Walk:
        if a == b:
            return Walk.trivial(a)
        return self.hier.cluster_path(k, cid, a, b)

    def path(self, u: int, v: int) -> Walk:
        """u–v walk in G for a pair whose last query said CLOSE."""
        trace = self.traces.get((u, v))
        if trace is None:
            self.query(u, v)
            trace = self.traces[(u, v)]
        if trace.answer is Answer.FAR:
            raise QueryWasFar(f"query ({u}, {v}) was FAR at threshold {self.h}")
        if u == v:
            return Walk.trivial(u)
        walk = trace.walk if trace.walk is not None else self._unwind(trace, u, v)
        walk.validate(self.g)
        self.stretch = max(self.stretch, walk.length(self.g) / self.h)
        return walk

    def _unwind(self, trace: Trace, u: int, v: int) -> Walk:
        if trace.hops:
            last = trace.hops[-1]
            top_u, top_v = last.u_next, last.v_next
        else:
            top_u, top_v = u, v
        walk = self._piece(trace.level, trace.cid, top_u, top_v) if trace.cid is not None else Walk.trivial(top_u)
        for hop in reversed(trace.hops):
            walk = self.hier.unfold(hop.k, walk) if walk.hops else Walk.trivial(hop.u_next)
            walk = concat_walks([
                self._piece(hop.k, hop.cu, hop.u, hop.u_next),
                walk,
                self._piece(hop.k, hop.cv, hop.v_next, hop.v),
            ])
        return walk

    def audit(self) -> dict:
        """Every pair: FAR only above h, and CLOSE paths measured against h."""
        verts = sorted(self.g.vertices)
        dist = all_pairs(self.g, cap=self.hier.params.dijkstra_cap) if verts else {}
        alpha = 0.0
        far_violations: list[tuple[int, int]] = []
        bad_paths: list[tuple[int, int]] = []
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                d = dist[u].get(v, INF)
                if self.query(u, v) is Answer.FAR:
                    if d <= self.h:
                        far_violations.append((u, v))
                    continue
                walk = self.path(u, v)
                if (walk.start, walk.end) != (u, v) or not walk.is_valid(self.g):
                    bad_paths.append((u, v))
                    continue
                alpha = max(alpha, walk.length(self.g) / self.h)
        return {
            "alpha_ldo": alpha,
            "alpha_record": self.stretch,
            "far_violations": far_violations[:10],
            "bad_paths": bad_paths[:10],
            "touches": self.touches,
            "searches": self.searches,
            "ok": not far_violations and not bad_paths and alpha <= self.stretch,
        }


# ═══════════════════════════════════════════════════════════════
# Stacked oracle
# ═══════════════════════════════════════════════════════════════

@dataclass
class Estimate:
    u: int
    v: int
    d: Optional[int]
    x: Optional[int] = None
    y: Optional[int] = None
    scale: Optional[int] = None
    path: Optional[Walk] = None
    fallback: bool = False
    a_cfg: Optional[float] = None

    @property
    def disconnected(self) -> bool:
        return self.d is None

    def as_dict(self) -> dict:
        return {
            "u": self.u,
            "v": self.v,
            "d": self.d,
            "x": self.x,
            "y": self.y,
            "scale": self.scale,
            "a_cfg": self.a_cfg,
            "path": list(self.path.vertices) if self.path is not None else None,
            "fallback": self.fallback,
        }


class OracleStack:
    """Online-batch oracle: a stacking chain plus per-threshold low-distance oracles."""

    def __init__(self, chain: StackChain, ldos: list[list[LowDistOracle]], h: int) -> None:
        self.chain = chain
        self.ldos = ldos
        self.h = h
        self.fallbacks = 0
        self.nonmonotone = 0

    @classmethod
    def create(
        cls,
        g: DynGraph,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        h: Optional[int] = None,
        depth: Optional[int] = None,
    ) -> "OracleStack":
        h = h or params.stack_h
        chain = StackChain.create(g, phi, params, h=h, depth=depth)
        ybar = math.ceil(math.log2(h)) + 1
        ldos = [[LowDistOracle.create(G, 2 ** y, phi, params) for y in range(ybar + 1)] for G in chain.graphs]
        logger.info("oracle stack: %d graphs × %d thresholds", len(ldos), ybar + 1)
        return cls(chain, ldos, h)

    @property
    def g(self) -> DynGraph:
        return self.chain.g

    @property
    def ybar(self) -> int:
        return len(self.ldos[0]) - 1

    def step(self, units: Iterable[Unit]) -> list[list[Unit]]:
        outs = self.chain.step(units)
        for x, row in enumerate(self.ldos):
            for ldo in row:
                ldo.step(outs[x])
        return outs

    def _first_close(self, x: int, u: int, v: int) -> int:
        row = self.ldos[x]
        lo, hi = 0, self.ybar
        while lo < hi:
            mid = (lo + hi) // 2
            if row[mid].query(u, v) is Answer.CLOSE:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def a_cfg(self, x: int, y: int) -> float:
        """Composed stretch record of the (G_x, 2^y) oracle and every stacking step below G_x."""
        a = self.ldos[x][y].stretch
        for stk in self.chain.stacks[:x]:
            a *= stk.stretch
        return a

    def query(self, u: int, v: int) -> Estimate:
        """d̃ = ⌈h^x·2^y·A_cfg⌉ for the first CLOSE (x, y), so the reported path never exceeds d̃."""
        for w in (u, v):
            if w not in self.g.vertices:
                raise UnknownVertex(f"vertex {w} is not in the graph")
        if u == v:
            return Estimate(u, v, 0, 0, 0, 1, Walk.trivial(u), a_cfg=1.0)
        for x, row in enumerate(self.ldos):
            if row[-1].query(u, v) is Answer.CLOSE:
                y = self._first_close(x, u, v)
                walk = self.chain.unfold(x, row[y].path(u, v))
                scale = self.h ** x * 2 ** y
                a = self.a_cfg(x, y)
                d = max(math.ceil(scale * a), walk.length(self.g))
                return Estimate(u, v, d, x, y, scale, walk, a_cfg=a)
        return self._fallback(u, v)

    def _fallback(self, u: int, v: int) -> Estimate:
        """No threshold says CLOSE: search the last stacked graph, then G itself."""
        x = len(self.ldos) - 1
        walk = shortest_path(self.chain.graphs[x], u, v)
        if walk is not None:
            walk = self.chain.unfold(x, walk)
        else:
            walk = shortest_path(self.g, u, v)
            if walk is None:
                return Estimate(u, v, None)
            logger.warning("query (%d, %d) is connected in G but not in the last stacked graph", u, v)
        self.fallbacks += 1
        logger.debug("query (%d, %d) fell back to an exact search", u, v)
        return Estimate(u, v, walk.length(self.g), x, None, None, walk, fallback=True)

    def path(self, u: int, v: int) -> Optional[Walk]:
        return self.query(u, v).path

    def audit(self) -> dict:
        """Sandwich dist ≤ d̃ ≤ α·dist over all pairs, exact connectivity, paths within d̃."""
        verts = sorted(self.g.vertices)
        dist = all_pairs(self.g) if verts else {}
        alpha = 1.0
        unsound: list[tuple[int, int]] = []
        connectivity: list[tuple[int, int]] = []
        exceeded: list[tuple[int, int]] = []
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                d = dist[u].get(v, INF)
                est = self.query(u, v)
                if est.disconnected != (d == INF):
                    connectivity.append((u, v))
                    continue
                if est.disconnected:
                    continue
                assert est.path is not None
                if est.d < d or not est.path.is_valid(self.g) or (est.path.start, est.path.end) != (u, v):
                    unsound.append((u, v))
                    continue
                if est.path.length(self.g) > est.d:
                    exceeded.append((u, v))
                alpha = max(alpha, est.d / d)
        return {
            "alpha": alpha,
            "a_cfg": max((self.a_cfg(x, y) for x in range(len(self.ldos)) for y in range(self.ybar + 1)), default=0.0),
            "unsound": unsound[:10],
            "connectivity": connectivity[:10],
            "exceeded": exceeded[:10],
            "fallbacks": self.fallbacks,
            "ok": not unsound and not connectivity and not exceeded,
        }


# ═══════════════════════════════════════════════════════════════
# Simple paths
# ═══════════════════════════════════════════════════════════════

def perturbed_length(length: int, d: int, L: int) -> int:
    """ℓ + d/L scaled by L, rounded up and doubled."""
    return 2 * math.ceil((length + Fraction(d, L)) * L)


def perturbed(g: DynGraph, d: int, L: int) -> DynGraph:
    """G with every length ℓ replaced by `perturbed_length(ℓ, d, L)`, edge ids kept."""
    out = DynGraph(max_len=perturbed_length(g.max_len, d, L), pool=g.pool)
    for v in sorted(g.vertices):
        out.add_vertex(v)
    for eid in sorted(g.edges):
        e = g.edges[eid]
        out.add_edge(e.u, e.v, perturbed_length(e.length, d, L), eid=eid)
    out.next_eid = g.next_eid
    out.retired = set(g.retired)
    out.terminals = set(g.terminals)
    return out


class SimplePathOracle:
    """Oracle grid over length-perturbed copies of G for loop-free path reports.

    Grid oracles are built on first use from the current graph and then follow
    every later batch.
    """

    def __init__(self, base: OracleStack, phi: float, params: GlobalParams, *, alpha: int = 2) -> None:
        self.base = base
        self.phi = phi
        self.params = params
        self.alpha = alpha
        n = max(base.g.n, 2)
        self.step_base = max(2, math.ceil(n ** params.eps))
        self.zbar = math.ceil(1 / params.eps) + 1
        self.grid: dict[tuple[int, int], OracleStack] = {}
        self.phases: list[int] = []

    @classmethod
    def create(cls, g: DynGraph, phi: float, params: GlobalParams = DEFAULT_PARAMS, *, alpha: int = 2) -> "SimplePathOracle":
        return cls(OracleStack.create(g, phi, params), phi, params, alpha=alpha)

    @property
    def g(self) -> DynGraph:
        return self.base.g

    def L(self, z: int) -> int:
        return self.step_base ** z

    def step(self, units: Iterable[Unit]) -> None:
        realized = self.base.step(units)[0]
        for (y, z), stack in self.grid.items():
            stack.step([self._lift(u, y, z) for u in realized])

    def _lift(self, unit: Unit, y: int, z: int) -> Unit:
        if unit.kind is UpdateKind.ADD_EDGE:
            return Unit(unit.kind, unit.u, unit.v, perturbed_length(unit.value, 2 ** y, self.L(z)), unit.eid)
        return unit

    def _oracle(self, y: int, z: int) -> OracleStack:
        stack = self.grid.get((y, z))
        if stack is None:
            stack = OracleStack.create(perturbed(self.g, 2 ** y, self.L(z)), self.phi, self.params)
            self.grid[(y, z)] = stack
        return stack

    def path(self, u: int, v: int) -> Optional[Walk]:
        est = self.base.query(u, v)
        if est.disconnected:
            return None
        if u == v:
            return Walk.trivial(u)
        d = est.d
        for z in range(1, self.zbar + 1):
            target = d * (10 * self.alpha) ** (self.zbar - z)
            y = max(0, math.ceil(math.log2(target)))
            stack = self._oracle(y, z)
            walk = stack.path(u, v)
            if walk is None:
                continue
            if walk.length(stack.g) <= 2 * (2 * self.alpha * 2 ** y * self.L(z)):
                self.phases.append(z)
                out = Walk(walk.vertices, walk.eids).simple_subpath()
                out.validate(self.g)
                return out
        self.phases.append(0)
        assert est.path is not None
        return est.path.simple_subpath()


# ═══════════════════════════════════════════════════════════════
# Operation wrappers
# ═══════════════════════════════════════════════════════════════

def ldo_query(o: LowDistOracle, u: int, v: int) -> Answer:
    return o.query(u, v)


def ldo_path(o: LowDistOracle, u: int, v: int) -> Walk:
    return o.path(u, v)


def obo_query(stack: OracleStack, u: int, v: int) -> Optional[int]:
    """d̃, or None when u and v are disconnected."""
    return stack.query(u, v).d


def obo_path(stack: OracleStack, u: int, v: int) -> Optional[Walk]:
    return stack.path(u, v)


def simple_path(o: SimplePathOracle, u: int, v: int) -> Optional[Walk]:
    return o.path(u, v)


def oracle_wrapper(
    g: DynGraph,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    scheduler: Optional[DigitScheduler] = None,
) -> FullyDynWrapper:
    """Fully dynamic oracle: rotating instances by default, sensitivity n²."""

    def factory(current: DynGraph) -> OracleStack:
        return OracleStack.create(current, phi, params)

    scheduler = scheduler or RotatingScheduler.for_sensitivity(max(g.n, 2) ** 2, params.xi)
    return FullyDynWrapper(factory, g, scheduler)


def fully_dynamic(
    g: DynGraph,
    stream: Iterable[Unit],
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    scheduler: Optional[DigitScheduler] = None,
) -> Iterator[tuple[Unit, OracleStack]]:
    """Yield (unit, designated oracle) after every unit update."""
    wrapper = oracle_wrapper(g, phi, params, scheduler=scheduler)
    for unit in stream:
        yield unit, wrapper.update(unit)  # type: ignore[misc]


def query_line(u: int, v: int, d: Optional[int], exact: float) -> str:
    """`Q u v -> d̃ exact=d ratio=r`, with DISCONNECTED and inf spelled out."""
    shown = "DISCONNECTED" if d is None else str(d)
    exact_s = "inf" if exact == INF else str(int(exact))
    if d is None or exact in (0, INF):
        ratio = "1" if (d is None) == (exact == INF) else "-"
    else:
        ratio = f"{d / exact:.3f}"
    return f"Q {u} {v} -> {shown} exact={exact_s} ratio={ratio}"


__all__ = [
    "Answer",
    "Estimate",
    "Hop",
    "LowDistOracle",
    "OracleStack",
    "SimplePathOracle",
    "Trace",
    "fully_dynamic",
    "ldo_path",
    "ldo_query",
    "obo_path",
    "obo_query",
    "oracle_wrapper",
    "perturbed",
    "perturbed_length",
    "query_line",
    "simple_path",
]
