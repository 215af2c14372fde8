"""lcoracle.emulator — length-reducing emulators and the stacking transform.

An emulator Q of G at scale h is a unit-length graph: one star per cluster of
every hierarchy level, restricted to the vertices of G, with a fresh center.
An edge of length at most h whose endpoints share no star gets a two-member
bridge star, so a path of such edges never falls apart in Q. Pairs within h
in G end up a few hops apart in Q, and a hop in Q costs at most the cluster's
certified diameter in G.

Stacking adds back the long edges: G_stk = Q ∪ {e : ℓ(e) ≥ h/3} with those
edges at length ⌈ℓ(e)/h⌉. A `StackChain` repeats this, G_{x+1} = stk(G_x),
so distances shrink by roughly h per step.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Iterator, Optional

from lcoracle.brute import all_pairs
from lcoracle.errors import NotAPath
from lcoracle.graph import (
    FRESH_BASE,
    INF,
    DynGraph,
    Unit,
    UpdateKind,
    Walk,
    apply_units_inplace,
    concat_walks,
)
from lcoracle.hierarchy import ExpanderHierarchy
from lcoracle.params import DEFAULT_PARAMS, GlobalParams

logger = logging.getLogger(__name__)

# (level k, era of that level's ED, cluster id); bridges are (0, 0, edge id)
QStarKey = tuple[int, int, int]

BRIDGE_LEVEL = 0


# ═══════════════════════════════════════════════════════════════
# Emulator
# ═══════════════════════════════════════════════════════════════

class Emulator:
    """Unit-length star union over the hierarchy's covers, synced after every batch."""

    def __init__(self, hier: ExpanderHierarchy, h: int) -> None:
        self.hier = hier
        self.h = h
        self.Q = DynGraph(max_len=hier.g.max_len, pool=hier.g.pool)
        self.centers: dict[QStarKey, int] = {}
        self.star_edges: dict[tuple[QStarKey, int], int] = {}
        self.center_key: dict[int, QStarKey] = {}
        self._eds: dict[int, object] = {}
        self.era: dict[int, int] = {}
        self.history: list[dict] = []

    @classmethod
    def create(cls, g: DynGraph, h: int, phi: float, params: GlobalParams = DEFAULT_PARAMS) -> "Emulator":
        hier = ExpanderHierarchy.create(g, phi, params, h=h)
        em = cls(hier, h)
        em.sync()
        logger.info("emulator at h=%d: |Q|=%d over %d levels", h, em.Q.size(), len(hier.levels))
        return em

    @property
    def g(self) -> DynGraph:
        return self.hier.g

    def step(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one batch on G; returns the realized batch on Q."""
        self.hier.step(units)
        out = self.sync()
        self.history.append({"epoch": self.g.epoch, "recourse": len(out), "size": self.Q.size()})
        return out

    def _desired(self) -> dict[QStarKey, set[int]]:
        stars: dict[QStarKey, set[int]] = {}
        for level in self.hier.levels:
            if self._eds.get(level.k) is not level.ed:
                self._eds[level.k] = level.ed
                self.era[level.k] = self.era.get(level.k, -1) + 1
            era = self.era[level.k]
            for cid, cluster in level.ed.cover.clusters.items():
                members = set(cluster.vertices()) & self.g.vertices
                if len(members) >= 2:
                    stars[(level.k, era, cid)] = members
        stars.update(self._bridges(stars))
        return stars

    def _bridges(self, stars: dict[QStarKey, set[int]]) -> dict[QStarKey, set[int]]:
        star_of: dict[int, set[QStarKey]] = {}
        for key, members in stars.items():
            for v in members:
                star_of.setdefault(v, set()).add(key)
        bridges: dict[QStarKey, set[int]] = {}
        for eid in sorted(self.g.edges):
            e = self.g.edges[eid]
            if e.length > self.h or e.u == e.v:
                continue
            if star_of.get(e.u, set()) & star_of.get(e.v, set()):
                continue
            bridges[(BRIDGE_LEVEL, 0, eid)] = {e.u, e.v}
        return bridges

    def sync(self) -> list[Unit]:
        stars = self._desired()
        vertices = self.g.vertices
        adds_v = [Unit(UpdateKind.ADD_VERTEX, v) for v in sorted(vertices - self.Q.vertices)]
        centers = {key: c for key, c in self.centers.items() if key in stars}
        for key in sorted(stars):
            if key not in centers:
                centers[key] = self.g.pool.fresh()
                adds_v.append(Unit(UpdateKind.ADD_VERTEX, centers[key]))
        adds_e: list[Unit] = []
        refs: list[tuple[QStarKey, int]] = []
        for key in sorted(stars):
            for v in sorted(stars[key]):
                if (key, v) not in self.star_edges:
                    adds_e.append(Unit(UpdateKind.ADD_EDGE, v, centers[key], 1))
                    refs.append((key, v))
        dead = [sk for sk in sorted(self.star_edges) if sk[0] not in stars or sk[1] not in stars[sk[0]]]
        dels = []
        for sk in dead:
            e = self.Q.edges[self.star_edges[sk]]
            dels.append(Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=e.eid))
        gone = [Unit(UpdateKind.DEL_VERTEX, c) for key, c in sorted(self.centers.items()) if key not in stars]
        gone += [
            Unit(UpdateKind.DEL_VERTEX, v)
            for v in sorted(self.Q.vertices - vertices)
            if v not in self.center_key
        ]
        units = adds_v + adds_e + dels + gone
        self.centers = centers
        self.center_key = {c: key for key, c in centers.items()}
        if not units:
            return []
        realized = apply_units_inplace(self.Q, units)
        added = [u for u in realized if u.kind is UpdateKind.ADD_EDGE]
        for ref, u in zip(refs, added):
            self.star_edges[ref] = u.eid
        for sk in dead:
            del self.star_edges[sk]
        return realized

    # ── paths ──

    def unfold(self, walk: Walk) -> Walk:
        """Map a Q walk between vertices of G to a walk in G."""
        walk.validate(self.Q)
        for x in (walk.start, walk.end):
            if x not in self.g.vertices:
                raise NotAPath(f"vertex {x} is not a vertex of G")
        pieces = [Walk.trivial(walk.start)]
        for i in range(0, walk.hops, 2):
            if i + 1 >= walk.hops:
                raise NotAPath("walk stops at a star center")
            a, c, b = walk.vertices[i], walk.vertices[i + 1], walk.vertices[i + 2]
            key = self.center_key.get(c)
            if key is None:
                raise NotAPath(f"vertex {c} is not a star center")
            if a == b:
                continue
            k, _, cid = key
            if k == BRIDGE_LEVEL:
                pieces.append(Walk((a, b), (cid,)))
                continue
            path = self.hier.cluster_path(k, cid, a, b)
            pieces.append(self.hier.to_ground(k, path))
        out = concat_walks(pieces)
        out.validate(self.g)
        return out

    # ── audit ──

    def audit(self) -> dict:
        """Both emulator inequalities over all pairs of G, plus the structural checks."""
        g = self.g
        verts = sorted(g.vertices)
        cap = self.hier.params.dijkstra_cap
        dG = all_pairs(g, cap=cap) if verts else {}
        dQ = all_pairs(self.Q, vertices=verts, cap=max(cap, self.Q.n)) if verts else {}
        up, low = 0.0, 0.0
        violations: list[tuple[int, int]] = []
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                a = dG[u].get(v, INF)
                b = dQ[u].get(v, INF)
                if b < INF and a == INF:
                    violations.append((u, v))
                if a <= self.h:
                    if b == INF:
                        violations.append((u, v))
                    else:
                        up = max(up, b)
                if 0 < b < INF and a < INF:
                    low = max(low, a / (self.h * b))
        levels = max(len(self.hier.levels), 1)
        report = {
            "alpha_up": up,
            "alpha_low": low,
            "violations": violations[:10],
            "stretch_ok": not violations,
            "alpha_up_flag": up > 4 * levels,
            "unit_ok": all(e.length == 1 for e in self.Q.edges.values()),
            "vertices_ok": g.vertices <= self.Q.vertices,
            "fresh_ok": all(c >= FRESH_BASE and c not in g.vertices for c in self.center_key),
            "size": self.Q.size(),
        }
        report["ok"] = all(report[k] for k in ("stretch_ok", "unit_ok", "vertices_ok", "fresh_ok"))
        if report["alpha_up_flag"]:
            logger.warning("emulator α_up=%s exceeds 4·levels=%d", up, 4 * levels)
        return report


# ═══════════════════════════════════════════════════════════════
# Stacking
# ═══════════════════════════════════════════════════════════════

def heavy_length(length: int, h: int) -> Optional[int]:
    """Stacked length of an original edge, or None when it is too short to keep."""
    if 3 * length < h:
        return None
    return math.ceil(length / h)


class StackedGraph:
    """G_stk = Q ∪ long edges of G rescaled by h."""

    def __init__(self, em: Emulator) -> None:
        self.em = em
        self.h = em.h
        self.G = DynGraph(max_len=em.g.max_len, pool=em.g.pool)
        self.q_edges: dict[int, int] = {}
        self.heavy: dict[int, int] = {}
        self.provenance: dict[int, tuple[str, int]] = {}
        self.stretch = 0.0

    @classmethod
    def create(cls, g: DynGraph, h: int, phi: float, params: GlobalParams = DEFAULT_PARAMS) -> "StackedGraph":
        stk = cls(Emulator.create(g, h, phi, params))
        stk.sync()
        return stk

    @property
    def base(self) -> DynGraph:
        return self.em.g

    def step(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one batch on the base graph; returns the realized batch on G_stk."""
        self.em.step(units)
        return self.sync()

    def sync(self) -> list[Unit]:
        Q, base = self.em.Q, self.base
        want_heavy = {
            eid: length
            for eid, e in base.edges.items()
            if (length := heavy_length(e.length, self.h)) is not None
        }
        adds_v = [Unit(UpdateKind.ADD_VERTEX, v) for v in sorted(Q.vertices - self.G.vertices)]
        adds_e: list[Unit] = []
        refs: list[tuple[str, int]] = []
        for eid in sorted(Q.edges.keys() - self.q_edges.keys()):
            e = Q.edges[eid]
            adds_e.append(Unit(UpdateKind.ADD_EDGE, e.u, e.v, 1))
            refs.append(("q", eid))
        for eid in sorted(want_heavy.keys() - self.heavy.keys()):
            e = base.edges[eid]
            adds_e.append(Unit(UpdateKind.ADD_EDGE, e.u, e.v, want_heavy[eid]))
            refs.append(("heavy", eid))
        dead_q = [eid for eid in sorted(self.q_edges) if eid not in Q.edges]
        dead_h = [eid for eid in sorted(self.heavy) if eid not in want_heavy]
        dels = []
        for sid in [self.q_edges[eid] for eid in dead_q] + [self.heavy[eid] for eid in dead_h]:
            e = self.G.edges[sid]
            dels.append(Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=sid))
        gone = [Unit(UpdateKind.DEL_VERTEX, v) for v in sorted(self.G.vertices - Q.vertices)]
        units = adds_v + adds_e + dels + gone
        if not units:
            return []
        realized = apply_units_inplace(self.G, units)
        added = [u for u in realized if u.kind is UpdateKind.ADD_EDGE]
        for (tag, ref), u in zip(refs, added):
            (self.q_edges if tag == "q" else self.heavy)[ref] = u.eid
            self.provenance[u.eid] = (tag, ref)
        for eid in dead_q:
            self.provenance.pop(self.q_edges.pop(eid), None)
        for eid in dead_h:
            self.provenance.pop(self.heavy.pop(eid), None)
        return realized

    def unfold(self, walk: Walk) -> Walk:
        """Map a G_stk walk between base vertices to a walk in the base graph.

        `stretch` keeps the largest base length over h times stacked length seen.
        """
        walk.validate(self.G)
        pieces = [Walk.trivial(walk.start)]
        run_v: list[int] = [walk.start]
        run_e: list[int] = []

        def flush() -> None:
            if run_e:
                pieces.append(self.em.unfold(Walk(tuple(run_v), tuple(run_e))))

        for i, sid in enumerate(walk.eids):
            tag, ref = self.provenance[sid]
            nxt = walk.vertices[i + 1]
            if tag == "q":
                run_v.append(nxt)
                run_e.append(ref)
                continue
            flush()
            pieces.append(Walk((walk.vertices[i], nxt), (ref,)))
            run_v, run_e = [nxt], []
        flush()
        out = concat_walks(pieces)
        out.validate(self.base)
        if walk.hops:
            self.stretch = max(self.stretch, out.length(self.base) / (self.h * walk.length(self.G)))
        return out

    def audit(self) -> dict:
        """dist_G ≤ λ_low·h·dist_stk and dist_stk ≤ λ_up·max(dist_G/h, 1) over all base pairs."""
        base = self.base
        verts = sorted(base.vertices)
        cap = self.em.hier.params.dijkstra_cap
        dG = all_pairs(base, cap=cap) if verts else {}
        dS = all_pairs(self.G, vertices=verts, cap=max(cap, self.G.n)) if verts else {}
        low, up = 0.0, 0.0
        mismatched: list[tuple[int, int]] = []
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                a = dG[u].get(v, INF)
                b = dS[u].get(v, INF)
                if (a == INF) != (b == INF):
                    mismatched.append((u, v))
                    continue
                if a == INF:
                    continue
                low = max(low, a / (self.h * b))
                up = max(up, b / max(a / self.h, 1))
        report = {
            "lambda_low": low,
            "lambda_up": up,
            "mismatched": mismatched[:10],
            "ok": not mismatched,
            "size": self.G.size(),
        }
        return report


class StackChain:
    """G_1 = G and G_{x+1} = stk(G_x) for x̄ graphs in total."""

    def __init__(self, g: DynGraph, stacks: list[StackedGraph]) -> None:
        self.g = g
        self.stacks = stacks

    @classmethod
    def create(
        cls,
        g: DynGraph,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        h: Optional[int] = None,
        depth: Optional[int] = None,
    ) -> "StackChain":
        h = h or params.stack_h
        depth = depth or params.max_stack
        base = g.copy()
        stacks: list[StackedGraph] = []
        current = base
        for _ in range(depth - 1):
            stk = StackedGraph.create(current, h, phi, params)
            stacks.append(stk)
            current = stk.G
        return cls(base, stacks)

    @property
    def graphs(self) -> list[DynGraph]:
        return [self.g] + [s.G for s in self.stacks]

    def step(self, units: Iterable[Unit]) -> list[list[Unit]]:
        """Absorb one batch on G; returns the realized batch of every graph in the chain."""
        out = [apply_units_inplace(self.g, list(units))]
        for stk in self.stacks:
            out.append(stk.step(out[-1]))
        return out

    def unfold(self, x: int, walk: Walk) -> Walk:
        """Map a walk in G_x (0-based) down to G."""
        for i in range(x - 1, -1, -1):
            walk = self.stacks[i].unfold(walk)
        return walk

    def last_diameter_ok(self, h: int) -> bool:
        """Connected pairs of G sit within h of each other in the last graph."""
        last = self.graphs[-1]
        dG = all_pairs(self.g)
        dL = all_pairs(last, vertices=sorted(self.g.vertices), cap=max(300, last.n))
        return all(
            dL[u].get(v, INF) <= h
            for u in dG
            for v, d in dG[u].items()
            if d < INF
        )


# ═══════════════════════════════════════════════════════════════
# Operation wrappers
# ═══════════════════════════════════════════════════════════════

def emulator_maintain(
    g: DynGraph,
    stream: Iterable[Iterable[Unit]],
    h: int,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
) -> Iterator[Emulator]:
    em = Emulator.create(g, h, phi, params)
    yield em
    for units in stream:
        em.step(units)
        yield em


def emulator_unfold(em: Emulator, P_Q: Walk) -> Walk:
    return em.unfold(P_Q)


def stack(
    g: DynGraph,
    stream: Iterable[Iterable[Unit]],
    h: int,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
) -> Iterator[tuple[StackedGraph, list[Unit]]]:
    """Yield (G_stk, realized batch) after init and after every batch."""
    stk = StackedGraph.create(g, h, phi, params)
    yield stk, []
    for units in stream:
        out = stk.step(units)
        yield stk, out


__all__ = [
    "Emulator",
    "StackChain",
    "StackedGraph",
    "emulator_maintain",
    "emulator_unfold",
    "heavy_length",
    "stack",
]
