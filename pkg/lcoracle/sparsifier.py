"""lcoracle.sparsifier — distance-preserving vertex sparsifiers built from certified EDs.

A sparsifier H of a terminal set T on G is

- one star per cluster of every level's certified ED, restricted to the
  extended terminals T̄; level j uses h_j = 2^j and its star edges have
  length h_j, and
- the heavy edges: every original edge some level ever cut, at its
  original length.

T̄ = T ∪ landmarks of every level ∪ endpoints of heavy edges, and it only
grows until a vertex leaves G. Star centers are fresh vertices, so
T̄ = V(H) ∩ V(G).

`Sparsifier.sync` diffs the star union the EDs currently describe against H
and applies the difference as one realized batch; that batch is what the next
level of a hierarchy consumes.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from lcoracle.brute import all_pairs
from lcoracle.certified_ed import CertifiedED, DenseCertifiedED, dense_init, insert_landmarks_closure
from lcoracle.covers import verify_cover
from lcoracle.errors import (
    AuditFailure,
    BatchTooLarge,
    BudgetExceeded,
    EndpointNotTerminal,
    NotAPath,
    PreconditionViolated,
)
from lcoracle.graph import (
    FRESH_BASE,
    INF,
    DynGraph,
    Unit,
    UpdateKind,
    Walk,
    apply_units_inplace,
    concat_walks,
    split_batch,
)
from lcoracle.params import DEFAULT_PARAMS, GlobalParams

logger = logging.getLogger(__name__)

# (level j, era of that level's ED, cluster id)
StarKey = tuple[int, int, int]

# Regression bound on the measured upward stretch.
ALPHA_UP_CAP = 64


def batch_size(units: Iterable[Unit]) -> int:
    return sum(b.size for b in split_batch(units))


@dataclass
class StretchRecord:
    alpha_low: float = 1.0
    alpha_up: float = 1.0
    h: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ═══════════════════════════════════════════════════════════════
# Sparsifier
# ═══════════════════════════════════════════════════════════════

class Sparsifier:
    """Star union over per-level EDs plus heavy edges, kept in sync with the EDs."""

    def __init__(
        self,
        g: DynGraph,
        terminals: Iterable[int],
        h: int,
        eds: Sequence[CertifiedED] = (),
        *,
        phi: float = DEFAULT_PARAMS.phi,
        params: GlobalParams = DEFAULT_PARAMS,
    ) -> None:
        self.g = g
        self.terminals = set(terminals) & g.vertices
        self.h = max(1, h)
        self.phi = phi
        self.params = params
        self.eds: list[CertifiedED] = list(eds)
        self.era = [0] * len(self.eds)
        self.H = DynGraph(max_len=g.max_len, pool=g.pool)
        self.tbar: set[int] = set()
        self.centers: dict[StarKey, int] = {}
        self.star_edges: dict[tuple[StarKey, int], int] = {}
        self.heavy: dict[int, int] = {}
        self.provenance: dict[int, tuple] = {}
        self.record = StretchRecord(h=self.h)
        self.history: list[dict] = []

    # ── construction ──

    @classmethod
    def create(
        cls,
        g: DynGraph,
        terminals: Iterable[int],
        h: int,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
    ) -> "Sparsifier":
        """Bounded-distance sparsifier: ĵ dense EDs on G, landmark closure, star union."""
        base = g.copy()
        base.terminals = set(terminals) & base.vertices
        sp = cls(base, base.terminals, h, phi=phi, params=params)
        levels = params.sparsifier_levels(sp.h)
        sp.eds = [sp._build_level(j) for j in range(levels)]
        sp.era = [0] * levels
        sp._close([set(ed.landmarks.landmarks) for ed in sp.eds])
        sp.sync()
        sp._record("init", [])
        logger.info(
            "sparsifier of |T|=%d on n=%d: %d levels, |T̄|=%d, |H|=%d",
            len(sp.terminals), base.n, levels, len(sp.tbar), sp.H.size(),
        )
        return sp

    def _build_level(self, j: int) -> DenseCertifiedED:
        return dense_init(self.g, 2 ** (j + 1), self.phi, self.params)

    def _rebuild(self, j: int) -> None:
        self.eds[j] = self._build_level(j)
        self.era[j] += 1
        known = set()
        for i, ed in enumerate(self.eds):
            if i != j:
                known |= ed.lm_vertices
        ed = self.eds[j]
        targets = {v: 1 for v in sorted(known) if v in ed.g.vertices and not ed.has_landmark_node(v)}
        if targets:
            ed.insert_nodes(targets, self.params.terminal_density, role="lm")
        logger.info("sparsifier level %d rebuilt (era %d)", j, self.era[j])

    def _close(self, fresh: list[set[int]]) -> None:
        try:
            insert_landmarks_closure(self.eds, fresh, self.phi, self.params)
        except BudgetExceeded:
            logger.info("landmark closure exhausted a router budget; rebuilding all levels")
            for j in range(len(self.eds)):
                self._rebuild(j)
            insert_landmarks_closure(
                self.eds, [set(ed.landmarks.landmarks) for ed in self.eds], self.phi, self.params,
            )

    # ── updates ──

    def step(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one batch on G; returns the realized batch that moved H."""
        units = list(units)
        size = batch_size(units)
        if size > self.phi * max(self.g.size(), 1):
            raise BatchTooLarge(f"batch of size {size} exceeds φ·|G| = {self.phi * self.g.size():.1f}")
        realized = apply_units_inplace(self.g, units)
        for u in realized:
            if u.kind is UpdateKind.ADD_TERMINAL:
                self.terminals.add(u.u)
            elif u.kind in (UpdateKind.DEL_TERMINAL, UpdateKind.DEL_VERTEX):
                self.terminals.discard(u.u)
        fresh: list[set[int]] = []
        for j in range(len(self.eds)):
            ed = self.eds[j]
            before = set(ed.landmarks.landmarks)
            try:
                ed.apply(realized)
                fresh.append(ed.landmarks.landmarks - before)
            except BudgetExceeded:
                self._rebuild(j)
                fresh.append(set(self.eds[j].landmarks.landmarks))
        self._close(fresh)
        out = self.sync()
        self._record("batch", out)
        return out

    def _desired(self) -> tuple[set[int], set[int], dict[StarKey, set[int]]]:
        vertices = self.g.vertices
        tbar = (self.tbar | self.terminals) & vertices
        heavy = {eid for eid in self.heavy if eid in self.g.edges}
        for ed in self.eds:
            tbar |= ed.landmarks.landmarks & vertices
            heavy |= {eid for eid, c in ed.cut.items() if c and eid in self.g.edges}
        for eid in heavy:
            tbar.update(self.g.edges[eid].ends)
        stars: dict[StarKey, set[int]] = {}
        for j, ed in enumerate(self.eds):
            for cid, cluster in ed.cover.clusters.items():
                members = set(cluster.vertices()) & tbar
                if len(members) >= 2:
                    stars[(j, self.era[j], cid)] = members
        return tbar, heavy, stars

    def sync(self) -> list[Unit]:
        """Move H to the star union the EDs describe; returns the realized batch."""
        tbar, heavy, stars = self._desired()
        adds_v: list[Unit] = [Unit(UpdateKind.ADD_VERTEX, v) for v in sorted(tbar - self.H.vertices)]
        centers = {key: c for key, c in self.centers.items() if key in stars}
        for key in sorted(stars):
            if key not in centers:
                centers[key] = self.g.pool.fresh()
                adds_v.append(Unit(UpdateKind.ADD_VERTEX, centers[key]))

        adds_e: list[Unit] = []
        refs: list[tuple[str, object]] = []
        for key in sorted(stars):
            length = self.eds[key[0]].h
            for v in sorted(stars[key]):
                if (key, v) not in self.star_edges:
                    adds_e.append(Unit(UpdateKind.ADD_EDGE, v, centers[key], length))
                    refs.append(("star", (key, v)))
        for eid in sorted(heavy - self.heavy.keys()):
            e = self.g.edges[eid]
            adds_e.append(Unit(UpdateKind.ADD_EDGE, e.u, e.v, e.length))
            refs.append(("heavy", eid))

        dels: list[Unit] = []
        dead_stars = [sk for sk in sorted(self.star_edges) if sk[0] not in stars or sk[1] not in stars[sk[0]]]
        dead_heavy = [eid for eid in sorted(self.heavy) if eid not in heavy]
        for sk in dead_stars:
            e = self.H.edges[self.star_edges[sk]]
            dels.append(Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=e.eid))
        for eid in dead_heavy:
            e = self.H.edges[self.heavy[eid]]
            dels.append(Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=e.eid))
        gone = [Unit(UpdateKind.DEL_VERTEX, c) for key, c in sorted(self.centers.items()) if key not in stars]
        gone += [Unit(UpdateKind.DEL_VERTEX, v) for v in sorted(self.tbar - tbar)]

        units = adds_v + adds_e + dels + gone
        self.tbar = tbar
        self.centers = centers
        if not units:
            return []
        realized = apply_units_inplace(self.H, units)
        added = [u for u in realized if u.kind is UpdateKind.ADD_EDGE]
        for (tag, ref), u in zip(refs, added):
            if tag == "star":
                self.star_edges[ref] = u.eid
                self.provenance[u.eid] = ("star", ref[0])
            else:
                self.heavy[ref] = u.eid
                self.provenance[u.eid] = ("heavy", ref)
        for sk in dead_stars:
            self.provenance.pop(self.star_edges.pop(sk), None)
        for eid in dead_heavy:
            self.provenance.pop(self.heavy.pop(eid), None)
        logger.debug(
            "sparsifier sync: +%d vertices +%d edges -%d edges -%d vertices",
            len(adds_v), len(adds_e), len(dels), len(gone),
        )
        return realized

    def _record(self, what: str, out: Sequence[Unit]) -> None:
        self.history.append({
            "event": what,
            "epoch": self.g.epoch,
            "recourse": len(out),
            "tbar": len(self.tbar),
            "size": self.H.size(),
        })

    # ── paths ──

    def unfold(self, walk: Walk) -> Walk:
        """Map a walk in H between T̄ vertices to a walk in G."""
        walk.validate(self.H)
        for x in (walk.start, walk.end):
            if x not in self.tbar:
                raise EndpointNotTerminal(f"vertex {x} is not an extended terminal")
        pieces = [Walk.trivial(walk.start)]
        i = 0
        while i < walk.hops:
            tag = self.provenance[walk.eids[i]]
            a = walk.vertices[i]
            if tag[0] == "heavy":
                pieces.append(Walk((a, walk.vertices[i + 1]), (tag[1],)))
                i += 1
                continue
            if i + 1 >= walk.hops:
                raise NotAPath("walk stops at a star center")
            b = walk.vertices[i + 2]
            i += 2
            # u' = v': the detour through the center collapses.
            if a != b:
                j, _, cid = tag[1]
                pieces.append(self.eds[j].cluster_path(cid, a, b))
        out = concat_walks(pieces)
        out.validate(self.g)
        return out

    # ── audit ──

    def audit(self, *, deep: bool = False) -> dict:
        """Both stretch directions over all T̄ pairs, plus the structural checks."""
        verts = sorted(self.tbar)
        dG = all_pairs(self.g, vertices=verts, cap=self.params.dijkstra_cap) if verts else {}
        dH = all_pairs(self.H, vertices=verts, cap=self.params.dijkstra_cap) if verts else {}
        low, up = 1.0, 1.0
        violations: list[tuple[int, int]] = []
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                a = dG[u].get(v, INF)
                b = dH[u].get(v, INF)
                if b < INF:
                    if a == INF:
                        violations.append((u, v))
                    else:
                        low = max(low, a / b)
                if a <= self.h:
                    if b == INF:
                        violations.append((u, v))
                    else:
                        up = max(up, b / a)
        self.record = StretchRecord(alpha_low=low, alpha_up=up, h=self.h)

        terminals_ok = self.terminals <= self.tbar <= self.H.vertices
        extra = self.H.vertices - self.tbar
        fresh_ok = all(c >= FRESH_BASE and c not in self.g.vertices for c in extra)
        fresh_ok = fresh_ok and extra == set(self.centers.values())
        heavy_ok = all(
            eid in self.heavy
            for ed in self.eds
            for eid, c in ed.cut.items()
            if eid in self.g.edges and c >= ed.h / 10
        )
        report = {
            "alpha_low": low,
            "alpha_up": up,
            "violations": violations[:10],
            "stretch_ok": not violations and up <= ALPHA_UP_CAP,
            "terminals_ok": terminals_ok,
            "fresh_ok": fresh_ok,
            "heavy_ok": heavy_ok,
            "size": self.H.size(),
            "tbar": len(self.tbar),
        }
        keys = ["stretch_ok", "terminals_ok", "fresh_ok", "heavy_ok"]
        if deep:
            report["eds_ok"] = all(ed.audit()["ok"] for ed in self.eds)
            report["real_diam"] = self.real_diameters()
            report["real_diam_ok"] = all(row["ok"] for row in report["real_diam"])
            keys.extend(["eds_ok", "real_diam_ok"])
        report["ok"] = all(report[k] for k in keys)
        return report

    def real_diameters(self) -> list[dict]:
        """Per level: largest G-distance inside one cluster, against h_diam · real_diam_slack."""
        rows = []
        for j, ed in enumerate(self.eds):
            worst = 0.0
            for c in ed.cover.clusters.values():
                vs = [v for v in c.vertices() if v in self.g.vertices]
                if len(vs) < 2:
                    continue
                dist = all_pairs(self.g, vertices=vs, cap=self.params.dijkstra_cap)
                worst = max(worst, max(dist[u].get(v, INF) for u in vs for v in vs if u != v))
            bound = ed.cover.h_diam * self.params.real_diam_slack
            rows.append({"level": j, "diam": worst, "bound": bound, "ok": worst <= bound})
            if worst > bound:
                logger.warning("level %d cluster diameter %s on G exceeds %s", j, worst, bound)
        return rows

    def check(self, *, deep: bool = False) -> dict:
        report = self.audit(deep=deep)
        if not report["ok"]:
            raise AuditFailure("sparsifier audit failed", report)
        return report

    def dump(self) -> str:
        """One line per H edge: `eid u v len star j cid` or `eid u v len heavy eid_G`."""
        lines = []
        for eid in sorted(self.H.edges):
            e = self.H.edges[eid]
            tag = self.provenance[eid]
            if tag[0] == "heavy":
                origin = f"heavy {tag[1]}"
            else:
                j, _, cid = tag[1]
                origin = f"star {j} {cid}"
            lines.append(f"{eid} {e.u} {e.v} {e.length} {origin}")
        return "\n".join(lines)


# ═══════════════════════════════════════════════════════════════
# Operation wrappers
# ═══════════════════════════════════════════════════════════════

def static_sparsifier(g: DynGraph, T: Iterable[int], eds: Sequence[CertifiedED]) -> Sparsifier:
    """Star union over the given EDs' covers restricted to T̄, plus their cut edges.

    Every ED must sit on g and carry a valid cover of its nodes.
    """
    if not eds:
        return Sparsifier(g, T, 1)
    for j, ed in enumerate(eds):
        if ed.g.vertices != g.vertices or ed.g.edges.keys() != g.edges.keys():
            raise PreconditionViolated(f"ED {j} is built on a different graph")
        report = verify_cover(ed.g, ed.cut, ed.cover, nodes=ed.nodes())
        if not report["ok"]:
            raise PreconditionViolated(f"ED {j} (h={ed.h}) does not carry a valid cover")
    sp = Sparsifier(g, T, max(ed.h for ed in eds), eds, phi=eds[0].phi, params=eds[0].params)
    sp.sync()
    return sp


def dynamic_sparsifier_step(state: Sparsifier, pi: Iterable[Unit]) -> tuple[Sparsifier, list[Unit]]:
    out = state.step(pi)
    return state, out


def bounded_sparsifier_maintain(
    g: DynGraph,
    stream: Iterable[Iterable[Unit]],
    T: Iterable[int],
    h: int,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
) -> Iterator[Sparsifier]:
    """Yield the sparsifier after init and after every batch (terminal updates ride in the batches)."""
    sp = Sparsifier.create(g, T, h, phi, params)
    yield sp
    for units in stream:
        sp.step(units)
        yield sp


def unfold_path(state: Sparsifier, P_H: Walk) -> Walk:
    return state.unfold(P_H)


__all__ = [
    "ALPHA_UP_CAP",
    "Sparsifier",
    "StarKey",
    "StretchRecord",
    "batch_size",
    "bounded_sparsifier_maintain",
    "dynamic_sparsifier_step",
    "static_sparsifier",
    "unfold_path",
]
