"""lcoracle.alldist — all-distance vertex sparsifiers.

Two layers on top of the bounded sparsifier:

`SparsifierChain` stacks bounded sparsifiers on one graph: H_1 is the graph,
H_{k+1} sparsifies T_k on H_k at bound h_k = h·STRETCH_UP^{k−1}, and each
T_k starts as T at (re)initialization and only gains terminals afterwards.
A level is rebuilt, together with everything above it, when its terminal
deletions or its other units exceed φ·|H_k|.

`AllDistanceSparsifier` runs one chain per graph of a stacking chain
G_1..G_x̄ and glues the tops together: every top H'_x gets a fresh copy with
lengths scaled by h^{x−1}, and each terminal v is joined to its copy v_x by
a unit edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from lcoracle.brute import all_pairs
from lcoracle.emulator import StackChain
from lcoracle.errors import BatchTooLarge
from lcoracle.graph import INF, DynGraph, Unit, UpdateKind, apply_units_inplace
from lcoracle.hierarchy import STRETCH_UP
from lcoracle.params import DEFAULT_PARAMS, GlobalParams
from lcoracle.schedule import DigitScheduler, FullyDynWrapper
from lcoracle.sparsifier import Sparsifier, batch_size

logger = logging.getLogger(__name__)

_TERMINAL_KINDS = (UpdateKind.ADD_TERMINAL, UpdateKind.DEL_TERMINAL)


# ═══════════════════════════════════════════════════════════════
# Sparsifier chain on one graph
# ═══════════════════════════════════════════════════════════════

@dataclass
class SparsifierChain:
    g: DynGraph
    h: int
    phi: float
    params: GlobalParams
    depth: int
    levels: list[Sparsifier] = field(default_factory=list)
    reinits: list[dict] = field(default_factory=list)

    @classmethod
    def create(
        cls,
        g: DynGraph,
        terminals: Iterable[int],
        h: int,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        depth: Optional[int] = None,
    ) -> "SparsifierChain":
        base = g.copy()
        base.terminals = set(terminals) & base.vertices
        chain = cls(base, max(1, h), phi, params, depth or params.max_levels)
        chain._build_from(0)
        return chain

    def bound(self, k: int) -> int:
        """h_k for the 1-based level k."""
        return self.h * STRETCH_UP ** (k - 1)

    def graph(self, k: int) -> DynGraph:
        """H_k, 1-based."""
        return self.g if k == 1 else self.levels[k - 2].H

    @property
    def top(self) -> DynGraph:
        return self.graph(len(self.levels) + 1)

    def _build_from(self, i: int) -> None:
        del self.levels[i:]
        for k in range(i + 1, self.depth):
            self.levels.append(
                Sparsifier.create(self.graph(k), self.g.terminals, self.bound(k), self.phi, self.params)
            )

    def step(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one batch on the base graph; returns the realized batch on the top graph."""
        pi = apply_units_inplace(self.g, list(units))
        for i, sp in enumerate(self.levels):
            limit = self.phi * max(self.graph(i + 1).size(), 1)
            dels = [u for u in pi if u.kind is UpdateKind.DEL_TERMINAL]
            hat = [
                u for u in pi
                if u.kind is not UpdateKind.DEL_TERMINAL
                and not (u.kind is UpdateKind.ADD_TERMINAL and u.u in sp.terminals)
            ]
            if len(dels) > limit or batch_size(hat) > limit:
                return self._reinit(i, f"level batch of size {len(dels)}+{batch_size(hat)}")
            try:
                out = sp.step(hat)
            except BatchTooLarge:
                return self._reinit(i, "sparsifier batch too large")
            pi = out + [u for u in pi if u.kind in _TERMINAL_KINDS and u.u in sp.H.vertices]
        return [u for u in pi if u.kind not in _TERMINAL_KINDS]

    def _reinit(self, i: int, why: str) -> list[Unit]:
        self.reinits.append({"epoch": self.g.epoch, "level": i + 1, "why": why})
        logger.info("sparsifier chain reinit from level %d (%s)", i + 1, why)
        self._build_from(i)
        return []


# ═══════════════════════════════════════════════════════════════
# Composition over the stacking chain
# ═══════════════════════════════════════════════════════════════

# (kind, x, ref, u, v, length): ref is an edge id of the top of chain x for
# "edge" and a terminal for "link". A rebuilt top reuses edge ids, so the
# endpoints and length are part of the key.
ComposedKey = tuple[str, int, int, int, int, int]


class AllDistanceSparsifier:
    """Union of fresh, rescaled chain tops plus unit connectors to the terminals."""

    def __init__(self, stacks: StackChain, chains: list[SparsifierChain], h: int) -> None:
        self.stacks = stacks
        self.chains = chains
        self.h = h
        self.H = DynGraph(max_len=stacks.g.max_len, pool=stacks.g.pool)
        self.copies: list[dict[int, int]] = [{} for _ in chains]
        self.edges: dict[ComposedKey, int] = {}
        self.anchors: set[int] = set()
        self.history: list[dict] = []

    @classmethod
    def create(
        cls,
        g: DynGraph,
        terminals: Optional[Iterable[int]] = None,
        phi: float = DEFAULT_PARAMS.phi,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        h: Optional[int] = None,
        depth: Optional[int] = None,
    ) -> "AllDistanceSparsifier":
        h = h or params.stack_h
        g = g.copy()
        if terminals is not None:
            g.terminals = set(terminals) & g.vertices
        stacks = StackChain.create(g, phi, params, h=h, depth=depth)
        T = stacks.g.terminals
        chains = [SparsifierChain.create(G, T, h, phi, params) for G in stacks.graphs]
        ads = cls(stacks, chains, h)
        ads.sync()
        logger.info("all-distance sparsifier of |T|=%d over %d graphs: |H|=%d", len(T), len(chains), ads.H.size())
        return ads

    @property
    def g(self) -> DynGraph:
        return self.stacks.g

    @property
    def terminals(self) -> set[int]:
        return self.g.terminals

    def step(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one batch on G; returns the realized batch on H."""
        outs = self.stacks.step(units)
        terminal_units = [u for u in outs[0] if u.kind in _TERMINAL_KINDS]
        for x, chain in enumerate(self.chains):
            chain.step(outs[x] if x == 0 else outs[x] + terminal_units)
        out = self.sync()
        self.history.append({"epoch": self.g.epoch, "recourse": len(out), "size": self.H.size()})
        return out

    def _copy_of(self, x: int, v: int) -> int:
        table = self.copies[x]
        if v not in table:
            table[v] = self.g.pool.fresh()
        return table[v]

    def sync(self) -> list[Unit]:
        # former terminals stay as isolated vertices until they leave G
        self.anchors = (self.anchors | self.terminals) & self.g.vertices
        want_v: set[int] = set(self.anchors)
        want_e: set[ComposedKey] = set()
        for x, chain in enumerate(self.chains):
            top = chain.top
            live = top.vertices
            for v in sorted(live):
                want_v.add(self._copy_of(x, v))
            self.copies[x] = {v: c for v, c in self.copies[x].items() if v in live}
            scale = self.h ** x
            for eid, e in top.edges.items():
                want_e.add(("edge", x, eid, self.copies[x][e.u], self.copies[x][e.v], e.length * scale))
            for v in self.terminals:
                if v in live:
                    want_e.add(("link", x, v, v, self.copies[x][v], 1))
        adds_v = [Unit(UpdateKind.ADD_VERTEX, v) for v in sorted(want_v - self.H.vertices)]
        keys = sorted(want_e - self.edges.keys())
        adds_e = [Unit(UpdateKind.ADD_EDGE, key[3], key[4], key[5]) for key in keys]
        dead = sorted(self.edges.keys() - want_e)
        dels = [
            Unit(UpdateKind.DEL_EDGE, self.H.edges[self.edges[key]].u, self.H.edges[self.edges[key]].v, eid=self.edges[key])
            for key in dead
        ]
        gone = [Unit(UpdateKind.DEL_VERTEX, v) for v in sorted(self.H.vertices - want_v)]
        units = adds_v + adds_e + dels + gone
        if not units:
            return []
        realized = apply_units_inplace(self.H, units)
        added = [u for u in realized if u.kind is UpdateKind.ADD_EDGE]
        for key, u in zip(keys, added):
            self.edges[key] = u.eid
        for key in dead:
            del self.edges[key]
        return realized

    def audit(self) -> dict:
        """Stretch over all terminal pairs; H never joins terminals that G keeps apart."""
        verts = sorted(self.terminals)
        cap = max(self.chains[0].params.dijkstra_cap, self.H.n)
        dG = all_pairs(self.g, vertices=verts) if verts else {}
        dH = all_pairs(self.H, vertices=verts, cap=cap) if verts else {}
        low, up = 1.0, 1.0
        unsound: list[tuple[int, int]] = []
        missing: list[tuple[int, int]] = []
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                a = dG[u].get(v, INF)
                b = dH[u].get(v, INF)
                if b < INF and a == INF:
                    unsound.append((u, v))
                elif a < INF and b == INF:
                    missing.append((u, v))
                elif a < INF:
                    low = max(low, a / b)
                    up = max(up, b / a)
        links = {(key[1], key[2]) for key in self.edges if key[0] == "link"}
        links_ok = all(
            (x, v) in links
            for x, chain in enumerate(self.chains)
            for v in self.terminals
            if v in chain.top.vertices
        )
        link_lengths_ok = all(
            self.H.edges[eid].length == 1 for key, eid in self.edges.items() if key[0] == "link"
        )
        report = {
            "alpha_low": low,
            "alpha_up": up,
            "unsound": unsound[:10],
            "missing": missing[:10],
            "links_ok": links_ok and link_lengths_ok,
            "fresh_ok": all(c not in self.g.vertices for table in self.copies for c in table.values()),
            "size": self.H.size(),
        }
        report["complete"] = not missing
        report["ok"] = not unsound and report["links_ok"] and report["fresh_ok"]
        return report


# ═══════════════════════════════════════════════════════════════
# Operation wrapper
# ═══════════════════════════════════════════════════════════════

def all_distance_sparsifier(
    g: DynGraph,
    stream: Iterable[Unit],
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    h: Optional[int] = None,
    scheduler: Optional[DigitScheduler] = None,
) -> Iterator[AllDistanceSparsifier]:
    """Amortized fully dynamic variant; yields the designated instance after init and every unit update.

    The terminal set is g.terminals, and terminal updates ride in the stream.
    """

    def factory(current: DynGraph) -> AllDistanceSparsifier:
        return AllDistanceSparsifier.create(current, None, phi, params, h=h)

    wrapper = FullyDynWrapper(factory, g, scheduler or DigitScheduler.for_graph(g.n, params.eps))
    yield wrapper.designated  # type: ignore[misc]
    for unit in stream:
        yield wrapper.update(unit)  # type: ignore[misc]


__all__ = [
    "AllDistanceSparsifier",
    "SparsifierChain",
    "all_distance_sparsifier",
]
