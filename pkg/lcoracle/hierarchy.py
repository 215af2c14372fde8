"""lcoracle.hierarchy — dynamic length-constrained expander hierarchy.

Level k holds a graph H_k (H_1 = G), a certified ED of H_k at length h_k,
and, unless the ED's cut is empty, a bounded-distance sparsifier of the ED's
landmarks on H_k whose graph is H_{k+1}. Lengths grow geometrically:
h_{k+1} = 2·STRETCH_UP·h_k and the sparsifier bound is h̄_k = 2·h_k.

A batch climbs level by level. The ED absorbs it, its new landmarks join the
sparsifier's terminals, and the sparsifier's realized batch becomes the next
level's batch. A batch of size ≥ φ·|H_k| rebuilds level k and everything
above it instead.

Levels strictly shrink: a sparsifier whose graph is not smaller than the
graph it sparsifies is dropped and its level becomes the capped top. A
capped top keeps its cut; queries that reach it are settled in G.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from lcoracle.certified_ed import CertifiedED
from lcoracle.errors import BatchTooLarge, BudgetExceeded
from lcoracle.graph import DynGraph, Unit, UpdateKind, Walk, apply_units_inplace
from lcoracle.params import DEFAULT_PARAMS, GlobalParams
from lcoracle.sparsifier import Sparsifier, batch_size

logger = logging.getLogger(__name__)

# Upward stretch the length schedule budgets for one sparsifier level.
STRETCH_UP = 4

_TERMINAL_KINDS = (UpdateKind.ADD_TERMINAL, UpdateKind.DEL_TERMINAL)


@dataclass
class Level:
    k: int
    H: DynGraph
    ed: CertifiedED
    h: int
    hbar: int
    sparsifier: Optional[Sparsifier] = None
    capped: bool = False

    def summary(self) -> dict:
        return {
            "k": self.k,
            "capped": self.capped,
            "n": self.H.n,
            "m": self.H.m,
            "size": self.H.size(),
            "h": self.h,
            "hbar": self.hbar,
            "cut": sum(self.ed.cut.values()),
            "landmarks": len(self.ed.landmarks.landmarks),
            "clusters": len(self.ed.cover.clusters),
            "radius": self.ed.radius,
        }


@dataclass
class ExpanderHierarchy:
    g: DynGraph
    phi: float
    params: GlobalParams
    h: int
    max_levels: int
    levels: list[Level] = field(default_factory=list)
    reinits: list[dict] = field(default_factory=list)

    @classmethod
    def create(
        cls,
        g: DynGraph,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        h: int = 1,
        max_levels: Optional[int] = None,
    ) -> "ExpanderHierarchy":
        hier = cls(g.copy(), phi, params, max(1, h), max_levels or params.max_levels)
        hier._build_from(0)
        logger.info("hierarchy on n=%d m=%d: %d levels", g.n, g.m, len(hier.levels))
        return hier

    # ── lengths ──

    def length(self, k: int) -> int:
        """h_k for the 1-based level k."""
        return self.h * (2 * STRETCH_UP) ** (k - 1)

    def bound(self, k: int) -> int:
        return 2 * self.length(k)

    # ── construction ──

    def _graph_at(self, i: int) -> DynGraph:
        if i == 0:
            return self.g
        below = self.levels[i - 1].sparsifier
        assert below is not None
        return below.H

    def _build_from(self, i: int, *, keep_ed: bool = False) -> None:
        """Rebuild level i+1 (0-based i) and every level above it from the current graphs."""
        ed = self.levels[i].ed if keep_ed and i < len(self.levels) else None
        del self.levels[i:]
        H = self._graph_at(i) if i else self.g
        while True:
            k = len(self.levels) + 1
            if ed is None:
                ed = CertifiedED.create(H, self.length(k), self.phi, self.params)
            level = Level(k, H, ed, self.length(k), self.bound(k))
            self.levels.append(level)
            if not ed.cut:
                break
            if k >= self.max_levels or not self._attach(level):
                level.capped = True
                break
            H = level.sparsifier.H
            ed = None

    def _attach(self, level: Level) -> bool:
        """Build the sparsifier above `level`; keep it only if its graph is smaller."""
        sp = Sparsifier.create(level.H, level.ed.landmarks.landmarks, level.hbar, self.phi, self.params)
        if sp.H.size() >= level.H.size():
            logger.debug("level %d sparsifier has size %d ≥ %d, not stacking", level.k, sp.H.size(), level.H.size())
            return False
        level.sparsifier = sp
        return True

    def _grow(self) -> None:
        """Stack a level on top of a cut top level when that level would shrink."""
        top = self.levels[-1]
        if not top.ed.cut or top.sparsifier is not None or top.capped:
            return
        if top.k < self.max_levels and self._attach(top):
            self._build_from(top.k)
            logger.debug("hierarchy grew to %d levels", len(self.levels))
        else:
            top.capped = True

    def _enforce_decay(self) -> None:
        """Drop every level above the first one that did not shrink."""
        for i in range(1, len(self.levels)):
            if self.levels[i].H.size() < self.levels[i - 1].H.size():
                continue
            below = self.levels[i - 1]
            self.reinits.append({"epoch": self.g.epoch, "level": i + 1, "why": "level stopped shrinking"})
            logger.info("hierarchy truncated to %d levels (level %d stopped shrinking)", i, i + 1)
            below.sparsifier = None
            below.capped = True
            del self.levels[i:]
            return

    def _reinit(self, i: int, why: str, *, keep_ed: bool = False) -> None:
        self.reinits.append({"epoch": self.g.epoch, "level": i + 1, "why": why})
        logger.info("hierarchy reinit from level %d (%s)", i + 1, why)
        self._build_from(i, keep_ed=keep_ed)

    # ── updates ──

    def step(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one batch on G; returns the realized units on G."""
        units = list(units)
        if not units:
            return []
        size = batch_size(units)
        reinit_now = size >= self.phi * max(self.g.size(), 1)
        realized = apply_units_inplace(self.g, units)
        if reinit_now:
            self._reinit(0, f"batch of size {size}")
            return realized

        pi = [u for u in realized if u.kind not in _TERMINAL_KINDS]
        i = 0
        while i < len(self.levels) and pi:
            level = self.levels[i]
            if i and batch_size(pi) >= self.phi * max(level.H.size(), 1):
                self._reinit(i, f"level batch of size {batch_size(pi)}")
                return realized
            before = set(level.ed.landmarks.landmarks)
            try:
                level.ed.apply(pi)
                fresh = level.ed.landmarks.landmarks - before
            except BudgetExceeded:
                level.ed = CertifiedED.create(level.H, level.h, self.phi, self.params)
                fresh = set(level.ed.landmarks.landmarks)
            sp = level.sparsifier
            if sp is None:
                break
            sp_units = list(pi) + [
                Unit(UpdateKind.ADD_TERMINAL, v) for v in sorted(fresh) if v in sp.g.vertices and v not in sp.terminals
            ]
            try:
                pi = sp.step(sp_units)
            except BatchTooLarge:
                self._reinit(i, "sparsifier batch too large", keep_ed=True)
                return realized
            i += 1
        self._enforce_decay()
        self._grow()
        return realized

    # ── paths ──

    def unfold(self, k: int, walk: Walk) -> Walk:
        """Map a walk in H_{k+1} to a walk in H_k."""
        sp = self.levels[k - 1].sparsifier
        if sp is None:
            raise IndexError(f"level {k} has no sparsifier above it")
        return sp.unfold(walk)

    def to_ground(self, k: int, walk: Walk) -> Walk:
        """Unfold a walk in H_k all the way down to G."""
        for i in range(k - 1, 0, -1):
            walk = self.unfold(i, walk)
        return walk

    def cluster_path(self, k: int, cid: int, u: int, v: int) -> Walk:
        return self.levels[k - 1].ed.cluster_path(cid, u, v)

    # ── audit ──

    def audit(self, *, samples: int = 10) -> dict:
        levels = []
        ok = True
        for i, level in enumerate(self.levels):
            entry = {"k": level.k, "ed_ok": level.ed.audit(samples=samples)["ok"]}
            if level.sparsifier is not None:
                sp = level.sparsifier
                report = sp.audit()
                entry["sparsifier_ok"] = report["ok"]
                entry["alpha_low"] = report["alpha_low"]
                entry["alpha_up"] = report["alpha_up"]
                entry["landmarks_ok"] = level.ed.landmarks.landmarks <= sp.H.vertices
                entry["same_graph"] = sp.g.edges == level.H.edges and sp.g.vertices == level.H.vertices
            entry["ok"] = all(v for key, v in entry.items() if key.endswith("_ok") or key == "same_graph")
            ok = ok and entry["ok"]
            levels.append(entry)
        decay = self.decays()
        return {"levels": levels, "decay": decay, "capped": self.levels[-1].capped, "ok": ok and decay}

    def decays(self) -> bool:
        """Strict level-size decrease."""
        sizes = [level.H.size() for level in self.levels]
        return all(b < a for a, b in zip(sizes, sizes[1:]))

    def summary(self) -> dict:
        return {
            "levels": [level.summary() for level in self.levels],
            "reinits": list(self.reinits),
        }

    def first_empty_cut(self) -> Optional[int]:
        for level in self.levels:
            if not level.ed.cut:
                return level.k
        return None


# ═══════════════════════════════════════════════════════════════
# Operation wrappers
# ═══════════════════════════════════════════════════════════════

def hierarchy_init(
    g: DynGraph,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    h: int = 1,
    max_levels: Optional[int] = None,
) -> ExpanderHierarchy:
    return ExpanderHierarchy.create(g, phi, params, h=h, max_levels=max_levels)


def hierarchy_step(hier: ExpanderHierarchy, pi: Iterable[Unit]) -> ExpanderHierarchy:
    hier.step(pi)
    return hier


def hierarchy_unfold(hier: ExpanderHierarchy, k: int, P: Walk) -> Walk:
    return hier.unfold(k, P)


__all__ = [
    "ExpanderHierarchy",
    "Level",
    "STRETCH_UP",
    "hierarchy_init",
    "hierarchy_step",
    "hierarchy_unfold",
]
