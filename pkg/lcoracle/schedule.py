"""lcoracle.schedule — turning online-batch structures into fully dynamic ones.

An online-batch structure handles a few large batches well but degrades as
batches pile up. The wrapper here keeps it fresh: the i-th unit update since
the last restart is written in base b, and the designated instance for i has
executed exactly one batch per nonzero digit, each batch covering the updates
between two consecutive digit prefixes. Going from i−1 to i keeps the shared
prefix (restored from a snapshot) and runs one new batch.

Two schedules share that idea:

- `DigitScheduler`: one instance plus snapshots at every prefix endpoint,
  b = ⌈n^ε⌉ with ⌈2/ε⌉ digits.
- `RotatingScheduler`: 2^ξ live instances with b = ⌈w^{1/ξ}⌉ and ξ digits;
  each update goes to the instance whose executed chain shares the longest
  prefix with the new plan.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional, Protocol

from lcoracle.graph import DynGraph, Unit, UpdateKind, apply_units_inplace

logger = logging.getLogger(__name__)


class OnlineBatch(Protocol):
    g: DynGraph

    def step(self, units: Iterable[Unit]) -> Any: ...


Factory = Callable[[DynGraph], OnlineBatch]


# ═══════════════════════════════════════════════════════════════
# Schedules
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class DigitScheduler:
    base: int
    digits: int

    @classmethod
    def for_graph(cls, n: int, eps: float) -> "DigitScheduler":
        return cls(max(2, math.ceil(max(n, 1) ** eps)), max(1, math.ceil(2 / eps)))

    @property
    def capacity(self) -> int:
        """Largest update count a run can reach before it restarts."""
        return self.base ** self.digits - 1

    @property
    def instances(self) -> int:
        return 1

    def plan(self, i: int) -> tuple[int, ...]:
        """Prefix endpoints of i, most significant digit first; one executed batch each."""
        if not 0 <= i <= self.capacity:
            raise ValueError(f"update count {i} outside 0..{self.capacity}")
        out: list[int] = []
        acc = 0
        for p in range(self.digits - 1, -1, -1):
            unit = self.base ** p
            d = (i // unit) % self.base
            if d:
                acc += d * unit
                out.append(acc)
        return tuple(out)


@dataclass(frozen=True)
class RotatingScheduler(DigitScheduler):
    @classmethod
    def for_sensitivity(cls, w: int, xi: int) -> "RotatingScheduler":
        return cls(max(2, math.ceil(max(w, 1) ** (1 / xi))), xi)

    @property
    def instances(self) -> int:
        return 2 ** self.digits


def common_prefix(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    k = 0
    for x, y in zip(a, b):
        if x != y:
            break
        k += 1
    return k


def normalize(units: Iterable[Unit]) -> list[Unit]:
    """Drop insert/delete pairs that cancel inside one combined batch."""
    units = list(units)
    dead: set[int] = set()
    open_terminal: dict[int, int] = {}
    open_vertex: dict[int, int] = {}
    open_edge: dict[int, int] = {}
    for i, u in enumerate(units):
        if u.kind in (UpdateKind.ADD_TERMINAL, UpdateKind.DEL_TERMINAL):
            j = open_terminal.pop(u.u, None)
            if j is not None and units[j].kind is not u.kind:
                dead.update((i, j))
            else:
                open_terminal[u.u] = i
        elif u.kind is UpdateKind.ADD_VERTEX:
            open_vertex[u.u] = i
        elif u.kind is UpdateKind.DEL_VERTEX and u.u in open_vertex:
            dead.update((i, open_vertex.pop(u.u)))
        elif u.kind is UpdateKind.ADD_EDGE and u.eid is not None:
            open_edge[u.eid] = i
        elif u.kind is UpdateKind.DEL_EDGE and u.eid in open_edge:
            dead.update((i, open_edge.pop(u.eid)))
    return [u for i, u in enumerate(units) if i not in dead]


def snapshot(obj: Any, g: DynGraph) -> Any:
    """Deep copy that keeps sharing the fresh-vertex pool."""
    return copy.deepcopy(obj, {id(g.pool): g.pool})


# ═══════════════════════════════════════════════════════════════
# Wrapper
# ═══════════════════════════════════════════════════════════════

@dataclass
class Slot:
    obj: OnlineBatch
    chain: tuple[int, ...] = ()
    snaps: dict[int, Any] = field(default_factory=dict)


class FullyDynWrapper:
    """Feeds unit updates to an online-batch structure through a digit schedule."""

    def __init__(self, factory: Factory, g0: DynGraph, scheduler: DigitScheduler) -> None:
        self.factory = factory
        self.scheduler = scheduler
        self.g = g0.copy()
        self.units: list[Unit] = []
        self.slots: list[Slot] = []
        self.current = 0
        self.executed = 0
        self.restarts = 0
        self.work: list[int] = []
        self._restart()

    def _restart(self) -> None:
        base = self.factory(self.g)
        self.units = []
        self.slots = []
        for _ in range(self.scheduler.instances):
            self.slots.append(Slot(snapshot(base, self.g), (), {0: base}))
        self.current = 0
        self.executed = 0
        self.restarts += 1
        logger.info("fully dynamic wrapper restarted (%d instances)", len(self.slots))

    @property
    def designated(self) -> OnlineBatch:
        return self.slots[self.current].obj

    def update(self, unit: Unit) -> OnlineBatch:
        """Apply one unit update; returns the instance that now reflects the graph."""
        self.units.extend(apply_units_inplace(self.g, [unit]))
        i = len(self.units)
        if i > self.scheduler.capacity:
            self._restart()
            self.work.append(self.g.size())
            return self.designated
        plan = self.scheduler.plan(i)
        best = max(range(len(self.slots)), key=lambda s: (common_prefix(self.slots[s].chain, plan), -s))
        slot = self.slots[best]
        k = common_prefix(slot.chain, plan)
        keep = (0,) + plan[:k]
        start = keep[-1]
        slot.snaps = {e: s for e, s in slot.snaps.items() if e in keep}
        obj = snapshot(slot.snaps[start], self.g)
        work = 0
        for end in plan[k:]:
            batch = normalize(self.units[start:end])
            obj.step(batch)
            work += len(batch)
            slot.snaps[end] = snapshot(obj, self.g)
            start = end
        slot.obj = obj
        slot.chain = plan
        self.current = best
        self.executed = len(plan)
        self.work.append(work)
        logger.debug("update %d: instance %d, %d executed batches, work %d", i, best, len(plan), work)
        return obj

    def in_sync(self) -> bool:
        g = self.designated.g
        return g.vertices == self.g.vertices and g.edges == self.g.edges and g.terminals == self.g.terminals


# ═══════════════════════════════════════════════════════════════
# Operation wrapper
# ═══════════════════════════════════════════════════════════════

def fully_dynamic(
    factory: Factory,
    g0: DynGraph,
    stream: Iterable[Unit],
    scheduler: Optional[DigitScheduler] = None,
) -> Iterator[tuple[Unit, OnlineBatch, FullyDynWrapper]]:
    """Yield (unit, designated instance, wrapper) after every unit update."""
    wrapper = FullyDynWrapper(factory, g0, scheduler or RotatingScheduler.for_sensitivity(max(g0.n, 2) ** 2, 2))
    for unit in stream:
        yield unit, wrapper.update(unit), wrapper


__all__ = [
    "DigitScheduler",
    "FullyDynWrapper",
    "OnlineBatch",
    "RotatingScheduler",
    "Slot",
    "common_prefix",
    "fully_dynamic",
    "normalize",
    "snapshot",
]
