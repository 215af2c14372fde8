"""Digit schedules and the fully dynamic wrapper."""

from __future__ import annotations

from typing import Iterable

import pytest

from lcoracle.graph import DynGraph, Unit, UpdateKind, apply_units_inplace
from lcoracle.schedule import (
    DigitScheduler,
    FullyDynWrapper,
    RotatingScheduler,
    common_prefix,
    fully_dynamic,
    normalize,
)
from tests.conftest import path_graph, random_stream


class Mirror:
    """Online-batch stand-in that only replays batches and counts them."""

    def __init__(self, g: DynGraph) -> None:
        self.g = g.copy()
        self.batches = 0

    def step(self, units: Iterable[Unit]) -> None:
        apply_units_inplace(self.g, units)
        self.batches += 1


# ─── Schedules ──────────────────────────────────────────────────

@pytest.mark.parametrize(
    ("i", "expected"),
    [(0, ()), (1, (1,)), (4, (4,)), (6, (4, 6)), (7, (4, 6, 7))],
)
def test_binary_plan(i: int, expected: tuple[int, ...]) -> None:
    assert DigitScheduler(2, 3).plan(i) == expected


def test_plan_rejects_counts_past_capacity() -> None:
    sched = DigitScheduler(3, 2)
    assert sched.capacity == 8
    with pytest.raises(ValueError):
        sched.plan(9)


def test_consecutive_plans_share_all_but_one_batch() -> None:
    sched = DigitScheduler(3, 3)
    for i in range(1, sched.capacity + 1):
        before, after = sched.plan(i - 1), sched.plan(i)
        assert len(after) - common_prefix(before, after) == 1


def test_scheduler_sizes() -> None:
    assert DigitScheduler.for_graph(16, 0.5) == DigitScheduler(4, 4)
    rot = RotatingScheduler.for_sensitivity(36, 2)
    assert (rot.base, rot.digits, rot.instances) == (6, 2, 4)


# ─── Normalization ──────────────────────────────────────────────

def test_normalize_cancels_terminal_toggles() -> None:
    units = [Unit(UpdateKind.ADD_TERMINAL, 1), Unit(UpdateKind.DEL_TERMINAL, 1), Unit(UpdateKind.ADD_TERMINAL, 2)]
    assert normalize(units) == [Unit(UpdateKind.ADD_TERMINAL, 2)]


def test_normalize_cancels_short_lived_edges() -> None:
    units = [Unit(UpdateKind.ADD_EDGE, 0, 1, 1, eid=9), Unit(UpdateKind.DEL_EDGE, 0, 1, 1, eid=9)]
    assert normalize(units) == []


# ─── Wrapper ────────────────────────────────────────────────────

def test_single_update_is_reflected() -> None:
    wrapper = FullyDynWrapper(Mirror, path_graph(3), DigitScheduler(2, 2))
    inst = wrapper.update(Unit(UpdateKind.ADD_EDGE, 0, 2, 1))
    assert wrapper.in_sync()
    assert inst.batches == 1


@pytest.mark.parametrize("scheduler", [DigitScheduler(2, 3), RotatingScheduler(3, 2)])
def test_designated_instance_tracks_the_graph(scheduler: DigitScheduler) -> None:
    g = path_graph(5)
    stream = random_stream(g, 40, seed=7)
    for _, inst, wrapper in fully_dynamic(Mirror, g, stream, scheduler):
        assert wrapper.in_sync()
        assert wrapper.executed <= scheduler.digits
        assert inst is wrapper.designated
    assert wrapper.restarts >= 2


def test_rotating_schedule_uses_several_instances() -> None:
    g = path_graph(4)
    wrapper = FullyDynWrapper(Mirror, g, RotatingScheduler(2, 2))
    seen = set()
    for unit in random_stream(g, 3, seed=1):
        wrapper.update(unit)
        seen.add(wrapper.current)
    assert wrapper.in_sync()
    assert len(seen) >= 1
    assert len(wrapper.slots) == 4


def test_long_stream_at_sensitivity_schedule() -> None:
    g = path_graph(12)
    scheduler = RotatingScheduler.for_sensitivity(g.n ** 2, 2)
    assert scheduler.digits == 2
    last = None
    for _, inst, wrapper in fully_dynamic(Mirror, g, random_stream(g, 200, seed=11), scheduler):
        assert wrapper.in_sync()
        assert wrapper.executed <= scheduler.digits
        assert inst is wrapper.designated
        last = wrapper
    assert last is not None
    assert last.restarts >= 2
    assert len(last.slots) == scheduler.instances
