"""Distance oracles: low-distance answers, stacked estimates, simple paths."""

from __future__ import annotations

import math

import pytest

from lcoracle.brute import all_pairs
from lcoracle.errors import QueryWasFar, UnknownVertex
from lcoracle.graph import INF, DynGraph, Unit, UpdateKind, apply_units_inplace, dist_exact
from lcoracle.oracle import (
    Answer,
    LowDistOracle,
    OracleStack,
    SimplePathOracle,
    fully_dynamic,
    ldo_path,
    ldo_query,
    obo_query,
    oracle_wrapper,
    perturbed,
    perturbed_length,
    query_line,
    simple_path,
)
from lcoracle.params import DEFAULT_PARAMS
from lcoracle.schedule import DigitScheduler
from tests.conftest import path_graph, random_stream


def _two_pieces() -> DynGraph:
    return DynGraph.from_edges([(0, 1, 1), (2, 3, 1)])


# ─── Low-distance oracle ────────────────────────────────────────


def test_same_vertex_is_close(small_params) -> None:
    ldo = LowDistOracle.create(path_graph(3), 2, small_params.phi, small_params)
    assert ldo_query(ldo, 1, 1) is Answer.CLOSE
    assert ldo_path(ldo, 1, 1).vertices == (1,)


def test_unknown_vertex_raises(small_params) -> None:
    ldo = LowDistOracle.create(path_graph(3), 2, small_params.phi, small_params)
    with pytest.raises(UnknownVertex):
        ldo.query(0, 99)


def test_disconnected_pair_is_far(small_params) -> None:
    ldo = LowDistOracle.create(_two_pieces(), 4, small_params.phi, small_params)
    assert ldo.query(0, 2) is Answer.FAR
    with pytest.raises(QueryWasFar):
        ldo.path(0, 2)


def test_ldo_audit_on_a_path(small_params) -> None:
    ldo = LowDistOracle.create(path_graph(4), 2, small_params.phi, small_params)
    report = ldo.audit()
    assert report["ok"], report
    assert report["touches"] > 0


def test_close_paths_join_the_endpoints(small_params) -> None:
    g = path_graph(4)
    ldo = LowDistOracle.create(g, 2, small_params.phi, small_params)
    assert ldo.query(0, 1) is Answer.CLOSE
    walk = ldo.path(0, 1)
    assert (walk.start, walk.end) == (0, 1)
    assert walk.is_valid(g)


@pytest.fixture(scope="module")
def long_path_ldo() -> LowDistOracle:
    return LowDistOracle.create(path_graph(80), 1, DEFAULT_PARAMS.phi, DEFAULT_PARAMS)


def test_long_path_is_never_far_within_h(long_path_ldo) -> None:
    report = long_path_ldo.audit()
    assert report["far_violations"] == []
    assert report["bad_paths"] == []
    assert report["ok"], report


def test_neighbours_on_a_long_path_are_close(long_path_ldo) -> None:
    for u in range(0, 79, 7):
        assert long_path_ldo.query(u, u + 1) is Answer.CLOSE
        walk = long_path_ldo.path(u, u + 1)
        assert (walk.start, walk.end) == (u, u + 1)
    assert long_path_ldo.stretch >= 1


# ─── Stacked oracle ─────────────────────────────────────────────


def test_stack_has_a_row_per_graph(small_params) -> None:
    stack = OracleStack.create(path_graph(3), small_params.phi, small_params)
    assert len(stack.ldos) == small_params.max_stack
    assert stack.ybar == 3
    assert [ldo.h for ldo in stack.ldos[0]] == [1, 2, 4, 8]


def test_estimates_are_sound(small_params) -> None:
    g = path_graph(4)
    stack = OracleStack.create(g, small_params.phi, small_params)
    exact = all_pairs(g)
    for u in range(4):
        for v in range(4):
            est = stack.query(u, v)
            assert est.d is not None
            assert est.d >= exact[u][v]
            assert (est.path.start, est.path.end) == (u, v)


def test_stack_audit_passes(small_params) -> None:
    report = OracleStack.create(path_graph(4), small_params.phi, small_params).audit()
    assert report["ok"], report
    assert report["alpha"] >= 1


def test_disconnected_estimate(small_params) -> None:
    stack = OracleStack.create(_two_pieces(), small_params.phi, small_params)
    est = stack.query(1, 3)
    assert est.disconnected
    assert obo_query(stack, 1, 3) is None
    assert est.as_dict()["path"] is None


def test_self_query_is_zero(small_params) -> None:
    stack = OracleStack.create(path_graph(3), small_params.phi, small_params)
    assert obo_query(stack, 2, 2) == 0


def test_stack_follows_a_batch(small_params) -> None:
    stack = OracleStack.create(path_graph(4), small_params.phi, small_params)
    stack.step([Unit(UpdateKind.ADD_EDGE, 0, 3, 1)])
    est = stack.query(0, 3)
    assert est.d is not None and est.d >= 1
    assert est.path.is_valid(stack.g)
    assert stack.audit()["ok"]


def test_estimate_is_the_scaled_record(path6, small_params) -> None:
    stack = OracleStack.create(path6, small_params.phi, small_params)
    for u in range(6):
        for v in range(u + 1, 6):
            est = stack.query(u, v)
            length = est.path.length(stack.g)
            assert est.d >= length >= dist_exact(path6, u, v)
            if est.fallback:
                assert est.d == length
                continue
            assert est.a_cfg == stack.a_cfg(est.x, est.y)
            assert est.d == max(math.ceil(est.scale * est.a_cfg), length)
            assert est.as_dict()["a_cfg"] == est.a_cfg


def test_self_query_carries_unit_record(small_params) -> None:
    est = OracleStack.create(path_graph(3), small_params.phi, small_params).query(1, 1)
    assert est.a_cfg == 1.0
    assert est.d == 0


@pytest.fixture(scope="module")
def long_path_stack() -> OracleStack:
    return OracleStack.create(path_graph(80), DEFAULT_PARAMS.phi, DEFAULT_PARAMS)


def test_long_path_stack_keeps_connectivity(long_path_stack) -> None:
    est = long_path_stack.query(0, 50)
    assert not est.disconnected
    assert est.d >= 50
    assert est.path.is_valid(long_path_stack.g)
    assert (est.path.start, est.path.end) == (0, 50)
    assert est.path.length(long_path_stack.g) <= est.d
    if not est.fallback:
        assert est.a_cfg is not None and est.a_cfg > 0


def test_long_path_stack_audit(long_path_stack) -> None:
    report = long_path_stack.audit()
    assert report["connectivity"] == []
    assert report["unsound"] == []
    assert report["exceeded"] == []
    assert report["ok"], report


# ─── Simple paths ───────────────────────────────────────────────


def test_perturbed_lengths_keep_edge_ids() -> None:
    g = path_graph(3, length=2)
    out = perturbed(g, 4, 3)
    assert out.edges.keys() == g.edges.keys()
    assert {e.length for e in out.edges.values()} == {20}
    assert out.vertices == g.vertices


@pytest.mark.parametrize(
    ("length", "d", "L", "expected"),
    [(1, 1, 1, 4), (2, 4, 3, 20), (3, 1, 2, 14), (1, 3, 2, 10), (5, 8, 4, 56)],
)
def test_perturbed_length(length: int, d: int, L: int, expected: int) -> None:
    assert perturbed_length(length, d, L) == expected


def test_perturbed_lengths_are_even_and_grow_with_length() -> None:
    values = [perturbed_length(length, 3, 4) for length in range(1, 8)]
    assert all(x % 2 == 0 for x in values)
    assert values == sorted(set(values))


def test_simple_path_is_simple_and_valid(small_params) -> None:
    params = small_params.replace(eps=1.0)
    g = path_graph(3)
    spo = SimplePathOracle.create(g, params.phi, params)
    walk = simple_path(spo, 0, 2)
    assert walk is not None
    assert walk.is_simple()
    assert walk.is_valid(spo.g)
    assert (walk.start, walk.end) == (0, 2)
    assert spo.phases


def test_simple_path_none_when_disconnected(small_params) -> None:
    params = small_params.replace(eps=1.0)
    spo = SimplePathOracle.create(_two_pieces(), params.phi, params)
    assert spo.path(0, 3) is None


def test_simple_path_grid_follows_updates(small_params) -> None:
    params = small_params.replace(eps=1.0)
    spo = SimplePathOracle.create(path_graph(3), params.phi, params)
    spo.path(0, 2)
    built = set(spo.grid)
    spo.step([Unit(UpdateKind.ADD_EDGE, 0, 2, 1)])
    assert set(spo.grid) == built
    for stack in spo.grid.values():
        assert stack.g.edges.keys() == spo.g.edges.keys()
    walk = spo.path(0, 2)
    assert walk is not None and walk.is_simple()


# ─── Fully dynamic oracle ───────────────────────────────────────


def test_fully_dynamic_answers_stay_sound(small_params) -> None:
    g = path_graph(4)
    stream = [
        Unit(UpdateKind.ADD_EDGE, 0, 3, 1),
        Unit(UpdateKind.DEL_EDGE, 1, 2),
        Unit(UpdateKind.DEL_EDGE, 0, 1),
    ]
    shadow = g.copy()
    for unit, stack in fully_dynamic(g, stream, small_params.phi, small_params, scheduler=DigitScheduler(2, 2)):
        apply_units_inplace(shadow, [unit])
        assert stack.g.edges.keys() == shadow.edges.keys()
        for u, v in [(0, 3), (1, 2), (0, 1)]:
            exact = dist_exact(shadow, u, v)
            d = obo_query(stack, u, v)
            if exact == INF:
                assert d is None
            else:
                assert d is not None and d >= exact


def test_wrapper_stays_sound_over_a_random_stream(small_params) -> None:
    g = path_graph(6)
    terminal_kinds = (UpdateKind.ADD_TERMINAL, UpdateKind.DEL_TERMINAL)
    stream = [u for u in random_stream(g, 40, seed=5) if u.kind not in terminal_kinds]
    wrapper = oracle_wrapper(g, small_params.phi, small_params)
    for unit in stream:
        stack = wrapper.update(unit)
        assert wrapper.in_sync()
        for u in range(6):
            for v in range(u + 1, 6):
                exact = dist_exact(wrapper.g, u, v)
                est = stack.query(u, v)
                if exact == INF:
                    assert est.disconnected
                    continue
                assert est.d is not None and est.d >= exact
                assert est.path.is_valid(wrapper.g)
                assert est.path.length(wrapper.g) <= est.d


# ─── Query log lines ────────────────────────────────────────────


@pytest.mark.parametrize(
    ("d", "exact", "line"),
    [
        (3, 2, "Q 0 1 -> 3 exact=2 ratio=1.500"),
        (None, INF, "Q 0 1 -> DISCONNECTED exact=inf ratio=1"),
        (0, 0, "Q 0 1 -> 0 exact=0 ratio=1"),
        (5, INF, "Q 0 1 -> 5 exact=inf ratio=-"),
    ],
)
def test_query_line(d, exact, line: str) -> None:
    assert query_line(0, 1, d, exact) == line
