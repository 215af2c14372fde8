"""Blockers, LocalFlow, matching rounding and cutmatch."""

from __future__ import annotations

import logging
import math
import random

import pytest

from lcoracle.brute import exact_hflow, fractional_cut_feasible, unblocked_paths
from lcoracle.errors import PreconditionViolated
from lcoracle.graph import DynGraph
from lcoracle.lcflow import (
    FlowNet,
    base_blocker,
    cutmatch,
    dump_flow,
    lightest_path,
    local_blocker,
    local_flow,
    round_matching,
    verify_cutmatch,
)
from lcoracle.params import DEFAULT_PARAMS
from tests.conftest import path_graph

S, T = -1, -2


def _three_route_net() -> FlowNet:
    return FlowNet.from_arcs(S, T, [
        (S, 10, 1, 2), (10, T, 1, 1),
        (S, 11, 1, 1), (11, T, 1, 3),
        (S, 12, 2, 1), (12, T, 2, 1),
    ])


# ─── Blockers ───────────────────────────────────────────────────

def test_lightest_path_honours_length_bound() -> None:
    net = _three_route_net()
    w = {aid: 0.5 for aid in net.arcs}
    path, weight = lightest_path(net, w, 2)
    assert weight == pytest.approx(1.0)
    assert sum(net.arcs[a].length for a in path) <= 2
    assert lightest_path(net, w, 1) == (None, float("inf"))


def test_base_blocker_leaves_no_light_unsaturated_path() -> None:
    net = _three_route_net()
    w = {aid: 0.5 for aid in net.arcs}
    flow = base_blocker(net, 2, 0.1, 1.0, w)
    assert flow.value == pytest.approx(2.0)
    assert flow.feasible(net, 2)
    assert unblocked_paths(net, flow.arc_flow(), w, 2, 1.1) == []
    for path, _ in flow.paths:
        assert flow.path_weight(path, w) <= 1.1 + 1e-9


def test_base_blocker_rejects_lambda_above_lightest() -> None:
    net = _three_route_net()
    w = {aid: 0.5 for aid in net.arcs}
    with pytest.raises(PreconditionViolated):
        base_blocker(net, 2, 0.1, 1.5, w)


def test_local_blocker_stays_local() -> None:
    net = FlowNet.from_arcs(S, T, [
        (S, 0, 1, 1), (0, T, 1, 1), (0, 1, 1, 1), (1, T, 1, 1),
        (20, 21, 1, 1), (21, T, 1, 1),
    ])
    w = {aid: 0.0 if net.arcs[aid].head == T else 0.5 for aid in net.arcs}
    res = local_blocker(net, 3, 0.1, 0.5, w)
    assert res.flow.value == pytest.approx(1.0)
    for seen in res.visited:
        assert not seen & {20, 21}
    assert unblocked_paths(net, res.flow.arc_flow(), w, 3, 0.55) == []


def test_local_blocker_requires_unit_sink_arcs() -> None:
    net = FlowNet.from_arcs(S, T, [(S, 0, 1, 1), (0, T, 2, 1)])
    with pytest.raises(PreconditionViolated):
        local_blocker(net, 3, 0.1, 0.1, {0: 0.5, 1: 0.0})


# ─── LocalFlow ──────────────────────────────────────────────────

def test_local_flow_single_path() -> None:
    net = FlowNet.from_arcs(S, T, [(S, 0, 1, 1), (0, T, 1, 1)])
    res = local_flow(net, 2, 0.5)
    assert res.flow.feasible(net, 2)
    assert 0 < res.value <= exact_hflow(net, 2) + 1e-9
    assert fractional_cut_feasible(net, res.w, 2)
    assert fractional_cut_feasible(net, res.w_min, 2)
    assert res.weight_invariant_ok(net)
    assert res.phase_invariant_ok()
    assert res.ratio_min(net) >= 1 - 1e-9
    assert res.ratio_ok(net)


def test_local_flow_general_net() -> None:
    net = _three_route_net()
    res = local_flow(net, 4, 0.5)
    assert res.flow.feasible(net, 4)
    assert res.value <= exact_hflow(net, 4) + 1e-9
    assert fractional_cut_feasible(net, res.w_min, 4)
    assert res.phase_invariant_ok()
    assert res.ratio_min(net) >= 1 - 1e-9
    lines = dump_flow(net, res.flow, res.w).splitlines()
    assert len(lines) == len(net.arcs)


def _parallel_routes() -> FlowNet:
    return FlowNet.from_arcs(S, T, [(S, 0, 1, 1), (0, T, 1, 1), (S, 1, 1, 1), (1, T, 1, 1)])


def test_local_flow_accepts_tiny_delta() -> None:
    net = _parallel_routes()
    res = local_flow(net, 1, 0.01)
    assert res.value == 0
    assert res.log_base < -700
    assert res.base == 0.0
    assert res.weight_invariant_ok(net)
    assert fractional_cut_feasible(net, res.w_min, 1)


def test_local_flow_keeps_invariants_at_moderate_delta() -> None:
    net = _parallel_routes()
    res = local_flow(net, 2, 0.25)
    assert res.flow.feasible(net, 2)
    assert 0 < res.value <= exact_hflow(net, 2) + 1e-9
    assert res.weight_invariant_ok(net)
    assert res.phase_invariant_ok()
    assert fractional_cut_feasible(net, res.w_min, 2)
    assert res.ratio(net) >= res.ratio_min(net) >= 1 - 1e-9
    assert res.ratio_ok(net)


def test_ratio_bound_covers_final_weights() -> None:
    net = FlowNet.from_arcs(S, T, [(S, 0, 1, 1), (0, T, 1, 1)])
    res = local_flow(net, 2, 0.5)
    assert res.ratio(net) <= 64 * math.log(3) / (6 * res.delta0)
    assert not res.ratio_ok(net, k_mwu=res.ratio(net) * 6 * res.delta0 / (2 * math.log(3)))

# ─── Random nets ────────────────────────────────────────────────

def _random_local_net(seed: int) -> FlowNet:
    """Up to 12 arcs, unit-length unit-capacity sink arcs, one per vertex at most."""
    rng = random.Random(seed)
    k = rng.randint(2, 4)
    arcs = [(S, v, rng.randint(1, 2), rng.randint(1, 2)) for v in rng.sample(range(k), rng.randint(1, k))]
    arcs += [(v, T, 1, 1) for v in rng.sample(range(k), rng.randint(1, k))]
    while len(arcs) < 12 and rng.random() < 0.8:
        u, v = rng.sample(range(k), 2)
        arcs.append((u, v, rng.randint(1, 2), rng.randint(1, 2)))
    return FlowNet.from_arcs(S, T, arcs)


def _random_weights(net: FlowNet, seed: int) -> dict[int, float]:
    rng = random.Random(seed)
    return {aid: 0.0 if a.head == T else rng.randint(1, 8) / 4 for aid, a in net.arcs.items()}


@pytest.mark.parametrize("seed", range(50))
def test_local_flow_on_random_nets(seed: int) -> None:
    net = _random_local_net(seed)
    res = local_flow(net, 4, 0.5)
    assert res.flow.feasible(net, 4)
    assert res.value <= exact_hflow(net, 4) + 1e-9
    assert fractional_cut_feasible(net, res.w_min, 4)
    assert res.weight_invariant_ok(net)
    assert res.phase_invariant_ok()
    if res.value > 0:
        assert res.ratio_min(net) >= 1 - 1e-9
        assert res.ratio_ok(net)


@pytest.mark.parametrize("seed", range(50))
def test_blockers_on_random_nets(seed: int) -> None:
    net = _random_local_net(seed)
    w = _random_weights(net, seed)
    _, lam = lightest_path(net, w, 4)
    if lam == float("inf"):
        assert base_blocker(net, 4, 0.1, 1.0, w).value == 0
        return
    flow = base_blocker(net, 4, 0.1, lam, w)
    assert flow.feasible(net, 4)
    assert unblocked_paths(net, flow.arc_flow(), w, 4, 1.1 * lam) == []
    res = local_blocker(net, 4, 0.1, lam, w)
    assert res.flow.feasible(net, 4)
    assert unblocked_paths(net, res.flow.arc_flow(), w, 4, 1.1 * lam) == []
    assert res.extra_rounds <= len(net.arcs)
    for path, _ in res.flow.paths:
        assert res.flow.path_weight(path, w) <= 1.1 * lam * (1 + 1e-9)


# ─── Rounding ───────────────────────────────────────────────────

def test_round_matching_half_integral_square() -> None:
    M = {(0, 10): 0.5, (0, 11): 0.5, (1, 10): 0.5, (1, 11): 0.5}
    out = round_matching(M)
    assert sum(out.values()) == 2
    for a in (0, 1):
        assert sum(k for (x, _), k in out.items() if x == a) == 1
    for b in (10, 11):
        assert sum(k for (_, y), k in out.items() if y == b) == 1


def test_round_matching_total_within_floor_and_ceil() -> None:
    out = round_matching({(0, 10): 0.3, (1, 11): 0.3})
    assert sum(out.values()) == 1
    assert all(k <= 1 for k in out.values())
    assert round_matching({}) == {}


# ─── Cutmatch ───────────────────────────────────────────────────

def _cutmatch_instance() -> tuple[DynGraph, list, list]:
    g = path_graph(4)
    src = [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2)]
    sink = [(2, 0), (2, 1), (2, 2), (3, 0), (3, 1)]
    return g, src, sink


def test_cutmatch_greedy_cuts_saturated_edge() -> None:
    g, src, sink = _cutmatch_instance()
    res = cutmatch(g, None, src, sink, 3, 0.5, engine="greedy")
    assert len(res.matching) == 2
    assert res.congestion <= 2
    assert res.cut == {1: 3}
    assert {1, 2} <= res.landmarks.landmarks
    report = verify_cutmatch(g, None, res, 3)
    assert report["ok"], report


def test_cutmatch_localflow_engine_keeps_contract() -> None:
    g, src, sink = _cutmatch_instance()
    res = cutmatch(g, None, src, sink, 3, 0.5, engine="localflow")
    report = verify_cutmatch(g, None, res, 3)
    assert report["ok"], report


def test_cutmatch_matches_everything_when_uncongested() -> None:
    g = path_graph(2)
    res = cutmatch(g, None, [(0, 0), (0, 1)], [(1, 0), (1, 1)], 2, 0.5)
    assert len(res.matching) == 2
    assert res.cut == {}
    assert res.src_unmatched == [] and res.sink_unmatched == []


def test_cutmatch_checks_node_counts() -> None:
    g, src, sink = _cutmatch_instance()
    with pytest.raises(PreconditionViolated):
        cutmatch(g, None, src[:1], sink[:1], 3, 0.5)


def test_cutmatch_auto_engine_is_the_default() -> None:
    g, src, sink = _cutmatch_instance()
    res = cutmatch(g, None, src, sink, 3, 0.5)
    assert res.engine == "greedy"
    assert res.within_budget
    report = verify_cutmatch(g, None, res, 3)
    assert report["ok"], report
    assert report["within_budget"]
    assert report["k_cm"] == DEFAULT_PARAMS.k_cm
    assert report["cut_ratio"] == pytest.approx(3 / (0.5 * 3 * 5))


def test_cutmatch_auto_engine_tries_localflow_over_budget(caplog) -> None:
    g, src, sink = _cutmatch_instance()
    params = DEFAULT_PARAMS.replace(k_cm=0.01)
    with caplog.at_level(logging.INFO, logger="lcoracle.lcflow"):
        res = cutmatch(g, None, src, sink, 3, 0.5, params)
    assert res.engine in ("greedy", "localflow")
    assert res.k_cm == 0.01
    assert "over K_CM" in caplog.text
    report = verify_cutmatch(g, None, res, 3)
    assert report["ok"], report
    greedy = cutmatch(g, None, src, sink, 3, 0.5, engine="greedy")
    assert sum(res.cut.values()) <= sum(greedy.cut.values())


def _random_cutmatch_instance(seed: int) -> tuple[DynGraph, list, list, int]:
    """Random sparse graph on 4–7 vertices, deg + 1 nodes per vertex split into src and sink."""
    rng = random.Random(seed)
    n = rng.randint(4, 7)
    edges = [(rng.randrange(v), v, rng.randint(1, 2)) for v in range(1, n)]
    for _ in range(rng.randint(0, 2)):
        u, v = rng.sample(range(n), 2)
        edges.append((u, v, rng.randint(1, 2)))
    g = DynGraph.from_edges(edges)
    src, sink = [], []
    for v in sorted(g.vertices):
        for i in range(g.degree(v) + 1):
            (src if rng.random() < 0.5 else sink).append((v, i))
    return g, src, sink, rng.randint(2, 3)


@pytest.mark.parametrize("seed", range(30))
def test_cutmatch_on_random_graphs(seed: int) -> None:
    g, src, sink, h_cm = _random_cutmatch_instance(seed)
    engine = ("greedy", "localflow", "auto")[seed % 3]
    res = cutmatch(g, None, src, sink, h_cm, 0.5, engine=engine)
    report = verify_cutmatch(g, None, res, h_cm)
    assert report["ok"], report
    assert res.engine == engine or engine == "auto"
    assert len(res.src_matched) + len(res.src_unmatched) == len(src)
    assert res.congestion <= 2 or engine != "greedy"
