"""Multicommodity maxflow against the path-enumeration LP."""

from __future__ import annotations

import random

import pytest

from lcoracle.brute import exact_mcf_lp
from lcoracle.errors import BackendFailure, PreconditionViolated, UnknownVertex
from lcoracle.graph import DynGraph
from lcoracle.multiflow import (
    EPS,
    ExactBackend,
    FlowInstance,
    OracleBackend,
    make_backend,
    mwu_multiflow,
)
from tests.conftest import clique_graph


def _bowtie() -> DynGraph:
    """Two pairs, (0, 2) and (3, 4), whose only paths cross vertex 1."""
    return DynGraph.from_edges([(0, 1, 1), (1, 2, 1), (3, 1, 1), (1, 4, 1)])


def _assert_within(inst: FlowInstance, value: float, alpha: float = 1.0) -> None:
    opt = exact_mcf_lp(inst.g, inst.pairs)
    assert value <= opt + EPS
    assert value >= opt / ((1 + 100 * inst.delta) * alpha ** 2) - EPS


# ─── Exact backend ──────────────────────────────────────────────

def test_single_edge_small_delta() -> None:
    inst = FlowInstance(DynGraph.from_edges([(0, 1, 1)]), [(0, 1)], delta=0.01)
    res = mwu_multiflow(inst)
    assert res.feasible
    assert res.dual_ok
    assert not res.rescaled
    _assert_within(inst, res.value)


def test_shared_cut_vertex() -> None:
    inst = FlowInstance(_bowtie(), [(0, 2), (3, 4)], delta=0.05)
    res = mwu_multiflow(inst)
    assert exact_mcf_lp(inst.g, inst.pairs) == pytest.approx(1.0)
    assert res.ok
    assert res.load[1] * res.eta <= 1 + EPS
    _assert_within(inst, res.value)


def test_clique_with_two_pairs() -> None:
    inst = FlowInstance(clique_graph(4), [(0, 1), (2, 3)], delta=0.05)
    res = mwu_multiflow(inst)
    assert res.ok
    _assert_within(inst, res.value)
    assert all(len(set(p)) == len(p) for p in res.paths)


def test_disconnected_pair_carries_nothing() -> None:
    inst = FlowInstance(DynGraph.from_edges([(0, 1, 1), (2, 3, 1)]), [(0, 2)], delta=0.05)
    res = mwu_multiflow(inst)
    assert res.value == 0
    assert res.routed == 0
    assert res.phases > 0
    assert res.dual_ok


def test_flow_amounts_match_the_value() -> None:
    inst = FlowInstance(_bowtie(), [(0, 2), (3, 4)], delta=0.05)
    res = mwu_multiflow(inst)
    assert sum(res.flow().values()) == pytest.approx(res.value)
    assert res.as_dict()["paths"] == len(res.paths)


# ─── Random instances ───────────────────────────────────────────

def _random_instance(seed: int) -> FlowInstance:
    """Connected graph on 5–8 vertices with one to three pairs."""
    rng = random.Random(seed)
    n = rng.randint(5, 8)
    edges = [(rng.randrange(v), v, 1) for v in range(1, n)]
    for _ in range(rng.randint(0, n)):
        u, v = rng.sample(range(n), 2)
        edges.append((u, v, 1))
    pairs = [tuple(rng.sample(range(n), 2)) for _ in range(rng.randint(1, 3))]
    return FlowInstance(DynGraph.from_edges(edges), pairs, delta=0.1)


@pytest.mark.parametrize("seed", range(15))
def test_random_instances_match_the_lp(seed: int) -> None:
    inst = _random_instance(seed)
    res = mwu_multiflow(inst)
    assert res.ok
    assert res.value > 0
    _assert_within(inst, res.value)


# ─── Validation and backends ────────────────────────────────────

def test_delta_out_of_range() -> None:
    with pytest.raises(PreconditionViolated):
        mwu_multiflow(FlowInstance(_bowtie(), [(0, 2)], delta=0.0))


def test_unknown_pair_endpoint() -> None:
    with pytest.raises(UnknownVertex):
        mwu_multiflow(FlowInstance(_bowtie(), [(0, 9)], delta=0.05))


def test_unknown_backend_name() -> None:
    with pytest.raises(PreconditionViolated):
        make_backend("bogus")


class LoopingBackend(ExactBackend):
    def path(self, s: int, t: int):
        return (s, t, s, t)


def test_non_simple_backend_path_is_rejected() -> None:
    inst = FlowInstance(DynGraph.from_edges([(0, 1, 1)]), [(0, 1)], delta=0.05)
    with pytest.raises(BackendFailure):
        mwu_multiflow(inst, LoopingBackend())


def test_oracle_backend_stays_feasible(small_params) -> None:
    inst = FlowInstance(DynGraph.from_edges([(0, 1, 1)]), [(0, 1)], delta=0.3)
    backend = OracleBackend(small_params)
    res = mwu_multiflow(inst, backend)
    assert res.backend == "oracle"
    assert res.feasible
    assert res.value > 0
    assert res.observed_alpha >= 1
    assert 0 < backend.updates <= res.routed
