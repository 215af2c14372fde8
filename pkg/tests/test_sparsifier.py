"""Vertex sparsifiers: star union, heavy edges, dynamic sync and path unfolding."""

from __future__ import annotations

import pytest

from lcoracle.certified_ed import dense_init
from lcoracle.errors import BatchTooLarge, EndpointNotTerminal, PreconditionViolated
from lcoracle.graph import FRESH_BASE, DynGraph, Unit, UpdateKind, Walk, dist_exact, shortest_path
from lcoracle.sparsifier import (
    Sparsifier,
    bounded_sparsifier_maintain,
    dynamic_sparsifier_step,
    static_sparsifier,
    unfold_path,
)
from tests.conftest import path_graph


def _path4(small_params) -> Sparsifier:
    return Sparsifier.create(path_graph(4), {0, 1, 2, 3}, 2, small_params.phi, small_params)


# ─── Construction ───────────────────────────────────────────────

def test_all_terminals_pass_the_audit(small_params) -> None:
    sp = _path4(small_params)
    report = sp.audit()
    assert report["ok"], report
    assert {0, 1, 2, 3} <= sp.tbar
    assert all(c >= FRESH_BASE for c in sp.H.vertices - sp.tbar)


def test_adjacent_terminals_meet_through_a_level_one_star(small_params) -> None:
    sp = Sparsifier.create(path_graph(2), {0, 1}, 2, small_params.phi, small_params)
    assert not sp.heavy
    assert dist_exact(sp.H, 0, 1) == 4
    assert sp.audit()["alpha_up"] == 4


def test_no_terminals_and_no_cut_gives_empty_h(small_params) -> None:
    sp = Sparsifier.create(path_graph(4), set(), 2, small_params.phi, small_params)
    assert sp.H.n == 0
    assert sp.audit()["ok"]


def test_level_count_follows_h(small_params) -> None:
    sp = _path4(small_params)
    assert len(sp.eds) == small_params.sparsifier_levels(2)
    assert [ed.h for ed in sp.eds] == [2, 4]


def test_static_from_given_eds(small_params) -> None:
    g = path_graph(4)
    g.terminals = {0, 3}
    eds = [dense_init(g, 2, small_params.phi, small_params), dense_init(g, 4, small_params.phi, small_params)]
    sp = static_sparsifier(g, {0, 3}, eds)
    assert {0, 3} <= sp.tbar
    assert sp.audit()["ok"]


def test_real_diameters_one_row_per_level(small_params) -> None:
    sp = _path4(small_params)
    rows = sp.real_diameters()
    assert [row["level"] for row in rows] == list(range(len(sp.eds)))
    for row, ed in zip(rows, sp.eds):
        assert row["bound"] == ed.cover.h_diam * small_params.real_diam_slack
        assert row["ok"] == (row["diam"] <= row["bound"])


def test_static_rejects_an_ed_without_a_cover(small_params) -> None:
    g = path_graph(4)
    ed = dense_init(g, 2, small_params.phi, small_params)
    for cid in list(ed.cover.clusters):
        ed.cover.drop_cluster(cid)
    with pytest.raises(PreconditionViolated, match="valid cover"):
        static_sparsifier(g, {0, 3}, [ed])


def test_static_rejects_an_ed_on_another_graph(small_params) -> None:
    ed = dense_init(path_graph(5), 2, small_params.phi, small_params)
    with pytest.raises(PreconditionViolated, match="different graph"):
        static_sparsifier(path_graph(4), {0, 3}, [ed])


def test_static_without_levels_is_empty() -> None:
    sp = static_sparsifier(path_graph(3), {0, 2}, [])
    assert sp.H.n == 0


def test_dump_tags_every_edge(small_params) -> None:
    sp = _path4(small_params)
    lines = sp.dump().splitlines()
    assert len(lines) == sp.H.m
    assert all(" star " in line or " heavy " in line for line in lines)


# ─── Updates ────────────────────────────────────────────────────

def test_edge_insertion_becomes_heavy(small_params) -> None:
    sp = _path4(small_params)
    _, out = dynamic_sparsifier_step(sp, [Unit(UpdateKind.ADD_EDGE, 0, 3, 1)])
    eid = max(sp.g.edges)
    assert eid in sp.heavy
    assert any(u.kind is UpdateKind.ADD_EDGE for u in out)
    assert dist_exact(sp.H, 0, 3) == 1
    assert sp.audit()["ok"]


def test_edge_deletion_keeps_audit(small_params) -> None:
    sp = _path4(small_params)
    sp.step([Unit(UpdateKind.DEL_EDGE, 1, 2)])
    report = sp.audit()
    assert report["ok"], report
    assert dist_exact(sp.H, 0, 3) == float("inf")


def test_terminal_insertion_extends_tbar(small_params) -> None:
    sp = Sparsifier.create(path_graph(4), {0}, 2, small_params.phi, small_params)
    sp.step([Unit(UpdateKind.ADD_TERMINAL, 3)])
    assert 3 in sp.terminals and 3 in sp.tbar
    assert sp.audit()["ok"]


def test_terminal_deletion_keeps_tbar(small_params) -> None:
    sp = _path4(small_params)
    sp.step([Unit(UpdateKind.DEL_TERMINAL, 2)])
    assert 2 not in sp.terminals
    assert 2 in sp.tbar


def test_oversized_batch_is_rejected(small_params) -> None:
    sp = _path4(small_params)
    units = [Unit(UpdateKind.DEL_EDGE, i, i + 1) for i in range(3)]
    with pytest.raises(BatchTooLarge):
        sp.step(units)


def test_maintain_outlives_the_ed_budget(small_params) -> None:
    stream = [
        [Unit(UpdateKind.ADD_EDGE, 0, 3, 2)],
        [Unit(UpdateKind.DEL_EDGE, 1, 2)],
        [Unit(UpdateKind.DEL_TERMINAL, 1)],
    ]
    states = []
    for sp in bounded_sparsifier_maintain(path_graph(4), stream, {0, 1, 2, 3}, 2, small_params.phi, small_params):
        states.append(sp.audit()["ok"])
    assert states == [True] * 4


# ─── Unfolding ──────────────────────────────────────────────────

def test_unfold_star_path(small_params) -> None:
    sp = _path4(small_params)
    walk = shortest_path(sp.H, 0, 3)
    assert walk is not None
    out = unfold_path(sp, walk)
    assert out.is_valid(sp.g)
    assert (out.start, out.end) == (0, 3)
    assert out.hops >= walk.hops // 2


def test_unfold_heavy_edge(small_params) -> None:
    sp = _path4(small_params)
    sp.step([Unit(UpdateKind.ADD_EDGE, 0, 3, 1)])
    eid = max(sp.g.edges)
    heid = sp.heavy[eid]
    e = sp.H.edges[heid]
    out = sp.unfold(Walk((e.u, e.v), (heid,)))
    assert out.eids == (eid,)


def test_unfold_rejects_center_endpoint(small_params) -> None:
    sp = _path4(small_params)
    center = next(iter(sp.centers.values()))
    with pytest.raises(EndpointNotTerminal):
        sp.unfold(Walk.trivial(center))


def test_unfold_trivial_walk() -> None:
    sp = Sparsifier(DynGraph.from_edges([(0, 1, 1)]), {0}, 1)
    sp.sync()
    assert sp.unfold(Walk.trivial(0)) == Walk.trivial(0)
