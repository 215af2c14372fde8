"""Expander hierarchy: level construction, batch propagation, reinit and unfolding."""

from __future__ import annotations

import pytest

from lcoracle.graph import Unit, UpdateKind, Walk, shortest_path
from lcoracle.hierarchy import STRETCH_UP, Level, hierarchy_init, hierarchy_step, hierarchy_unfold
from lcoracle.oracle import LowDistOracle
from lcoracle.params import DEFAULT_PARAMS
from lcoracle.sparsifier import Sparsifier
from tests.conftest import clique_graph, path_graph


def test_single_level_is_just_an_ed(path6, small_params) -> None:
    hier = hierarchy_init(path6, small_params.phi, small_params, max_levels=1)
    assert len(hier.levels) == 1
    assert hier.levels[0].sparsifier is None
    assert hier.audit()["ok"]


def test_dense_graph_stops_at_an_empty_cut(small_params) -> None:
    hier = hierarchy_init(clique_graph(4), small_params.phi, small_params)
    assert hier.first_empty_cut() == 1
    assert len(hier.levels) == 1


def test_length_schedule(small_params) -> None:
    hier = hierarchy_init(path_graph(3), small_params.phi, small_params, h=2)
    assert hier.length(1) == 2
    assert hier.length(2) == 2 * 2 * STRETCH_UP
    assert hier.bound(1) == 4


def test_empty_batch_changes_nothing(path6, small_params) -> None:
    hier = hierarchy_init(path6, small_params.phi, small_params)
    epoch = hier.g.epoch
    hierarchy_step(hier, [])
    assert hier.g.epoch == epoch
    assert not hier.reinits


def test_huge_batch_rebuilds_from_level_one(path6, small_params) -> None:
    hier = hierarchy_init(path6, small_params.phi, small_params)
    units = [Unit(UpdateKind.DEL_EDGE, i, i + 1) for i in range(4)]
    hierarchy_step(hier, units)
    assert hier.reinits[-1]["level"] == 1
    assert hier.g.m == 1
    assert hier.audit()["ok"]


def test_edge_insertion_keeps_levels_shrinking(small_params) -> None:
    hier = hierarchy_init(path_graph(5), small_params.phi, small_params)
    hierarchy_step(hier, [Unit(UpdateKind.ADD_EDGE, 0, 4, 1)])
    sizes = [level.H.size() for level in hier.levels]
    assert sizes == sorted(sizes, reverse=True)
    assert len(set(sizes)) == len(sizes)
    report = hier.audit()
    assert report["decay"]
    assert report["ok"], report


def test_small_deletion_keeps_audit(small_params) -> None:
    hier = hierarchy_init(path_graph(5), small_params.phi, small_params)
    hierarchy_step(hier, [Unit(UpdateKind.DEL_EDGE, 1, 2)])
    assert all(r["why"] == "level stopped shrinking" for r in hier.reinits)
    assert hier.audit()["ok"]


def test_unfold_to_ground(small_params) -> None:
    hier = hierarchy_init(path_graph(5), small_params.phi, small_params)
    hierarchy_step(hier, [Unit(UpdateKind.ADD_EDGE, 0, 4, 1)])
    sp = hier.levels[0].sparsifier
    if sp is None:
        with pytest.raises(IndexError):
            hierarchy_unfold(hier, 1, Walk.trivial(0))
        return
    ends = sorted(sp.tbar & sp.H.vertices)
    pairs = [(a, b) for a in ends for b in ends if a < b and shortest_path(sp.H, a, b) is not None]
    for a, b in pairs[:5]:
        walk = shortest_path(sp.H, a, b)
        out = hierarchy_unfold(hier, 1, walk)
        assert out.is_valid(hier.g)
        assert (out.start, out.end) == (a, b)
        assert hier.to_ground(2, walk) == out


def test_summary_lists_levels(small_params) -> None:
    hier = hierarchy_init(path_graph(4), small_params.phi, small_params)
    summary = hier.summary()
    assert [lvl["k"] for lvl in summary["levels"]] == [1]
    assert summary["levels"][0]["n"] == 4


# ─── Level decay ────────────────────────────────────────────────

@pytest.fixture(scope="module")
def long_path_hierarchy():
    return hierarchy_init(path_graph(80), DEFAULT_PARAMS.phi, DEFAULT_PARAMS, h=1)


def test_long_path_levels_shrink(long_path_hierarchy) -> None:
    hier = long_path_hierarchy
    assert hier.decays()
    report = hier.audit()
    assert report["decay"]
    assert report["ok"], report


def test_cut_top_is_reported_capped(long_path_hierarchy) -> None:
    top = long_path_hierarchy.levels[-1]
    assert top.sparsifier is None
    assert top.capped == bool(top.ed.cut)
    assert long_path_hierarchy.audit()["capped"] == top.capped
    assert long_path_hierarchy.summary()["levels"][-1]["capped"] == top.capped


def test_level_that_stops_shrinking_is_dropped() -> None:
    hier = hierarchy_init(path_graph(80), DEFAULT_PARAMS.phi, DEFAULT_PARAMS, h=1, max_levels=1)
    base = hier.levels[0]
    base.sparsifier = Sparsifier(hier.g, [], 1)
    base.capped = False
    bigger = path_graph(100)
    hier.levels.append(Level(2, bigger, base.ed, hier.length(2), hier.bound(2)))
    assert not hier.decays()
    hier._enforce_decay()
    assert len(hier.levels) == 1
    assert hier.levels[0].sparsifier is None
    assert hier.levels[0].capped
    assert hier.reinits[-1] == {"epoch": hier.g.epoch, "level": 2, "why": "level stopped shrinking"}
    assert hier.decays()


def test_steps_keep_levels_shrinking(small_params) -> None:
    hier = hierarchy_init(path_graph(12), small_params.phi, small_params)
    for i in range(0, 10, 3):
        hierarchy_step(hier, [Unit(UpdateKind.ADD_EDGE, i, i + 2, 1)])
        assert hier.decays()


def test_single_level_oracle_never_says_far_within_h() -> None:
    ldo = LowDistOracle(hierarchy_init(path_graph(30), DEFAULT_PARAMS.phi, DEFAULT_PARAMS, h=1, max_levels=1))
    report = ldo.audit()
    assert report["far_violations"] == []
    assert report["ok"], report
