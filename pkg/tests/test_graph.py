"""Dynamic graph, batch semantics, walks, cuts and landmarks."""

from __future__ import annotations

import pytest

from lcoracle.errors import MalformedBatch, NonIsolatedDeletion, NotAPath, UnknownVertex
from lcoracle.graph import (
    INF,
    DynGraph,
    LandmarkSet,
    Unit,
    UpdateKind,
    Walk,
    apply_batch,
    dist_exact,
    greedy_landmarks,
    landmark_violations,
    landmarks_after_deletion,
    shortest_path,
    split_batch,
    verify_landmarks,
)

from tests.conftest import path_graph

E, D, V, X, W = (
    UpdateKind.ADD_EDGE,
    UpdateKind.DEL_EDGE,
    UpdateKind.ADD_VERTEX,
    UpdateKind.DEL_VERTEX,
    UpdateKind.ADD_WEIGHT,
)


# ─── Batches ────────────────────────────────────────────────────

def test_apply_batch_leaves_input_untouched(path6: DynGraph) -> None:
    g2, realized = apply_batch(path6, [Unit(E, 0, 2, 5)])
    assert path6.m == 5
    assert g2.m == 6
    assert g2.epoch == path6.epoch + 1
    assert realized[0].eid == path6.next_eid
    assert realized[0].render() == "E 0 2 5"


def test_split_batch_uses_canonical_order() -> None:
    units = [Unit(X, 9), Unit(E, 0, 1, 1), Unit(V, 7), Unit(D, 0, 1)]
    kinds = [b.kind for b in split_batch(units)]
    assert kinds == [V, E, D, X]


def test_mixed_batch_deletes_edges_before_vertex() -> None:
    g = path_graph(3)
    g2, _ = apply_batch(g, [Unit(X, 2), Unit(D, 1, 2)])
    assert 2 not in g2.vertices
    assert g2.m == 1


def test_deleting_vertex_with_edges_raises(path6: DynGraph) -> None:
    with pytest.raises(NonIsolatedDeletion):
        apply_batch(path6, [Unit(X, 3)])


def test_retired_vertex_id_is_not_reused() -> None:
    g = DynGraph.from_edges([], vertices=[0, 1])
    g2, _ = apply_batch(g, [Unit(X, 1)])
    with pytest.raises(MalformedBatch):
        apply_batch(g2, [Unit(V, 1)])


def test_parallel_edge_deletion_takes_smallest_id() -> None:
    g = DynGraph.from_edges([(0, 1, 5), (0, 1, 2)])
    g2, realized = apply_batch(g, [Unit(D, 0, 1)])
    assert realized[0].eid == 0
    assert dist_exact(g2, 0, 1) == 2


def test_nonpositive_weight_increment_rejected(path6: DynGraph) -> None:
    with pytest.raises(MalformedBatch):
        apply_batch(path6, [Unit(W, 0, value=0)])


def test_length_outside_range_rejected(path6: DynGraph) -> None:
    with pytest.raises(MalformedBatch):
        apply_batch(path6, [Unit(E, 0, 5, 0)])
    with pytest.raises(MalformedBatch):
        apply_batch(path6, [Unit(E, 0, 5, path6.max_len + 1)])


def test_weight_batch_size_is_total_increment() -> None:
    (batch,) = split_batch([Unit(W, 0, value=3), Unit(W, 1, value=2)])
    assert batch.size == 5


# ─── Distances and walks ───────────────────────────────────────

def test_cut_lengthens_edges(path6: DynGraph) -> None:
    assert dist_exact(path6, 0, 2) == 2
    assert dist_exact(path6, 0, 2, {0: 3}) == 5


def test_disconnected_distance_is_infinite() -> None:
    g = DynGraph.from_edges([(0, 1, 1)], vertices=[2])
    assert dist_exact(g, 0, 2) == INF


def test_unknown_vertex_raises(path6: DynGraph) -> None:
    with pytest.raises(UnknownVertex):
        dist_exact(path6, 0, 99)


def test_shortest_path_is_valid_walk(path6: DynGraph) -> None:
    walk = shortest_path(path6, 0, 4)
    assert walk is not None
    assert walk.is_valid(path6)
    assert walk.length(path6) == 4
    assert walk.reverse().start == 4


def test_simple_subpath_erases_loops() -> None:
    g = DynGraph.from_edges([(0, 1, 1), (1, 2, 1), (1, 3, 1)])
    walk = Walk((0, 1, 2, 1, 3), (0, 1, 1, 2))
    assert walk.is_valid(g)
    simple = walk.simple_subpath()
    assert simple.vertices == (0, 1, 3)
    assert simple.eids == (0, 2)
    assert simple.is_simple()


def test_walk_with_wrong_edge_is_rejected(path6: DynGraph) -> None:
    with pytest.raises(NotAPath):
        Walk((0, 2), (0,)).validate(path6)


def test_concat_requires_matching_ends() -> None:
    with pytest.raises(NotAPath):
        Walk((0, 1), (0,)).concat(Walk((2, 3), (2,)))


# ─── Landmarks ──────────────────────────────────────────────────

def test_long_cut_edge_needs_both_endpoints(path6: DynGraph) -> None:
    cut = {1: 10}
    L = greedy_landmarks(path6, cut, sigma=2)
    assert {1, 2} <= L
    assert verify_landmarks(path6, cut, LandmarkSet(L, 2))
    assert landmark_violations(path6, cut, set(), 2) == [1]


def test_short_cut_edge_needs_a_nearby_landmark(path6: DynGraph) -> None:
    cut = {1: 1}
    assert not verify_landmarks(path6, cut, LandmarkSet(set(), 5))
    L = greedy_landmarks(path6, cut, sigma=5)
    assert verify_landmarks(path6, cut, LandmarkSet(L, 5))
    assert verify_landmarks(path6, cut, LandmarkSet({4}, 5))


def test_landmarks_survive_deletion_with_endpoints(path6: DynGraph) -> None:
    cut = {1: 10}
    L = LandmarkSet(greedy_landmarks(path6, cut, sigma=2), 2)
    g2, realized = apply_batch(path6, [Unit(D, 3, 4)])
    deleted = [path6.edges[u.eid] for u in realized]
    L2 = landmarks_after_deletion(L, deleted)
    assert {3, 4} <= L2.landmarks
    assert verify_landmarks(g2, cut, L2)
