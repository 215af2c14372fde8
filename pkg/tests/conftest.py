"""Shared tiny graphs for the test suite.

Most instances stay small enough for the exhaustive oracles in
lcoracle.brute (path enumeration caps out at 14 edges). The long paths
used against default parameters only need all-pairs Dijkstra.
"""

from __future__ import annotations

import random

import pytest

from lcoracle.graph import DynGraph, Unit, UpdateKind, apply_units_inplace
from lcoracle.params import GlobalParams


def path_graph(n: int, length: int = 1) -> DynGraph:
    return DynGraph.from_edges([(i, i + 1, length) for i in range(n - 1)])


def cycle_graph(n: int, length: int = 1) -> DynGraph:
    return DynGraph.from_edges([(i, (i + 1) % n, length) for i in range(n)])


def grid_graph(rows: int, cols: int) -> DynGraph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, 1))
            if r + 1 < rows:
                edges.append((v, v + cols, 1))
    return DynGraph.from_edges(edges)


def clique_graph(n: int, length: int = 1) -> DynGraph:
    return DynGraph.from_edges([(i, j, length) for i in range(n) for j in range(i + 1, n)])


def random_stream(g: DynGraph, count: int, seed: int) -> list[Unit]:
    """Valid unit updates against a private replay of g."""
    rng = random.Random(seed)
    shadow = g.copy()
    out: list[Unit] = []
    while len(out) < count:
        verts = sorted(shadow.vertices)
        roll = rng.random()
        if roll < 0.4 and shadow.edges:
            e = shadow.edges[rng.choice(sorted(shadow.edges))]
            unit = Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=e.eid)
        elif roll < 0.8:
            u, v = rng.sample(verts, 2)
            unit = Unit(UpdateKind.ADD_EDGE, u, v, rng.randint(1, 3))
        else:
            v = rng.choice(verts)
            kind = UpdateKind.DEL_TERMINAL if v in shadow.terminals else UpdateKind.ADD_TERMINAL
            unit = Unit(kind, v)
        apply_units_inplace(shadow, [unit])
        out.append(unit)
    return out


@pytest.fixture
def path6() -> DynGraph:
    return path_graph(6)


@pytest.fixture
def cycle6() -> DynGraph:
    return cycle_graph(6)


@pytest.fixture
def grid3() -> DynGraph:
    return grid_graph(3, 3)


@pytest.fixture
def small_params() -> GlobalParams:
    """Parameters sized for instances of a dozen vertices."""
    return GlobalParams(
        phi=0.25,
        t=2,
        beta=2,
        router_branching=3,
        ed_budget=2,
        closure_cap=3,
        max_levels=2,
        max_stack=2,
        sparsifier_level_factor=2,
    )


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Point the JSON config at an empty temp dir for every test."""
    from lcoracle import core

    config_file = tmp_path / "config" / "config.json"
    monkeypatch.setattr(core, "CONFIG_DIR", config_file.parent)
    monkeypatch.setattr(core, "CONFIG_FILE", config_file)
    return config_file


SMALL_KV = """\
# sized for a dozen vertices
phi=0.25
t=2
beta=2
router_branching=3
ed_budget=2
closure_cap=3
max_levels=2
max_stack=2
sparsifier_level_factor=2
"""


@pytest.fixture
def small_kv(tmp_path):
    """key=value file holding the same values as `small_params`."""
    path = tmp_path / "small.kv"
    path.write_text(SMALL_KV)
    return path
