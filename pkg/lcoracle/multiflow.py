"""lcoracle.multiflow — vertex-capacitated multicommodity maxflow by multiplicative weights.

Every vertex carries capacity 1. Vertex weights start at n^{-ζ} (ζ = 1/δ) and
λ climbs from the same value to 1 in (1+δ) steps. Inside a phase each pair
keeps routing a unit along an approximately shortest simple path while its
estimated distance stays within (1+δ)·α·λ, and every vertex on the path has
its weight multiplied by (1+δ). The returned flow is the path count times
η = δ²/((1+10δ)·ln n); w/λ is the matching dual.

Distances are vertex-weighted: w(P) = Σ_{v∈P} w(v). Backends see an edge
length (w(u)+w(v))/2 and add back half the endpoint weights.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import networkx as nx

from lcoracle.errors import BackendFailure, PreconditionViolated, UnknownVertex
from lcoracle.graph import INF, DynGraph, Unit, UpdateKind, apply_units_inplace
from lcoracle.oracle import SimplePathOracle
from lcoracle.params import DEFAULT_PARAMS, GlobalParams

logger = logging.getLogger(__name__)

# Slack for float comparisons against λ and the capacity of 1.
EPS = 1e-9

VertexPath = tuple[int, ...]


@dataclass
class FlowInstance:
    g: DynGraph
    pairs: list[tuple[int, int]]
    delta: float = DEFAULT_PARAMS.delta

    def validate(self) -> None:
        if not 0 < self.delta < 1:
            raise PreconditionViolated(f"delta must lie in (0, 1), got {self.delta}")
        for s, t in self.pairs:
            for x in (s, t):
                if x not in self.g.vertices:
                    raise UnknownVertex(f"pair endpoint {x} is not a vertex")


# ═══════════════════════════════════════════════════════════════
# Distance backends
# ═══════════════════════════════════════════════════════════════

class DistanceBackend(Protocol):
    name: str
    alpha: float

    def reset(self, g: DynGraph, w: Mapping[int, float], w0: float) -> None: ...

    def bump(self, vertices: Iterable[int]) -> None: ...

    def distance(self, s: int, t: int) -> float: ...

    def path(self, s: int, t: int) -> Optional[VertexPath]: ...


class ExactBackend:
    """Dijkstra on the vertex-weighted graph; α = 1."""

    name = "exact"
    alpha = 1.0

    def __init__(self) -> None:
        self.G = nx.Graph()
        self.w: Mapping[int, float] = {}

    def reset(self, g: DynGraph, w: Mapping[int, float], w0: float) -> None:
        self.G = nx.Graph()
        self.G.add_nodes_from(g.vertices)
        self.G.add_edges_from(e.ends for e in g.edges.values())
        self.w = w

    def bump(self, vertices: Iterable[int]) -> None:
        # weights are read live from the shared mapping
        return None

    def _weight(self, a: int, b: int, _data: dict) -> float:
        return (self.w[a] + self.w[b]) / 2

    def _search(self, s: int, t: int) -> tuple[float, Optional[VertexPath]]:
        if s == t:
            return self.w[s], (s,)
        try:
            length, path = nx.single_source_dijkstra(self.G, s, target=t, weight=self._weight)
        except nx.NetworkXNoPath:
            return INF, None
        return length + (self.w[s] + self.w[t]) / 2, tuple(path)

    def distance(self, s: int, t: int) -> float:
        return self._search(s, t)[0]

    def path(self, s: int, t: int) -> Optional[VertexPath]:
        return self._search(s, t)[1]


class OracleBackend:
    """The dynamic simple-path oracle on integer edge lengths.

    Vertex weights become even integers ω(v) = 2⌈w(v)/w0⌉, so edge lengths
    (ω(u)+ω(v))/2 stay integral. `alpha` is the factor the algorithm budgets
    for; `observed_alpha` is what exact side checks actually saw.
    """

    name = "oracle"

    def __init__(self, params: GlobalParams = DEFAULT_PARAMS, *, alpha: float = 4.0) -> None:
        self.params = params
        self.alpha = alpha
        self.observed_alpha = 1.0
        self.exact = ExactBackend()
        self.w: Mapping[int, float] = {}
        self.w0 = 1.0
        self.omega: dict[int, int] = {}
        self.gl = DynGraph()
        self.spo: Optional[SimplePathOracle] = None
        self.updates = 0

    def _omega(self, v: int) -> int:
        return 2 * math.ceil(self.w[v] / self.w0 - EPS)

    def reset(self, g: DynGraph, w: Mapping[int, float], w0: float) -> None:
        self.w, self.w0 = w, w0
        self.exact.reset(g, w, w0)
        self.omega = {v: self._omega(v) for v in g.vertices}
        self.gl = DynGraph(max_len=2**62, pool=g.pool)
        for v in sorted(g.vertices):
            self.gl.add_vertex(v)
        for eid in sorted(g.edges):
            e = g.edges[eid]
            self.gl.add_edge(e.u, e.v, (self.omega[e.u] + self.omega[e.v]) // 2, eid=eid)
        self.spo = SimplePathOracle.create(self.gl, self.params.phi, self.params)

    def bump(self, vertices: Iterable[int]) -> None:
        assert self.spo is not None
        changed = {v for v in set(vertices) if self._omega(v) != self.omega[v]}
        if not changed:
            return
        for v in changed:
            self.omega[v] = self._omega(v)
        touched = sorted({eid for v in changed for eid in self.gl.adj[v]})
        units: list[Unit] = []
        for eid in touched:
            e = self.gl.edges[eid]
            units.append(Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=eid))
            units.append(Unit(UpdateKind.ADD_EDGE, e.u, e.v, (self.omega[e.u] + self.omega[e.v]) // 2))
        realized = apply_units_inplace(self.gl, units)
        self.spo.step(realized)
        self.updates += 1

    def _endpoints(self, s: int, t: int) -> float:
        return (self.omega[s] + self.omega[t]) / 2

    def distance(self, s: int, t: int) -> float:
        assert self.spo is not None
        if s == t:
            return self.omega[s] * self.w0 / 2
        d = self.spo.base.query(s, t).d
        if d is None:
            return INF
        est = (d + self._endpoints(s, t)) * self.w0 / 2
        exact = self.exact.distance(s, t)
        if exact > 0:
            self.observed_alpha = max(self.observed_alpha, est / exact)
        return est

    def path(self, s: int, t: int) -> Optional[VertexPath]:
        assert self.spo is not None
        if s == t:
            return (s,)
        walk = self.spo.path(s, t)
        return None if walk is None else walk.vertices


# ═══════════════════════════════════════════════════════════════
# Multiplicative weights
# ═══════════════════════════════════════════════════════════════

@dataclass
class FlowResult:
    value: float
    eta: float
    paths: Counter = field(default_factory=Counter)
    load: Counter = field(default_factory=Counter)
    weights: dict[int, float] = field(default_factory=dict)
    lam: float = 0.0
    phases: int = 0
    routed: int = 0
    dual_checks: list[dict] = field(default_factory=list)
    rescaled: bool = False
    backend: str = "exact"
    observed_alpha: float = 1.0

    @property
    def feasible(self) -> bool:
        return all(c * self.eta <= 1 + EPS for c in self.load.values())

    @property
    def dual_ok(self) -> bool:
        return all(check["ok"] for check in self.dual_checks)

    @property
    def ok(self) -> bool:
        return self.feasible and self.dual_ok

    def flow(self) -> dict[VertexPath, float]:
        """f·η as path → amount."""
        return {p: c * self.eta for p, c in self.paths.items()}

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "eta": self.eta,
            "phases": self.phases,
            "routed": self.routed,
            "paths": len(self.paths),
            "max_load": max(self.load.values(), default=0) * self.eta,
            "dual_ok": self.dual_ok,
            "feasible": self.feasible,
            "rescaled": self.rescaled,
            "backend": self.backend,
            "observed_alpha": self.observed_alpha,
        }


def _check_path(g: DynGraph, path: Optional[VertexPath], s: int, t: int) -> VertexPath:
    if path is None:
        raise BackendFailure(f"backend gave a finite distance but no path for ({s}, {t})")
    if path[0] != s or path[-1] != t:
        raise BackendFailure(f"backend path {path} does not join {s} and {t}")
    if len(set(path)) != len(path):
        raise BackendFailure(f"backend path {path} is not simple")
    for a, b in zip(path, path[1:]):
        if not g.edges_between(a, b):
            raise BackendFailure(f"backend path uses a missing edge {a}-{b}")
    return path


def _dual_check(g: DynGraph, pairs: Sequence[tuple[int, int]], w: Mapping[int, float], lam: float, phase: int) -> dict:
    exact = ExactBackend()
    exact.reset(g, w, 0.0)
    dists = [exact.distance(s, t) for s, t in pairs]
    worst = min(dists, default=INF)
    return {"phase": phase, "lam": lam, "min_dist": worst, "ok": worst >= lam * (1 - EPS)}


def mwu_multiflow(
    inst: FlowInstance,
    backend: Optional[DistanceBackend] = None,
    *,
    audit_every: int = DEFAULT_PARAMS.audit_every,
) -> FlowResult:
    inst.validate()
    backend = backend or ExactBackend()
    g, delta = inst.g, inst.delta
    pairs = [(s, t) for s, t in inst.pairs if s != t]
    n = max(g.n, 2)
    zeta = 1 / delta
    eta = delta ** 2 / ((1 + 10 * delta) * math.log(n))
    w0 = n ** -zeta
    w = {v: w0 for v in g.vertices}
    lam = w0
    backend.reset(g, w, w0)
    res = FlowResult(0.0, eta, weights=w, backend=backend.name)
    logger.info("mwu multiflow: n=%d k=%d delta=%g backend=%s", g.n, len(pairs), delta, backend.name)
    while lam < 1:
        for s, t in pairs:
            while backend.distance(s, t) <= (1 + delta) * backend.alpha * lam:
                path = _check_path(g, backend.path(s, t), s, t)
                res.paths[path] += 1
                res.load.update(path)
                for v in path:
                    w[v] *= 1 + delta
                backend.bump(path)
                res.routed += 1
        lam *= 1 + delta
        res.phases += 1
        if res.phases % audit_every == 0:
            res.dual_checks.append(_dual_check(g, pairs, w, lam, res.phases))
    res.lam = lam
    top = max(res.load.values(), default=0)
    if top * eta > 1 + EPS:
        # only reachable when the backend's α is an underestimate
        res.eta = 1 / top
        res.rescaled = True
        logger.warning("flow overloaded a vertex by %.3g; eta rescaled to %.3g", top * eta, res.eta)
    res.value = res.eta * sum(res.paths.values())
    res.observed_alpha = getattr(backend, "observed_alpha", backend.alpha)
    failed = [c for c in res.dual_checks if not c["ok"]]
    if failed:
        logger.warning("dual check failed in %d of %d phases", len(failed), len(res.dual_checks))
    logger.info("mwu multiflow done: value=%.6g phases=%d routed=%d", res.value, res.phases, res.routed)
    return res


def make_backend(name: str, params: GlobalParams = DEFAULT_PARAMS) -> DistanceBackend:
    if name == "exact":
        return ExactBackend()
    if name == "oracle":
        return OracleBackend(params)
    raise PreconditionViolated(f"unknown distance backend {name!r} (expected exact or oracle)")


__all__ = [
    "DistanceBackend",
    "ExactBackend",
    "FlowInstance",
    "FlowResult",
    "OracleBackend",
    "make_backend",
    "mwu_multiflow",
]
