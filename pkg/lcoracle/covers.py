"""lcoracle.covers — pairwise / neighborhood covers over virtual nodes.

A cover is a set of clusterings; each cluster holds virtual nodes (v, i)
with a per-member density. Two builders:

- `build_basic_nc`: region growing. Within one round (one clustering) a
  ball around an uncovered centre keeps growing by h while the next ring
  multiplies its size by more than n^{1/β}. Vertices whose h-ball fits in
  the final region are covered, and that region is their ball cover.
- `build_separated_nc`: basic cover at radius sep·h, then each cluster is
  shrunk to the h-neighbourhood of its covered core. Cores of one clustering
  are more than sep·h apart, so the shrunk clusters are more than h apart.

Clusters are vertex-closed: a cluster holding one node of v holds all of
v's nodes in the support it was built over.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from lcoracle.brute import all_pairs
from lcoracle.errors import PreconditionViolated, StaleClusterId
from lcoracle.graph import INF, DynGraph, Node, add_cuts, dijkstra

logger = logging.getLogger(__name__)


class IdCounter:
    """Monotone id source; several covers may share one."""

    def __init__(self, start: int = 0) -> None:
        self._next = start

    def next(self) -> int:
        value = self._next
        self._next += 1
        return value

    @property
    def issued(self) -> int:
        return self._next


@dataclass
class Cluster:
    cid: int
    k: int
    members: dict[Node, int] = field(default_factory=dict)
    vcount: dict[int, int] = field(default_factory=dict)
    lm: set[int] = field(default_factory=set)

    def vertices(self) -> list[int]:
        return sorted(self.vcount)


@dataclass
class RecourseLog:
    """Per-batch virtual-node insertions (+) and deletions (−) into clusters."""

    batches: list[list[tuple[int, int, Node]]] = field(default_factory=lambda: [[]])

    def begin_batch(self) -> None:
        self.batches.append([])

    def record(self, sign: int, cid: int, node: Node) -> None:
        self.batches[-1].append((sign, cid, node))

    def count(self, batch: int = -1, restrict: Optional[Iterable[Node]] = None) -> int:
        events = self.batches[batch] if self.batches else []
        if restrict is None:
            return len(events)
        keep = set(restrict)
        return sum(1 for _, _, node in events if node in keep)

    def total(self) -> int:
        return sum(len(b) for b in self.batches)


@dataclass
class PairwiseCover:
    h_cov: float
    h_sep: float
    h_diam: float
    clusters: dict[int, Cluster] = field(default_factory=dict)
    index: dict[int, dict[int, int]] = field(default_factory=dict)
    node_clusters: dict[Node, set[int]] = field(default_factory=dict)
    ball: dict[Node, set[int]] = field(default_factory=dict)
    landmarks: set[int] = field(default_factory=set)
    counter: IdCounter = field(default_factory=IdCounter)
    recourse: RecourseLog = field(default_factory=RecourseLog)

    # ─── structure ──────────────────────────────────────────────

    @property
    def omega(self) -> int:
        return len({c.k for c in self.clusters.values()})

    @property
    def b(self) -> int:
        return max((len(cs) for cs in self.ball.values()), default=0)

    def next_clustering(self) -> int:
        return max((c.k for c in self.clusters.values()), default=0) + 1

    def new_cluster(self, k: int, members: Mapping[Node, int] = ()) -> int:
        cid = self.counter.next()
        self.clusters[cid] = Cluster(cid, k)
        for node, density in dict(members).items():
            self.add_node(cid, node, density)
        return cid

    def add_node(self, cid: int, node: Node, density: int = 1) -> None:
        cluster = self._live(cid)
        v = node[0]
        other = self.index.setdefault(v, {}).get(cluster.k)
        if other is not None and other != cid:
            raise PreconditionViolated(f"vertex {v} already sits in cluster {other} of clustering {cluster.k}")
        if node not in cluster.members:
            cluster.vcount[v] = cluster.vcount.get(v, 0) + 1
            self.node_clusters.setdefault(node, set()).add(cid)
            self.recourse.record(+1, cid, node)
        cluster.members[node] = density
        self.index[v][cluster.k] = cid
        if v in self.landmarks:
            cluster.lm.add(v)

    def remove_node(self, cid: int, node: Node) -> None:
        cluster = self._live(cid)
        if node not in cluster.members:
            return
        del cluster.members[node]
        v = node[0]
        cluster.vcount[v] -= 1
        if cluster.vcount[v] == 0:
            del cluster.vcount[v]
            cluster.lm.discard(v)
            self.index[v].pop(cluster.k, None)
            if not self.index[v]:
                del self.index[v]
        self.node_clusters[node].discard(cid)
        if not self.node_clusters[node]:
            del self.node_clusters[node]
        if node in self.ball:
            self.ball[node].discard(cid)
        self.recourse.record(-1, cid, node)

    def drop_node(self, node: Node) -> list[int]:
        """Remove a node from every cluster; returns the cluster ids it left."""
        left = sorted(self.node_clusters.get(node, ()))
        for cid in left:
            self.remove_node(cid, node)
        self.ball.pop(node, None)
        return left

    def drop_cluster(self, cid: int) -> None:
        cluster = self._live(cid)
        for node in list(cluster.members):
            self.remove_node(cid, node)
        del self.clusters[cid]

    def set_density(self, cid: int, node: Node, density: int) -> None:
        cluster = self._live(cid)
        if node not in cluster.members:
            raise StaleClusterId(f"node {node} is not in cluster {cid}")
        cluster.members[node] = density

    # ─── queries ────────────────────────────────────────────────

    def _live(self, cid: int) -> Cluster:
        cluster = self.clusters.get(cid)
        if cluster is None:
            raise StaleClusterId(f"cluster {cid} is not live")
        return cluster

    def membership(self, cid: int, v: int) -> bool:
        return v in self._live(cid).vcount

    def l_vertex(self, cid: int) -> Optional[int]:
        """Some landmark in the cluster (the smallest), or None."""
        lm = self._live(cid).lm
        return min(lm) if lm else None

    def cluster_of(self, v: int, k: int) -> Optional[int]:
        return self.index.get(v, {}).get(k)

    def clusters_of_vertex(self, v: int) -> list[int]:
        return sorted(self.index.get(v, {}).values())

    def clusters_of_node(self, node: Node) -> list[int]:
        return sorted(self.node_clusters.get(node, ()))

    def ball_of_vertex(self, v: int) -> list[int]:
        """Union of the ball covers of v's nodes."""
        out: set[int] = set()
        for node in self.nodes():
            if node[0] == v:
                out |= self.ball.get(node, set())
        return sorted(out)

    def nodes(self) -> list[Node]:
        return sorted(self.node_clusters)

    def vertices(self) -> list[int]:
        return sorted(self.index)

    def width(self) -> int:
        return max((len(cs) for cs in self.node_clusters.values()), default=0)

    def set_landmarks(self, landmarks: Iterable[int]) -> None:
        self.landmarks = set(landmarks)
        for cluster in self.clusters.values():
            cluster.lm = {v for v in cluster.vcount if v in self.landmarks}

    def add_landmarks(self, landmarks: Iterable[int]) -> None:
        for v in landmarks:
            if v in self.landmarks:
                continue
            self.landmarks.add(v)
            for cid in self.index.get(v, {}).values():
                self.clusters[cid].lm.add(v)

    def dump(self) -> str:
        """One line per cluster: `k cid: v1 v2 ...`."""
        lines = []
        for cid in sorted(self.clusters):
            c = self.clusters[cid]
            lines.append(f"{c.k} {cid}: " + " ".join(str(v) for v in c.vertices()))
        return "\n".join(lines) + ("\n" if lines else "")


def restrict(cover: PairwiseCover, keep: Iterable[Node]) -> PairwiseCover:
    """Cluster-wise intersection with a node set; cluster ids are preserved."""
    keep_set = set(keep)
    out = PairwiseCover(cover.h_cov, cover.h_sep, cover.h_diam, counter=cover.counter)
    out.landmarks = set(cover.landmarks)
    for cid in sorted(cover.clusters):
        c = cover.clusters[cid]
        members = {x: d for x, d in c.members.items() if x in keep_set}
        if not members:
            continue
        out.clusters[cid] = Cluster(cid, c.k)
        for node, density in members.items():
            out.add_node(cid, node, density)
    out.recourse = RecourseLog()
    for node, cids in cover.ball.items():
        if node in keep_set:
            out.ball[node] = {cid for cid in cids if cid in out.clusters}
    return out


# ═══════════════════════════════════════════════════════════════
# Builders
# ═══════════════════════════════════════════════════════════════

def _support(g: DynGraph, support: Optional[Mapping[int, Sequence[Node]]]) -> dict[int, list[Node]]:
    if support is None:
        return {v: [(v, 0)] for v in sorted(g.vertices)}
    return {v: list(ns) for v, ns in sorted(support.items()) if ns and v in g.vertices}


def _ball(g: DynGraph, sources: Iterable[int], radius: float, cut: Mapping[int, int]) -> set[int]:
    return set(dijkstra(g, sources, cut, bound=radius)[0])


def _carve_rounds(
    g: DynGraph,
    verts: list[int],
    h: float,
    beta: int,
    cut: Mapping[int, int],
) -> list[list[tuple[set[int], set[int]]]]:
    """Region growing; returns per round a list of (region, covered core)."""
    vset = set(verts)
    growth = max(len(verts), 1) ** (1.0 / beta)
    balls = {v: _ball(g, [v], h, cut) & vset for v in verts}
    uncovered = set(verts)
    rounds: list[list[tuple[set[int], set[int]]]] = []
    while uncovered:
        blocked: set[int] = set()
        regions: list[tuple[set[int], set[int]]] = []
        for c in sorted(uncovered):
            if c not in uncovered or balls[c] & blocked:
                continue
            Z = set(balls[c])
            while True:
                nxt = _ball(g, Z, h, cut) & vset
                if nxt & blocked:
                    K = Z
                    break
                if len(nxt) <= growth * len(Z):
                    K = nxt
                    break
                Z = nxt
            core = {v for v in K if v in uncovered and balls[v] <= K}
            uncovered -= core
            blocked |= K
            regions.append((K, core))
        rounds.append(regions)
    return rounds


def build_basic_nc(
    g: DynGraph,
    h: float,
    beta: int,
    *,
    cut: Optional[Mapping[int, int]] = None,
    support: Optional[Mapping[int, Sequence[Node]]] = None,
    density: Optional[Mapping[Node, int]] = None,
    counter: Optional[IdCounter] = None,
    first_k: int = 1,
) -> PairwiseCover:
    """Neighborhood cover with covering radius h and diameter ≤ 2(β+1)h."""
    cut = cut or {}
    sup = _support(g, support)
    cover = PairwiseCover(h, 0, 2 * (beta + 1) * h, counter=counter or IdCounter())
    rounds = _carve_rounds(g, sorted(sup), h, beta, cut)
    for r, regions in enumerate(rounds):
        k = first_k + r
        for region, core in regions:
            members = {x: (density or {}).get(x, 1) for v in sorted(region) for x in sup[v]}
            cid = cover.new_cluster(k, members)
            for v in core:
                for x in sup[v]:
                    cover.ball[x] = {cid}
    logger.debug("basic cover h=%s: %d clusters in %d clusterings", h, len(cover.clusters), len(rounds))
    return cover


def separated_diameter(h: float, beta: int, sep: int) -> float:
    return 2 * h * ((beta + 1) * sep + 1)


def build_separated_nc(
    g: DynGraph,
    h: float,
    beta: int,
    *,
    sep: int = 3,
    cut: Optional[Mapping[int, int]] = None,
    support: Optional[Mapping[int, Sequence[Node]]] = None,
    density: Optional[Mapping[Node, int]] = None,
    counter: Optional[IdCounter] = None,
    first_k: int = 1,
) -> PairwiseCover:
    """Neighborhood cover with h_cov = h_sep = h on G−cut over the support nodes."""
    cut = cut or {}
    sup = _support(g, support)
    vset = set(sup)
    cover = PairwiseCover(h, h, separated_diameter(h, beta, sep), counter=counter or IdCounter())
    rounds = _carve_rounds(g, sorted(sup), sep * h, beta, cut)
    for r, regions in enumerate(rounds):
        k = first_k + r
        for _region, core in regions:
            if not core:
                continue
            S = _ball(g, core, h, cut) & vset
            members = {x: (density or {}).get(x, 1) for v in sorted(S) for x in sup[v]}
            cid = cover.new_cluster(k, members)
            for v in core:
                for x in sup[v]:
                    cover.ball[x] = {cid}
    logger.debug("separated cover h=%s: %d clusters", h, len(cover.clusters))
    return cover


# ═══════════════════════════════════════════════════════════════
# Verification
# ═══════════════════════════════════════════════════════════════

def verify_cover(
    g: DynGraph,
    cut: Optional[Mapping[int, int]],
    cover: PairwiseCover,
    *,
    nodes: Optional[Iterable[Node]] = None,
    base: Optional[Mapping[int, int]] = None,
    check_ball: bool = True,
) -> dict:
    """Exhaustive check of covering, separation, width, ball covers and union.

    `nodes` is the node set the cover must cover (default: the cover's own).
    """
    full = add_cuts(base, cut)
    node_list = sorted(set(nodes) if nodes is not None else cover.nodes())
    verts = sorted({x[0] for x in node_list} | set(cover.vertices()))
    verts = [v for v in verts if v in g.vertices]
    dist = all_pairs(g, full, vertices=verts) if verts else {}

    def d(a: int, b: int) -> float:
        return dist.get(a, {}).get(b, INF)

    union_ok = all(cover.node_clusters.get(x) for x in node_list)

    cov_ok = True
    for i, x in enumerate(node_list):
        cx = cover.node_clusters.get(x, set())
        for y in node_list[i:]:
            if d(x[0], y[0]) <= cover.h_cov and not (cx & cover.node_clusters.get(y, set())):
                cov_ok = False
                break
        if not cov_ok:
            break

    by_k: dict[int, list[Cluster]] = {}
    for c in cover.clusters.values():
        by_k.setdefault(c.k, []).append(c)
    sep_ok = True
    disjoint_ok = True
    for clusters in by_k.values():
        for i, a in enumerate(clusters):
            for b in clusters[i + 1:]:
                if set(a.members) & set(b.members):
                    disjoint_ok = False
                gap = min((d(u, v) for u in a.vcount for v in b.vcount), default=INF)
                if gap <= cover.h_sep:
                    sep_ok = False

    diam = 0.0
    for c in cover.clusters.values():
        vs = list(c.vcount)
        for i, u in enumerate(vs):
            for v in vs[i + 1:]:
                diam = max(diam, d(u, v))

    ball_ok = True
    if check_ball:
        for x in node_list:
            cids = cover.ball.get(x)
            if not cids or any(x not in cover.clusters[cid].members for cid in cids if cid in cover.clusters):
                ball_ok = False
                break
            reach: set[Node] = set()
            for cid in cids:
                if cid in cover.clusters:
                    reach |= set(cover.clusters[cid].members)
            if any(d(x[0], y[0]) <= cover.h_cov and y not in reach for y in node_list):
                ball_ok = False
                break

    report = {
        "cov_ok": cov_ok,
        "sep_ok": sep_ok,
        "disjoint_ok": disjoint_ok,
        "union_ok": union_ok,
        "ball_ok": ball_ok,
        "diam": diam,
        "diam_ok": diam <= cover.h_diam,
        "width": cover.width(),
        "clusters": len(cover.clusters),
    }
    report["ok"] = all(report[k] for k in ("cov_ok", "sep_ok", "disjoint_ok", "union_ok", "ball_ok"))
    return report


__all__ = [
    "Cluster",
    "IdCounter",
    "PairwiseCover",
    "RecourseLog",
    "build_basic_nc",
    "build_separated_nc",
    "restrict",
    "separated_diameter",
    "verify_cover",
]
