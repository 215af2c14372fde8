"""lcoracle.certified_ed — certified expander decompositions under batched updates.

A certified ED of a graph G is

- a moving cut C and a landmark set L for it,
- a pairwise cover of the virtual nodes on G−C (covering radius = separation
  radius = the current radius r),
- one router per cluster whose tokens stand for the cluster's nodes, and
- an embedding of every router edge as a walk in G.

Virtual nodes are `(v, i)` pairs. Every vertex owns a unit node, one node per
incident edge, one per unit of node weight, and one per terminal or landmark
role, so the node weighting always dominates deg + 1.

Updates run in one pass per batch: new edges are cut by r, deletions remove
the router edges whose embeddings died, pruned nodes leave the cover, and all
new or pruned nodes are inserted together. A node whose vertex still has live
nodes joins that vertex's clusters on the spot; the rest go through cutmatch
(radius shrinks by 3 when any of them matched) and whatever stays unmatched
gets a fresh local cover in new clusterings.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from lcoracle.covers import IdCounter, PairwiseCover, build_basic_nc, build_separated_nc, verify_cover
from lcoracle.errors import (
    AuditFailure,
    BudgetExceeded,
    IterationCapExceeded,
    PreconditionViolated,
    StaleClusterId,
    UnknownVertex,
)
from lcoracle.graph import (
    INF,
    DynGraph,
    LandmarkSet,
    MovingCut,
    Node,
    Unit,
    UpdateKind,
    Walk,
    add_cuts,
    apply_batch,
    apply_units_inplace,
    concat_walks,
    dijkstra,
    greedy_landmarks,
    restrict_cut,
    shortest_path,
    verify_landmarks,
)
from lcoracle.lcflow import cutmatch
from lcoracle.params import DEFAULT_PARAMS, GlobalParams
from lcoracle.router import Router

logger = logging.getLogger(__name__)

# Router update allowance per ED batch or insertion (one deletion plus the
# doubling rounds of a token fill).
ROUNDS_PER_STEP = 12


# ═══════════════════════════════════════════════════════════════
# Landmark initialisation
# ═══════════════════════════════════════════════════════════════

def init_landmarks(
    g: DynGraph,
    cut: Mapping[int, int],
    sigma: float,
    params: GlobalParams = DEFAULT_PARAMS,
) -> tuple[MovingCut, LandmarkSet]:
    """Thin a witnessed cut to C' ⊆ C and pick landmarks of distortion σ for it.

    Edges survive when the clusters of a small-radius cover of G−C see a lot
    of cut inside them, or when the edge itself is long and mostly cut.
    """
    cut = {eid: c for eid, c in cut.items() if c and eid in g.edges}
    if not cut:
        return {}, LandmarkSet(set(), sigma)
    h_cov = sigma / (2 * (params.beta + 1))
    cover = build_basic_nc(g, h_cov, params.beta, cut=cut)
    keep: MovingCut = {}
    landmarks: set[int] = set()
    for cid in sorted(cover.clusters):
        verts = set(cover.clusters[cid].vcount)
        inside = [eid for eid in sorted(cut) if g.edges[eid].u in verts and g.edges[eid].v in verts]
        if not inside or sum(cut[eid] for eid in inside) < h_cov / 10:
            continue
        for eid in inside:
            keep[eid] = cut[eid]
        ends = sorted({x for eid in inside for x in g.edges[eid].ends})
        need = math.ceil(len(ends) / (h_cov / 10))
        landmarks.update((ends + sorted(verts - set(ends)))[:need])
    for eid in sorted(cut):
        e = g.edges[eid]
        cut_len = e.length + cut[eid]
        if cut_len >= h_cov / 10 and cut[eid] >= cut_len / 10:
            keep[eid] = cut[eid]
            landmarks.update(e.ends)
    landmarks = greedy_landmarks(g, keep, sigma, initial=landmarks)
    logger.debug("init landmarks: kept %d of %d cut edges, |L|=%d", len(keep), len(cut), len(landmarks))
    return keep, LandmarkSet(landmarks, sigma)


def length_sandwich_violations(
    g: DynGraph,
    cut: Mapping[int, int],
    thinned: Mapping[int, int],
    sigma: float,
    samples: int = 50,
    seed: int = 0,
) -> int:
    """Sampled simple paths P with ℓ_{G−C}(P) ≥ σ but ℓ_{G−C'}(P) outside [ℓ/2, ℓ]."""
    rng = random.Random(seed)
    verts = sorted(g.vertices)
    bad = 0
    for _ in range(samples if verts else 0):
        v = rng.choice(verts)
        seen = {v}
        eids: list[int] = []
        while rng.random() < 0.85:
            steps = [(eid, g.edges[eid].other(v)) for eid in sorted(g.adj[v]) if g.edges[eid].other(v) not in seen]
            if not steps:
                break
            eid, v = rng.choice(steps)
            seen.add(v)
            eids.append(eid)
        full = sum(g.edges[eid].length + cut.get(eid, 0) for eid in eids)
        thin = sum(g.edges[eid].length + thinned.get(eid, 0) for eid in eids)
        if full >= sigma and not (full / 2 <= thin <= full):
            bad += 1
    return bad


# ═══════════════════════════════════════════════════════════════
# Witnessed covers: separated cover + routers + embedding
# ═══════════════════════════════════════════════════════════════

@dataclass
class WitnessPlan:
    """A cover with routers embedded into G; cluster ids are local to the plan."""

    cover: PairwiseCover
    extra: MovingCut
    routers: dict[int, Router] = field(default_factory=dict)
    tokens: dict[int, dict[Node, list[int]]] = field(default_factory=dict)
    emb: dict[int, dict[int, Walk]] = field(default_factory=dict)


def _embed_router(
    g: DynGraph,
    router: Router,
    vertex_of: Mapping[int, int],
    full: Mapping[int, int],
    bound: float,
    cap: int,
    loads: dict[int, int],
    cache: dict[tuple[int, int], Walk],
) -> tuple[Optional[dict[int, Walk]], MovingCut]:
    """Embed every router edge along unsaturated paths of G−C within `bound`.

    On failure returns (None, cut) where the cut pushes the saturated edges
    of the plain shortest path beyond `bound`.
    """
    emb: dict[int, Walk] = {}
    for reid in sorted(router.edges):
        e = router.edges[reid]
        va, vb = vertex_of[e.a], vertex_of[e.b]
        if va == vb:
            emb[reid] = Walk.trivial(va)
            continue
        walk = cache.get((va, vb))
        if walk is None or any(loads.get(eid, 0) >= cap for eid in walk.eids):
            saturated = {eid for eid, load in loads.items() if load >= cap}
            walk = shortest_path(g, va, vb, full, skip=saturated, bound=bound)
            if walk is None:
                plain = shortest_path(g, va, vb, full, bound=bound)
                if plain is not None:
                    more: MovingCut = {}
                    for eid in plain.eids:
                        if loads.get(eid, 0) >= cap:
                            current = g.edges[eid].length + full.get(eid, 0)
                            more[eid] = math.floor(bound) + 1 - current
                    return None, more
                walk = shortest_path(g, va, vb, full)
                if walk is None:
                    raise PreconditionViolated(f"cluster joins disconnected vertices {va} and {vb}")
                logger.info("router edge %d embedded past the cluster bound (%s)", reid, bound)
            cache[(va, vb)] = walk
        emb[reid] = walk
        for eid in walk.eids:
            loads[eid] = loads.get(eid, 0) + 1
    return emb, {}


def witnessed_ed(
    g: DynGraph,
    support: Mapping[int, Sequence[Node]],
    density: Mapping[Node, int],
    radius: int,
    cut: Mapping[int, int],
    params: GlobalParams,
    *,
    loads: Mapping[int, int],
    tokens: IdCounter,
    vertex_of: dict[int, int],
    t_local: int,
    first_k: int = 1,
) -> WitnessPlan:
    """Separated cover of the support on G−cut whose routers embed with congestion ≤ cap.

    Each failed embedding lengthens the offending edges past the cluster
    diameter and rebuilds; an edge cut that way is never on a short path
    again, so the loop ends within m rounds.
    """
    extra: MovingCut = {}
    cap = params.congestion_cap
    for _ in range(g.m + 2):
        full = add_cuts(cut, extra)
        cover = build_separated_nc(
            g, radius, params.beta,
            sep=params.sep_factor, cut=full, support=support, density=density, first_k=first_k,
        )
        plan = WitnessPlan(cover, dict(extra))
        trial = dict(loads)
        cache: dict[tuple[int, int], Walk] = {}
        failed: Optional[MovingCut] = None
        for cid in sorted(cover.clusters):
            members = cover.clusters[cid].members
            toks: dict[Node, list[int]] = {}
            for node in sorted(members):
                toks[node] = [tokens.next() for _ in range(members[node])]
                for t in toks[node]:
                    vertex_of[t] = node[0]
            router = Router(
                [t for ts in toks.values() for t in ts],
                params.router_branching, t_local, params.prune_factor,
            )
            emb, more = _embed_router(g, router, vertex_of, full, cover.h_diam, cap, trial, cache)
            if emb is None:
                failed = more
                break
            plan.routers[cid] = router
            plan.tokens[cid] = toks
            plan.emb[cid] = emb
        if failed is None:
            return plan
        for eid, c in failed.items():
            extra[eid] = extra.get(eid, 0) + c
        logger.debug("embedding saturated; cut %d more edges and rebuilt", len(failed))
    raise PreconditionViolated("embedding loop did not settle")


# ═══════════════════════════════════════════════════════════════
# Certified ED
# ═══════════════════════════════════════════════════════════════

@dataclass
class Quality:
    sigma: float
    b: int
    h: int
    omega: int
    f: int
    h_emb: int
    gamma_emb: int
    h_diam: float
    real_diam: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def prunes_node(rho: int, pruned: int, mu: float) -> bool:
    """A node with cluster density ρ leaves once ⌈ρ/μ⌉ of its tokens are pruned."""
    return pruned >= math.ceil(rho / mu)


class CertifiedED:
    dense = False

    def __init__(
        self,
        g: DynGraph,
        h: int,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        batches: Optional[int] = None,
        insertions: Optional[int] = None,
    ) -> None:
        self.g = g
        self.h = max(1, math.ceil(h))
        self.phi = phi
        self.params = params
        self.batches = params.ed_budget if batches is None else batches
        self.insertions = self.batches if insertions is None else insertions
        self.batches_left = self.batches
        self.radius = self.h * 3 ** self.insertions
        self.sigma = self.h / params.kappa_sigma
        self.t_local = (self.batches + self.insertions + 1) * ROUNDS_PER_STEP
        self.cut: MovingCut = {}
        self.landmarks = LandmarkSet(set(), self.sigma)
        self.cids = IdCounter()
        self.cover = PairwiseCover(self.radius, self.radius, 0, counter=self.cids)
        self.routers: dict[int, Router] = {}
        self.emb: dict[int, dict[int, Walk]] = {}
        self.tokens_of: dict[tuple[int, Node], list[int]] = {}
        self.owner: dict[int, tuple[int, Node]] = {}
        self.tok_vertex: dict[int, int] = {}
        self.toks = IdCounter()
        self.rho: dict[Node, int] = {}
        self.role: dict[Node, tuple[str, int]] = {}
        self.weighting: dict[int, list[Node]] = {}
        self.deg_node: dict[tuple[int, int], Node] = {}
        self.lm_vertices: set[int] = set()
        self._next_index: dict[int, int] = {}
        self.history: list[dict] = []

    # ── construction ──

    @classmethod
    def create(
        cls,
        g: DynGraph,
        h: int,
        phi: float,
        params: GlobalParams = DEFAULT_PARAMS,
        *,
        batches: Optional[int] = None,
        insertions: Optional[int] = None,
        weights: Optional[Mapping[int, int]] = None,
        density: Optional[Mapping[int, int]] = None,
    ) -> "CertifiedED":
        ed = cls(g.copy(), h, phi, params, batches=batches, insertions=insertions)
        for v in sorted(ed.g.vertices):
            ed._seed_vertex(v, (weights or {}).get(v, 0), (density or {}).get(v, 1))
        nodes = [x for v in sorted(ed.weighting) for x in ed.weighting[v]]
        support = ed._support(nodes)
        dens = {x: ed.rho[x] for x in nodes}
        wit = witnessed_ed(
            ed.g, support, dens, 2 * ed.radius, {}, params,
            loads={}, tokens=IdCounter(), vertex_of={}, t_local=ed.t_local,
        )
        thinned, lm = init_landmarks(ed.g, wit.extra, ed.sigma, params)
        plan = witnessed_ed(
            ed.g, support, dens, ed.radius, thinned, params,
            loads={}, tokens=ed.toks, vertex_of=ed.tok_vertex, t_local=ed.t_local,
        )
        ed.cut = add_cuts(thinned, plan.extra)
        ed._install(plan)
        ed.landmarks = LandmarkSet(set(lm.landmarks), ed.sigma)
        ed._top_up_landmarks()
        ed._record("init")
        logger.info(
            "certified ED on n=%d m=%d: r=%d, %d clusters, |C|=%d, |L|=%d",
            ed.g.n, ed.g.m, ed.radius, len(ed.cover.clusters), sum(ed.cut.values()), len(ed.landmarks.landmarks),
        )
        return ed

    def _register(self, v: int, role: str, key: int, rho: int) -> Node:
        i = self._next_index.get(v, 0)
        self._next_index[v] = i + 1
        node = (v, i)
        self.rho[node] = rho
        self.role[node] = (role, key)
        self.weighting.setdefault(v, []).append(node)
        if role == "deg":
            self.deg_node[(v, key)] = node
        if role == "lm":
            self.lm_vertices.add(v)
        return node

    def _term_density(self) -> int:
        return 1

    def _seed_vertex(self, v: int, extra: int = 0, unit_density: int = 1) -> list[Node]:
        out = [self._register(v, "unit", 0, unit_density)]
        for i in range(self.g.weights.get(v, 0) + extra):
            out.append(self._register(v, "weight", i, 1))
        for eid in sorted(self.g.adj.get(v, ())):
            out.append(self._register(v, "deg", eid, 1))
        if v in self.g.terminals:
            out.append(self._register(v, "term", 0, self._term_density()))
        return out

    @staticmethod
    def _support(nodes: Iterable[Node]) -> dict[int, list[Node]]:
        out: dict[int, list[Node]] = {}
        for x in sorted(set(nodes)):
            out.setdefault(x[0], []).append(x)
        return out

    def _install(self, plan: WitnessPlan) -> dict[int, int]:
        remap: dict[int, int] = {}
        for old in sorted(plan.cover.clusters):
            c = plan.cover.clusters[old]
            cid = self.cover.new_cluster(c.k, c.members)
            remap[old] = cid
            self.routers[cid] = plan.routers[old]
            self.emb[cid] = plan.emb[old]
            for node, toks in plan.tokens[old].items():
                self.tokens_of[(cid, node)] = list(toks)
                for t in toks:
                    self.owner[t] = (cid, node)
        for node, cids in plan.cover.ball.items():
            self.cover.ball.setdefault(node, set()).update(remap[c] for c in cids if c in remap)
        self.cover.h_diam = max(self.cover.h_diam, plan.cover.h_diam)
        return remap

    def _singleton(self, node: Node, k: int) -> None:
        cid = self.cover.new_cluster(k, {node: self.rho[node]})
        toks = [self.toks.next() for _ in range(self.rho[node])]
        for t in toks:
            self.tok_vertex[t] = node[0]
            self.owner[t] = (cid, node)
        router = Router(toks, self.params.router_branching, self.t_local, self.params.prune_factor)
        self.routers[cid] = router
        self.emb[cid] = {reid: Walk.trivial(node[0]) for reid in router.edges}
        self.tokens_of[(cid, node)] = toks
        self.cover.ball[node] = {cid}

    # ── node bookkeeping ──

    def _drop_from_cover(self, node: Node) -> None:
        for cid in self.cover.clusters_of_node(node):
            for t in self.tokens_of.pop((cid, node), []):
                self.owner.pop(t, None)
        self.cover.drop_node(node)

    def _retire(self, node: Node) -> None:
        self._drop_from_cover(node)
        role, key = self.role.pop(node)
        del self.rho[node]
        nodes = self.weighting[node[0]]
        nodes.remove(node)
        if not nodes:
            del self.weighting[node[0]]
        if role == "deg":
            self.deg_node.pop((node[0], key), None)
        if role == "lm":
            self.lm_vertices.discard(node[0])

    def _prunes(self, rho: int, pruned: int) -> bool:
        return pruned > 0

    def _loads(self) -> dict[int, int]:
        loads: dict[int, int] = {}
        for cid, router in self.routers.items():
            for reid, walk in self.emb[cid].items():
                if router.has_edge(reid):
                    for eid in walk.eids:
                        loads[eid] = loads.get(eid, 0) + 1
        return loads

    def _vertex_ball(self, v: int) -> set[int]:
        out: set[int] = set()
        for x in self.weighting.get(v, ()):
            out |= self.cover.ball.get(x, set())
        return out

    # ── updates ──

    def apply(self, units: Iterable[Unit]) -> list[Unit]:
        """Absorb one mixed batch; returns the realized units."""
        if self.batches_left <= 0:
            raise BudgetExceeded(f"ED already absorbed its {self.batches} batches")
        self.batches_left -= 1
        self.cover.recourse.begin_batch()
        realized = apply_units_inplace(self.g, units)
        kinds: dict[UpdateKind, list[Unit]] = {}
        for u in realized:
            kinds.setdefault(u.kind, []).append(u)
        fresh: list[Node] = []

        added = [u.u for u in kinds.get(UpdateKind.ADD_VERTEX, [])]
        if added:
            k = self.cover.next_clustering()
            for v in added:
                self._singleton(self._register(v, "unit", 0, 1), k)

        new_landmarks: set[int] = set()
        for u in kinds.get(UpdateKind.ADD_EDGE, []):
            self.cut[u.eid] = self.radius
            new_landmarks.update((u.u, u.v))
            for x in (u.u, u.v):
                fresh.append(self._register(x, "deg", u.eid, 1))
        for u in kinds.get(UpdateKind.ADD_WEIGHT, []):
            for i in range(u.value):
                fresh.append(self._register(u.u, "weight", i, 1))
        for u in kinds.get(UpdateKind.ADD_TERMINAL, []):
            fresh.append(self._register(u.u, "term", 0, self._term_density()))

        gone_edges = {u.eid for u in kinds.get(UpdateKind.DEL_EDGE, [])}
        gone_vertices = {u.u for u in kinds.get(UpdateKind.DEL_VERTEX, [])}
        pruned = self._delete_router_edges(gone_edges, gone_vertices)

        counts: dict[tuple[int, Node], int] = {}
        for t in pruned:
            if t in self.owner:
                key = self.owner[t]
                counts[key] = counts.get(key, 0) + 1
        reinsert: set[Node] = set()
        for (cid, node), k in sorted(counts.items()):
            if node in reinsert:
                continue
            toks = self.tokens_of[(cid, node)]
            if self._prunes(len(toks), k):
                reinsert.add(node)
            else:
                self.tokens_of[(cid, node)] = [t for t in toks if t not in pruned]
                for t in toks:
                    if t in pruned:
                        self.owner.pop(t, None)
                self.cover.set_density(cid, node, len(self.tokens_of[(cid, node)]))
        for node in sorted(reinsert):
            self._drop_from_cover(node)

        for u in kinds.get(UpdateKind.DEL_EDGE, []):
            for x in (u.u, u.v):
                node = self.deg_node.get((x, u.eid))
                if node is not None:
                    self._retire(node)
            new_landmarks.update(x for x in (u.u, u.v) if x not in gone_vertices)
        for v in sorted(gone_vertices):
            for node in list(self.weighting.get(v, ())):
                self._retire(node)
            self.landmarks.landmarks.discard(v)
            self.cover.landmarks.discard(v)
        new_landmarks -= gone_vertices

        self.cut = restrict_cut(self.cut, self.g)
        self.landmarks.landmarks |= new_landmarks
        self.cover.add_landmarks(new_landmarks)
        todo = [x for x in fresh if x in self.rho] + sorted(x for x in reinsert if x in self.rho)
        self._insert(todo)
        self._finish("batch")
        return realized

    def insert_nodes(self, weights: Mapping[int, int], density: int = 1, role: str = "weight") -> list[Node]:
        """Add weights[v] nodes of the given density at each v and insert them."""
        self.cover.recourse.begin_batch()
        fresh: list[Node] = []
        for v in sorted(weights):
            if v not in self.g.vertices:
                raise UnknownVertex(f"vertex {v} is not in the graph")
            for i in range(weights[v]):
                fresh.append(self._register(v, role, i, density))
        self._insert(fresh)
        self._finish("insert")
        return fresh

    def _delete_router_edges(self, gone_edges: set[int], gone_vertices: set[int]) -> set[int]:
        if not gone_edges and not gone_vertices:
            return set()
        pruned: set[int] = set()
        for cid in sorted(self.routers):
            router = self.routers[cid]
            hit = [
                reid for reid, walk in sorted(self.emb[cid].items())
                if router.has_edge(reid)
                and (gone_edges.intersection(walk.eids) or gone_vertices.intersection(walk.vertices))
            ]
            if hit:
                pruned |= router.delete_edges(hit)
        return pruned

    def _insert(self, new_nodes: Sequence[Node]) -> None:
        new_nodes = sorted(set(new_nodes))
        if not new_nodes:
            return
        live = set(self.cover.index)
        anchors: dict[Node, tuple[int, Walk]] = {}
        remote: list[Node] = []
        for x in new_nodes:
            if x[0] in live:
                anchors[x] = (x[0], Walk.trivial(x[0]))
            else:
                remote.append(x)

        r_new = self.radius
        unmatched: list[Node] = list(remote)
        sinks = self.cover.nodes()
        if remote and sinks and self.radius // 3 >= self.h:
            res = cutmatch(self.g, self.cut, remote, sinks, self.radius // 3, self.phi, self.params, check_pre=False)
            for x, y in res.matching.items():
                anchors[x] = (y[0], res.paths[x].reverse())
            unmatched = list(res.src_unmatched)
            if res.matching:
                r_new = self.radius // 3
            self.cut = add_cuts(self.cut, res.cut)

        joins: dict[int, list[Node]] = {}
        balls: dict[Node, set[int]] = {}
        for x in sorted(anchors):
            p, _ = anchors[x]
            for cid in self.cover.clusters_of_vertex(p):
                joins.setdefault(cid, []).append(x)
            balls[x] = self._vertex_ball(p)
        for cid in sorted(joins):
            for x in joins[cid]:
                self.cover.add_node(cid, x, self.rho[x])
            self._fill_tokens(cid, joins[cid], anchors)
        for x, ball in balls.items():
            self.cover.ball[x] = set(ball)

        self.radius = r_new
        self.cover.h_cov = self.cover.h_sep = r_new
        if unmatched:
            self._local_cover(unmatched, new_nodes)
        logger.debug(
            "inserted %d nodes: %d joined in place or by matching, %d unmatched, r=%d",
            len(new_nodes), len(anchors), len(unmatched), self.radius,
        )

    def _fill_tokens(self, cid: int, joiners: Sequence[Node], anchors: Mapping[Node, tuple[int, Walk]]) -> None:
        """Give each joiner ρ tokens, attaching fresh tokens below live ones in doubling rounds."""
        router = self.routers[cid]
        need = {x: self.rho[x] for x in joiners}
        own: dict[Node, list[int]] = {x: [] for x in joiners}
        while any(need.values()):
            by_vertex: dict[int, list[int]] = {}
            for t in sorted(router.alive):
                by_vertex.setdefault(self.tok_vertex[t], []).append(t)
            used: set[int] = set()
            pairs: list[tuple[int, int]] = []
            walks: list[Walk] = []
            made: dict[Node, list[int]] = {}
            for x in sorted(need):
                if not need[x]:
                    continue
                p, walk = anchors[x]
                cands = by_vertex.get(x[0], []) + (by_vertex.get(p, []) if p != x[0] else [])
                for a in cands:
                    if not need[x]:
                        break
                    if a in used:
                        continue
                    t = self.toks.next()
                    self.tok_vertex[t] = x[0]
                    used.add(a)
                    pairs.append((a, t))
                    walks.append(Walk.trivial(x[0]) if self.tok_vertex[a] == x[0] else walk)
                    made.setdefault(x, []).append(t)
                    need[x] -= 1
            if not pairs:
                raise PreconditionViolated(f"cluster {cid} has no live token to attach to")
            reids = router.insert_matching(pairs)
            for reid, walk in zip(reids, walks):
                self.emb[cid][reid] = walk
            for x, ts in made.items():
                own[x].extend(ts)
        for x, ts in own.items():
            self.tokens_of[(cid, x)] = ts
            for t in ts:
                self.owner[t] = (cid, x)

    def _local_cover(self, unmatched: Sequence[Node], new_nodes: Sequence[Node]) -> None:
        dist, _ = dijkstra(self.g, sorted({x[0] for x in unmatched}), self.cut, bound=self.radius)
        pool = set(self.cover.nodes()) | set(new_nodes)
        members = [x for x in pool if x[0] in dist and x in self.rho]
        plan = witnessed_ed(
            self.g, self._support(members), {x: self.rho[x] for x in members}, self.radius, self.cut, self.params,
            loads=self._loads(), tokens=self.toks, vertex_of=self.tok_vertex,
            t_local=self.t_local, first_k=self.cover.next_clustering(),
        )
        self.cut = add_cuts(self.cut, plan.extra)
        self._install(plan)

    def _finish(self, what: str) -> None:
        for cid in sorted(self.cover.clusters):
            if not self.cover.clusters[cid].members:
                self.cover.drop_cluster(cid)
                del self.routers[cid]
                del self.emb[cid]
        self._top_up_landmarks()
        self._record(what)

    def _top_up_landmarks(self) -> None:
        grown = greedy_landmarks(self.g, self.cut, self.sigma, initial=self.landmarks.landmarks)
        self.landmarks = LandmarkSet(grown, self.sigma)
        self.cover.set_landmarks(grown)

    def _record(self, what: str) -> None:
        entry = {"event": what, "epoch": self.g.epoch, "recourse": self.cover.recourse.count()}
        entry.update(self.quality().as_dict())
        self.history.append(entry)

    # ── queries ──

    def nodes(self) -> list[Node]:
        return [x for v in sorted(self.weighting) for x in self.weighting[v]]

    def has_landmark_node(self, v: int) -> bool:
        return v in self.lm_vertices

    def recourse(self, restrict: Optional[Iterable[Node]] = None) -> int:
        return self.cover.recourse.count(restrict=restrict)

    def max_emb_length(self, cid: int) -> int:
        router = self.routers[cid]
        return max(
            (walk.length(self.g) for reid, walk in self.emb[cid].items() if router.has_edge(reid)),
            default=0,
        )

    def certdiam(self, cid: int) -> int:
        """Upper bound on dist_G between any two vertices of the cluster."""
        if cid not in self.routers:
            raise StaleClusterId(f"cluster {cid} is not live")
        return self.routers[cid].declared_bound * self.max_emb_length(cid)

    def _token_at(self, cid: int, v: int) -> int:
        for x in self.weighting.get(v, ()):
            toks = self.tokens_of.get((cid, x))
            if toks:
                return toks[0]
        raise UnknownVertex(f"vertex {v} has no node in cluster {cid}")

    def cluster_path(self, cid: int, u: int, v: int) -> Walk:
        """u–v walk in G: router path with every router edge replaced by its embedding."""
        if cid not in self.routers:
            raise StaleClusterId(f"cluster {cid} is not live")
        router = self.routers[cid]
        p = router.path(self._token_at(cid, u), self._token_at(cid, v))
        walks = [Walk.trivial(u)]
        for k, reid in enumerate(p.reids):
            e = router.edges[reid]
            walk = self.emb[cid][reid]
            walks.append(walk if p.tokens[k] == e.a else walk.reverse())
        return concat_walks(walks)

    def quality(self) -> Quality:
        loads = self._loads()
        h_emb = 0
        real = 0
        for cid in self.routers:
            length = self.max_emb_length(cid)
            h_emb = max(h_emb, length)
            real = max(real, self.routers[cid].declared_bound * length)
        return Quality(
            sigma=self.sigma,
            b=self.cover.b,
            h=self.radius,
            omega=self.cover.omega,
            f=max((r.updates for r in self.routers.values()), default=0),
            h_emb=h_emb,
            gamma_emb=max(loads.values(), default=0),
            h_diam=self.cover.h_diam,
            real_diam=real,
        )

    # ── audit ──

    def audit(self, samples: int = 20, seed: int = 0) -> dict:
        nodes = self.nodes()
        cover = verify_cover(self.g, self.cut, self.cover, nodes=nodes)
        landmarks_ok = verify_landmarks(self.g, self.cut, self.landmarks)

        emb_ok = True
        for cid, router in self.routers.items():
            for reid, e in router.edges.items():
                if not router.has_edge(reid):
                    continue
                walk = self.emb[cid].get(reid)
                if (
                    walk is None
                    or not walk.is_valid(self.g)
                    or {walk.start, walk.end} != {self.tok_vertex[e.a], self.tok_vertex[e.b]}
                ):
                    emb_ok = False

        tokens_ok = True
        for (cid, node), toks in self.tokens_of.items():
            cluster = self.cover.clusters.get(cid)
            if cluster is None or cluster.members.get(node) != len(toks) or not toks:
                tokens_ok = False
                break
            if any(t not in self.routers[cid].alive or self.owner.get(t) != (cid, node) for t in toks):
                tokens_ok = False
                break
        for cid, cluster in self.cover.clusters.items():
            if any((cid, node) not in self.tokens_of for node in cluster.members):
                tokens_ok = False

        weighting_ok = all(
            len(self.weighting.get(v, ())) >= self.g.degree(v) + 1 for v in self.g.vertices
        )
        routers_ok = all(r.audit(samples=5, seed=seed)["ok"] for r in self.routers.values())
        routing_ok = self._check_routing(samples, seed)
        congestion = self._check_congestion(samples, seed)

        report = {
            "cover_ok": cover["ok"],
            "landmarks_ok": landmarks_ok,
            "emb_ok": emb_ok,
            "tokens_ok": tokens_ok,
            "weighting_ok": weighting_ok,
            "routers_ok": routers_ok,
            "routing_ok": routing_ok,
            "congestion_ok": congestion["ok"],
            "congestion": congestion,
            "cover": cover,
            "quality": self.quality().as_dict(),
        }
        report["ok"] = all(report[k] for k in (
            "cover_ok", "landmarks_ok", "emb_ok", "tokens_ok", "weighting_ok",
            "routers_ok", "routing_ok", "congestion_ok",
        ))
        return report

    def _check_routing(self, samples: int, seed: int) -> bool:
        """Sampled pairs within r of each other route inside a shared ball cluster."""
        rng = random.Random(seed)
        verts = sorted(self.weighting)
        for _ in range(samples if verts else 0):
            u = rng.choice(verts)
            dist, _ = dijkstra(self.g, [u], self.cut, bound=self.radius)
            v = rng.choice(sorted(dist))
            cids = [cid for cid in sorted(self._vertex_ball(u)) if self.cover.membership(cid, v)]
            if not cids:
                return False
            walk = self.cluster_path(cids[0], u, v)
            if not walk.is_valid(self.g) or walk.start != u or walk.end != v:
                return False
            if walk.length(self.g) > self.certdiam(cids[0]):
                return False
        return True

    def _check_congestion(self, samples: int, seed: int) -> dict:
        """Route sampled token demands through router embeddings and measure edge loads in G.

        Each routed walk stays within certdiam, and no edge of G carries more
        than κ·γ_emb walks, κ being the router congestion and γ_emb the
        embedding congestion.
        """
        rng = random.Random(seed + 1)
        gamma = max(self._loads().values(), default=0)
        worst, kappa_max = 0, 0
        ok = True
        for cid in rng.sample(sorted(self.routers), min(samples, len(self.routers))):
            router = self.routers[cid]
            alive = sorted(router.alive)
            rng.shuffle(alive)
            pairs = list(zip(alive[0::2], alive[1::2]))[:8]
            if not pairs:
                continue
            res = router.route_demand(pairs)
            kappa = res.congestion
            loads: dict[int, int] = {}
            bound = self.certdiam(cid)
            for path in res.paths:
                length = 0
                for reid in path.reids:
                    walk = self.emb[cid].get(reid)
                    if walk is None:
                        ok = False
                        continue
                    length += walk.length(self.g)
                    for eid in walk.eids:
                        loads[eid] = loads.get(eid, 0) + 1
                if length > bound:
                    ok = False
            top = max(loads.values(), default=0)
            worst, kappa_max = max(worst, top), max(kappa_max, kappa)
            if top > kappa * gamma:
                ok = False
        return {"gamma_emb": gamma, "kappa": kappa_max, "max_load": worst, "ok": ok}

    def check(self, samples: int = 20, seed: int = 0) -> dict:
        report = self.audit(samples, seed)
        if not report["ok"]:
            failing = sorted(k for k, val in report.items() if k.endswith("_ok") and not val)
            raise AuditFailure(f"certified ED audit failed: {', '.join(failing)}", report)
        return report

    def snapshot(self) -> dict:
        return {
            "cut": [[eid, c] for eid, c in sorted(self.cut.items())],
            "landmarks": sorted(self.landmarks.landmarks),
            "clusters": [
                {
                    "cid": cid,
                    "k": c.k,
                    "nodes": [[x[0], x[1], d] for x, d in sorted(c.members.items())],
                }
                for cid, c in sorted(self.cover.clusters.items())
            ],
            "quality": self.quality().as_dict(),
        }

    def dump_json(self) -> str:
        return json.dumps(self.snapshot(), indent=2, sort_keys=True)


class DenseCertifiedED(CertifiedED):
    """Certified ED whose nodes carry densities; routers index one token per unit of density."""

    dense = True

    def _term_density(self) -> int:
        return self.params.terminal_density

    def _prunes(self, rho: int, pruned: int) -> bool:
        return prunes_node(rho, pruned, self.params.mu)


# ═══════════════════════════════════════════════════════════════
# Operation wrappers
# ═══════════════════════════════════════════════════════════════

def init_certified_ed(
    g: DynGraph,
    h: int,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    batches: Optional[int] = None,
    weights: Optional[Mapping[int, int]] = None,
) -> CertifiedED:
    return CertifiedED.create(g, h, phi, params, batches=batches, weights=weights)


def ed_insert_node_weighting(ed: CertifiedED, A_new: Mapping[int, int]) -> CertifiedED:
    ed.apply([Unit(UpdateKind.ADD_WEIGHT, v, value=k) for v, k in sorted(A_new.items()) if k])
    return ed


def ed_delete_edges(ed: CertifiedED, F: Iterable[int]) -> CertifiedED:
    units = []
    for eid in sorted(set(F)):
        e = ed.g.edges.get(eid)
        if e is None:
            raise PreconditionViolated(f"edge {eid} is not in the graph")
        units.append(Unit(UpdateKind.DEL_EDGE, e.u, e.v, eid=eid))
    ed.apply(units)
    return ed


def ed_insert_edges(ed: CertifiedED, E_new: Iterable[tuple[int, int, int]]) -> CertifiedED:
    ed.apply([Unit(UpdateKind.ADD_EDGE, u, v, length) for u, v, length in E_new])
    return ed


def ed_maintain(
    g: DynGraph,
    stream: Iterable[Iterable[Unit]],
    h: int,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    batches: Optional[int] = None,
    dense: bool = False,
) -> Iterator[CertifiedED]:
    """Yield the ED after init and after every batch; rebuild when its budget runs out."""
    kind = DenseCertifiedED if dense else CertifiedED
    ed = kind.create(g, h, phi, params, batches=batches)
    yield ed
    for units in stream:
        units = list(units)
        before = ed.g.copy()
        try:
            ed.apply(units)
        except BudgetExceeded:
            g2, _ = apply_batch(before, units)
            logger.info("ED budget exhausted at epoch %d; rebuilding", g2.epoch)
            ed = kind.create(g2, h, phi, params, batches=batches)
        yield ed


def dense_init(
    g: DynGraph,
    h: int,
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    batches: Optional[int] = None,
    insertions: Optional[int] = None,
    density: Optional[Mapping[int, int]] = None,
) -> DenseCertifiedED:
    ed = DenseCertifiedED.create(g, h, phi, params, batches=batches, insertions=insertions, density=density)
    assert isinstance(ed, DenseCertifiedED)
    return ed


def dense_insert_nw(ed: CertifiedED, A_new: Mapping[int, int], density: int = 1) -> CertifiedED:
    ed.insert_nodes(A_new, density)
    return ed


dense_delete_edges = ed_delete_edges
dense_insert_edges = ed_insert_edges


def insert_landmarks_closure(
    eds: Sequence[CertifiedED],
    landmark_sets: Sequence[Iterable[int]],
    phi: float,
    params: GlobalParams = DEFAULT_PARAMS,
) -> tuple[list[CertifiedED], dict[int, int]]:
    """Insert landmark nodes of density ⌈1/φ⌉ until no ED produces a new landmark.

    Returns the EDs and the added weighting (one unit per inserted landmark).
    """
    frontier: set[int] = set()
    for ed, fresh in zip(eds, landmark_sets):
        fresh = set(fresh)
        if not fresh <= ed.landmarks.landmarks:
            raise PreconditionViolated(f"{sorted(fresh - ed.landmarks.landmarks)[:5]} are not landmarks")
        frontier |= fresh
    density = math.ceil(1 / phi)
    inserted: set[int] = set()
    rounds = 0
    while frontier:
        if rounds >= params.closure_cap:
            raise IterationCapExceeded(f"landmark closure still growing after {rounds} rounds")
        rounds += 1
        before = [set(ed.landmarks.landmarks) for ed in eds]
        for ed in eds:
            targets = {v: 1 for v in sorted(frontier) if v in ed.g.vertices and not ed.has_landmark_node(v)}
            if targets:
                ed.insert_nodes(targets, density, role="lm")
        inserted |= frontier
        grown: set[int] = set()
        for ed, old in zip(eds, before):
            grown |= ed.landmarks.landmarks - old
        frontier = grown - inserted
        logger.debug("landmark closure round %d: %d new landmarks", rounds, len(frontier))
    return list(eds), {v: 1 for v in sorted(inserted)}


__all__ = [
    "CertifiedED",
    "DenseCertifiedED",
    "Quality",
    "WitnessPlan",
    "dense_delete_edges",
    "dense_init",
    "dense_insert_edges",
    "dense_insert_nw",
    "ed_delete_edges",
    "ed_insert_edges",
    "ed_insert_node_weighting",
    "ed_maintain",
    "init_certified_ed",
    "init_landmarks",
    "insert_landmarks_closure",
    "length_sandwich_violations",
    "prunes_node",
    "witnessed_ed",
]
