"""lcoracle.router — dynamic routers over opaque integer tokens.

A router is a core graph built from a group hierarchy plus an affiliated
forest hanging off core tokens:

- groups of at least 10·b tokens split into b near-equal children, smaller
  groups become leaf cliques;
- every pair of sibling children is joined by a matching of the i-th
  members;
- `insert_matching` hangs fresh tokens below existing ones, one tree level
  per call;
- `delete_edges` removes router edges and prunes what can no longer route
  within the declared bound.

Callers (certified expander decompositions) keep their own map from tokens
to virtual nodes; the router never looks inside a token.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx

from lcoracle.errors import BudgetExceeded, DuplicateEndpoint, PreconditionViolated, UnknownVertex

logger = logging.getLogger(__name__)

# Surviving sibling matchings keep at least this share of max(|B1|, |B2|).
CLOSURE_SHARE = 0.8

REWEIGHT_ROUNDS = 3


@dataclass(frozen=True)
class RouterEdge:
    reid: int
    a: int
    b: int
    kind: str  # "clique", "match" or "tree"
    group: Optional[int] = None

    def other(self, x: int) -> int:
        return self.b if x == self.a else self.a


@dataclass
class Group:
    gid: int
    members: tuple[int, ...]
    parent: Optional[int]
    depth: int
    children: list[int] = field(default_factory=list)
    matchings: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    core_len: int = 0
    pruned: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class RouterPath:
    tokens: tuple[int, ...]
    reids: tuple[int, ...] = ()

    @property
    def length(self) -> int:
        return len(self.reids)

    def reverse(self) -> "RouterPath":
        return RouterPath(self.tokens[::-1], self.reids[::-1])


@dataclass
class RoutingResult:
    paths: list[RouterPath]
    congestion: int
    max_length: int


def _split(items: Sequence[int], parts: int) -> list[tuple[int, ...]]:
    q, r = divmod(len(items), parts)
    out = []
    start = 0
    for i in range(parts):
        size = q + (1 if i < r else 0)
        out.append(tuple(items[start:start + size]))
        start += size
    return out


class Router:
    def __init__(
        self,
        tokens: Iterable[int],
        b: int = 3,
        t_local: int = 8,
        prune_factor: float = 100.0,
    ) -> None:
        order = sorted(set(tokens))
        if not order:
            raise PreconditionViolated("a router needs at least one token")
        if b < 2:
            raise PreconditionViolated(f"router branching must be ≥ 2, got {b}")
        self.b = b
        self.t_local = t_local
        self.prune_factor = prune_factor
        self.groups: dict[int, Group] = {}
        self.edges: dict[int, RouterEdge] = {}
        self.deleted: set[int] = set()
        self.pair_edge: dict[frozenset[int], int] = {}
        self.incident: dict[int, set[int]] = {x: set() for x in order}
        self.leaf_of: dict[int, int] = {}
        self.core: set[int] = set(order)
        self.alive: set[int] = set(order)
        self.seen: set[int] = set(order)
        self.parent: dict[int, tuple[int, int]] = {}
        self.kids: dict[int, set[int]] = {x: set() for x in order}
        self.updates = 0
        self.inserts = 0
        self.pruned_history: list[set[int]] = []
        self._build(tuple(order), None, 0)

    # ── construction ──

    def _new_edge(self, a: int, b: int, kind: str, group: Optional[int]) -> int:
        reid = len(self.edges)
        self.edges[reid] = RouterEdge(reid, a, b, kind, group)
        self.incident[a].add(reid)
        self.incident[b].add(reid)
        if kind != "tree":
            self.pair_edge[frozenset((a, b))] = reid
        return reid

    def _build(self, members: tuple[int, ...], parent: Optional[int], depth: int) -> int:
        gid = len(self.groups)
        group = Group(gid, members, parent, depth)
        self.groups[gid] = group
        if len(members) < 10 * self.b:
            for i, a in enumerate(members):
                self.leaf_of[a] = gid
                for c in members[i + 1:]:
                    self._new_edge(a, c, "clique", gid)
            group.core_len = 1 if len(members) > 1 else 0
            return gid
        parts = _split(members, self.b)
        group.children = [self._build(part, gid, depth + 1) for part in parts]
        for i in range(len(parts)):
            for j in range(i + 1, len(parts)):
                group.matchings[(i, j)] = [
                    self._new_edge(a, c, "match", gid) for a, c in zip(parts[i], parts[j])
                ]
        group.core_len = 2 * max(self.groups[c].core_len for c in group.children) + 1
        return gid

    # ── queries ──

    @property
    def root(self) -> Group:
        return self.groups[0]

    @property
    def levels(self) -> int:
        return 1 + max(g.depth for g in self.groups.values())

    @property
    def declared_bound(self) -> int:
        """h_rt(i): core diameter plus two per update so far."""
        return self.root.core_len + 2 * self.updates

    def live_edges(self) -> list[RouterEdge]:
        return [e for r, e in sorted(self.edges.items()) if self._edge_live(r)]

    def _edge_live(self, reid: int) -> bool:
        if reid in self.deleted:
            return False
        e = self.edges[reid]
        return e.a in self.alive and e.b in self.alive

    def has_edge(self, reid: int) -> bool:
        return reid in self.edges and self._edge_live(reid)

    def max_degree(self) -> int:
        return max((sum(1 for r in self.incident[x] if self._edge_live(r)) for x in self.alive), default=0)

    def tree_depth(self, x: int) -> int:
        d = 0
        while x in self.parent:
            x = self.parent[x][0]
            d += 1
        return d

    def root_of(self, x: int) -> int:
        while x in self.parent:
            x = self.parent[x][0]
        return x

    def _chain(self, x: int) -> list[int]:
        """Groups from the root down to x's leaf."""
        out = []
        gid: Optional[int] = self.leaf_of[x]
        while gid is not None:
            out.append(gid)
            gid = self.groups[gid].parent
        return out[::-1]

    def _subtree(self, x: int) -> set[int]:
        out = {x}
        stack = [x]
        while stack:
            for c in self.kids.get(stack.pop(), ()):
                if c not in out:
                    out.add(c)
                    stack.append(c)
        return out

    # ── updates ──

    def _spend(self) -> None:
        if self.updates >= self.t_local:
            raise BudgetExceeded(f"router already absorbed {self.updates} of {self.t_local} updates")
        self.updates += 1

    def insert_matching(self, pairs: Iterable[tuple[int, int]]) -> list[int]:
        """Attach each fresh token below its existing partner; returns the new edge ids."""
        pairs = list(pairs)
        if not pairs:
            return []
        olds = [a for a, _ in pairs]
        news = [c for _, c in pairs]
        if len(set(olds)) != len(olds) or len(set(news)) != len(news):
            raise DuplicateEndpoint("matching reuses an endpoint")
        for a in olds:
            if a not in self.alive:
                raise DuplicateEndpoint(f"token {a} is not a live router vertex")
        for c in news:
            if c in self.seen:
                raise DuplicateEndpoint(f"token {c} is not fresh")
        self._spend()
        self.inserts += 1
        out = []
        for a, c in pairs:
            self.seen.add(c)
            self.alive.add(c)
            self.incident[c] = set()
            self.kids[c] = set()
            reid = self._new_edge(a, c, "tree", None)
            self.parent[c] = (a, reid)
            self.kids[a].add(c)
            out.append(reid)
        return out

    def delete_edges(self, reids: Iterable[int]) -> set[int]:
        """Delete router edges; returns the tokens pruned by this call."""
        reids = sorted(set(reids))
        if not reids:
            return set()
        for r in reids:
            if r not in self.edges:
                raise PreconditionViolated(f"router edge {r} does not exist")
        self._spend()
        pruned: set[int] = set()
        core_hit: set[int] = set()
        for r in reids:
            if r in self.deleted:
                continue
            self.deleted.add(r)
            e = self.edges[r]
            if e.kind == "tree":
                pruned |= self._subtree(e.b)
            else:
                core_hit.update((e.a, e.b))
        core_hit &= self.alive
        if core_hit:
            core_hit |= self._close(core_hit)
        for x in sorted(core_hit):
            pruned |= self._subtree(x)
        pruned &= self.alive
        self.alive -= pruned
        self.pruned_history.append(set(pruned))
        logger.debug("router delete: %d edges → %d pruned tokens", len(reids), len(pruned))
        return pruned

    def _close(self, hit: set[int]) -> set[int]:
        """Grow the pruned core set with the group rule and the matching closure."""
        gone = set(hit) | (self.core - self.alive)
        threshold = self.prune_factor * self.t_local
        order = sorted(self.groups.values(), key=lambda g: (-g.depth, g.gid))
        changed = True
        while changed:
            changed = False
            for group in order:
                if group.pruned or group.parent is None:
                    continue
                k = sum(1 for x in group.members if x in gone)
                if k and k >= len(group.members) / threshold:
                    group.pruned = True
                    gone.update(group.members)
                    changed = True
            for group in order:
                if group.is_leaf:
                    continue
                for (i, j), edges in sorted(group.matchings.items()):
                    ci, cj = self.groups[group.children[i]], self.groups[group.children[j]]
                    left = [x for x in ci.members if x not in gone]
                    right = [x for x in cj.members if x not in gone]
                    if not left or not right:
                        continue
                    surviving = sum(
                        1 for r in edges
                        if r not in self.deleted and self.edges[r].a not in gone and self.edges[r].b not in gone
                    )
                    if surviving < CLOSURE_SHARE * max(len(ci.members), len(cj.members)):
                        smaller = ci if (len(left), -ci.gid) < (len(right), -cj.gid) else cj
                        smaller.pruned = True
                        gone.update(smaller.members)
                        changed = True
        return gone & self.alive

    # ── paths ──

    def _check(self, x: int) -> None:
        if x not in self.alive:
            raise UnknownVertex(f"token {x} is not a live router vertex")

    def _ascent(self, x: int) -> tuple[list[int], list[int]]:
        tokens, reids = [x], []
        while x in self.parent:
            x, r = self.parent[x]
            tokens.append(x)
            reids.append(r)
        return tokens, reids

    def _core_path(self, x: int, y: int, depth: int = 0) -> tuple[list[int], list[int]]:
        if x == y:
            return [x], []
        cx, cy = self._chain(x), self._chain(y)
        k = depth
        while k + 1 < len(cx) and k + 1 < len(cy) and cx[k + 1] == cy[k + 1]:
            k += 1
        group = self.groups[cx[k]]
        if group.is_leaf:
            r = self.pair_edge[frozenset((x, y))]
            if not self._edge_live(r):
                raise PreconditionViolated(f"leaf edge {x}–{y} is gone but both ends survive")
            return [x, y], [r]
        i = group.children.index(cx[k + 1])
        j = group.children.index(cy[k + 1])
        edges = group.matchings[(min(i, j), max(i, j))]
        live = [r for r in edges if self._edge_live(r)]
        if not live:
            raise PreconditionViolated(f"group {group.gid} lost every matching edge between children {i} and {j}")
        own = [r for r in live if x in (self.edges[r].a, self.edges[r].b)]
        r = own[0] if own else live[0]
        e = self.edges[r]
        a = e.a if self.leaf_of_in(e.a, cx[k + 1]) else e.b
        c = e.other(a)
        t1, r1 = self._core_path(x, a, k + 1)
        t2, r2 = self._core_path(c, y, k + 1)
        return t1 + t2, r1 + [r] + r2

    def leaf_of_in(self, x: int, gid: int) -> bool:
        return x in self.groups[gid].members

    def path(self, u: int, v: int) -> RouterPath:
        """Tree ascent to the core, recursive descent through surviving matchings."""
        self._check(u)
        self._check(v)
        if u == v:
            return RouterPath((u,))
        tu, ru = self._ascent(u)
        tv, rv = self._ascent(v)
        if tu[-1] == tv[-1]:
            common = set(tv)
            cut = next(i for i, x in enumerate(tu) if x in common)
            j = tv.index(tu[cut])
            tokens = tu[:cut + 1] + tv[:j][::-1]
            reids = ru[:cut] + rv[:j][::-1]
            return RouterPath(tuple(tokens), tuple(reids))
        ct, cr = self._core_path(tu[-1], tv[-1])
        tokens = tu + ct[1:] + tv[:-1][::-1]
        reids = ru + cr + rv[::-1]
        return RouterPath(tuple(tokens), tuple(reids))

    def path_ok(self, p: RouterPath) -> bool:
        if len(p.tokens) != len(p.reids) + 1:
            return False
        for k, r in enumerate(p.reids):
            if not self.has_edge(r):
                return False
            e = self.edges[r]
            if {e.a, e.b} != {p.tokens[k], p.tokens[k + 1]}:
                return False
        return all(x in self.alive for x in p.tokens)

    def route_demand(self, demand: Sequence[tuple[int, int]]) -> RoutingResult:
        """Route unit demands: router paths, then congestion-aware rerouting rounds.

        A rerouted path is kept only if it stays within the declared bound.
        """
        paths = [self.path(u, v) for u, v in demand]
        G = nx.Graph()
        for e in self.live_edges():
            G.add_edge(e.a, e.b, reid=e.reid)
        bound = self.declared_bound
        for _ in range(REWEIGHT_ROUNDS):
            loads = _loads(paths)
            for (a, c, data) in G.edges(data=True):
                data["weight"] = 1.0 + loads.get(data["reid"], 0)
            for k, (u, v) in enumerate(demand):
                if u == v:
                    continue
                tokens = nx.shortest_path(G, u, v, weight="weight")
                if len(tokens) - 1 > bound:
                    continue
                reids = tuple(G.edges[a, c]["reid"] for a, c in zip(tokens, tokens[1:]))
                cand = RouterPath(tuple(tokens), reids)
                trial = paths[:k] + [cand] + paths[k + 1:]
                if max(_loads(trial).values(), default=0) <= max(loads.values(), default=0):
                    paths = trial
                    loads = _loads(paths)
        loads = _loads(paths)
        return RoutingResult(
            paths,
            max(loads.values(), default=0),
            max((p.length for p in paths), default=0),
        )

    # ── audit ──

    def audit(self, samples: int = 50, seed: int = 0) -> dict:
        alive = sorted(self.alive)
        edges_ok = all(e.a in self.alive and e.b in self.alive for e in self.live_edges())
        forest_ok = all(self.root_of(x) in self.core for x in alive) and all(
            self.tree_depth(x) <= self.inserts for x in alive
        )
        closure_ok = True
        for group in self.groups.values():
            if group.is_leaf:
                continue
            for (i, j), edges in group.matchings.items():
                ci, cj = self.groups[group.children[i]], self.groups[group.children[j]]
                if not any(x in self.alive for x in ci.members) or not any(x in self.alive for x in cj.members):
                    continue
                surviving = sum(1 for r in edges if self._edge_live(r))
                if surviving < CLOSURE_SHARE * max(len(ci.members), len(cj.members)):
                    closure_ok = False
        rng = random.Random(seed)
        paths_ok = True
        longest = 0
        for _ in range(samples if len(alive) > 1 else 0):
            u, v = rng.choice(alive), rng.choice(alive)
            p = self.path(u, v)
            longest = max(longest, p.length)
            if not self.path_ok(p) or p.tokens[0] != u or p.tokens[-1] != v or p.length > self.declared_bound:
                paths_ok = False
        report = {
            "edges_ok": edges_ok,
            "forest_ok": forest_ok,
            "closure_ok": closure_ok,
            "paths_ok": paths_ok,
            "longest": longest,
            "bound": self.declared_bound,
            "alive": len(alive),
            "max_degree": self.max_degree(),
        }
        report["ok"] = edges_ok and forest_ok and closure_ok and paths_ok
        return report


def _loads(paths: Iterable[RouterPath]) -> dict[int, int]:
    out: dict[int, int] = {}
    for p in paths:
        for r in p.reids:
            out[r] = out.get(r, 0) + 1
    return out


def router_init(tokens: Iterable[int], b: int = 3, t_local: int = 8, prune_factor: float = 100.0) -> Router:
    return Router(tokens, b, t_local, prune_factor)


def router_delete_edges(r: Router, reids: Iterable[int]) -> tuple[Router, set[int]]:
    return r, r.delete_edges(reids)


def router_insert_matching(r: Router, pairs: Iterable[tuple[int, int]] | Mapping[int, int]) -> Router:
    if isinstance(pairs, Mapping):
        pairs = sorted(pairs.items())
    r.insert_matching(pairs)
    return r


def router_path(r: Router, u: int, v: int) -> RouterPath:
    return r.path(u, v)


def levels_for(n: int, b: int) -> int:
    """Upper bound on hierarchy depth for n tokens."""
    return max(1, math.ceil(math.log(max(n, 1), b))) + 1


__all__ = [
    "Group",
    "Router",
    "RouterEdge",
    "RouterPath",
    "RoutingResult",
    "levels_for",
    "router_delete_edges",
    "router_init",
    "router_insert_matching",
    "router_path",
]
