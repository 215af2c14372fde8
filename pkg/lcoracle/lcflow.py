"""lcoracle.lcflow — length-constrained flows, blockers, LocalFlow, cutmatch.

The directed `FlowNet` is only used here. Everything else in the package is
undirected; `cutmatch` builds its network from a DynGraph and hands back
undirected walks.

Blockers work on integer lengths with an exact DP over (total length,
vertex), so "lightest h-length path" is exact rather than bucketed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx
from scipy.special import logsumexp

from lcoracle.errors import PreconditionViolated, UnknownVertex
from lcoracle.graph import (
    INF,
    DynGraph,
    LandmarkSet,
    MovingCut,
    Node,
    Walk,
    add_cuts,
    cut_size,
    dijkstra,
    greedy_landmarks,
    path_from_tree,
    verify_landmarks,
)
from lcoracle.params import DEFAULT_PARAMS, GlobalParams

logger = logging.getLogger(__name__)

# Relative slack for comparing float weights against λ thresholds.
EPS = 1e-9

SOURCE = -1
SINK = -2


# ═══════════════════════════════════════════════════════════════
# Networks and flows
# ═══════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Arc:
    aid: int
    tail: int
    head: int
    length: int
    cap: int


@dataclass
class FlowNet:
    s: int = SOURCE
    t: int = SINK
    arcs: dict[int, Arc] = field(default_factory=dict)
    out: dict[int, list[int]] = field(default_factory=dict)

    @classmethod
    def from_arcs(cls, s: int, t: int, arcs: Iterable[tuple[int, int, int, int]]) -> "FlowNet":
        net = cls(s, t)
        for tail, head, length, cap in arcs:
            net.add_arc(tail, head, length, cap)
        return net

    def add_arc(self, tail: int, head: int, length: int, cap: int, aid: Optional[int] = None) -> int:
        if length < 1 or cap < 1:
            raise PreconditionViolated(f"arc {tail}->{head} needs length ≥ 1 and capacity ≥ 1")
        if aid is None:
            aid = max(self.arcs, default=-1) + 1
        self.arcs[aid] = Arc(aid, tail, head, int(length), int(cap))
        self.out.setdefault(tail, []).append(aid)
        self.out.setdefault(head, [])
        return aid

    def without(self, drop: Iterable[int]) -> "FlowNet":
        gone = set(drop)
        net = FlowNet(self.s, self.t)
        for aid in sorted(self.arcs):
            if aid not in gone:
                a = self.arcs[aid]
                net.add_arc(a.tail, a.head, a.length, a.cap, aid)
        return net

    def vertices(self) -> set[int]:
        return set(self.out) | {self.s, self.t}

    def sink_arc(self) -> dict[int, int]:
        return {a.tail: aid for aid, a in self.arcs.items() if a.head == self.t}

    def source_cap(self, v: int) -> int:
        return sum(a.cap for a in self.arcs.values() if a.tail == self.s and a.head == v)

    def sink_cap(self, v: int) -> int:
        return sum(a.cap for a in self.arcs.values() if a.tail == v and a.head == self.t)

    def cut_weight(self, w: Mapping[int, float]) -> float:
        """|w| = Σ U(e)·w(e)."""
        return sum(self.arcs[aid].cap * w.get(aid, 0.0) for aid in self.arcs)


@dataclass
class HLengthFlow:
    paths: list[tuple[tuple[int, ...], float]] = field(default_factory=list)

    @property
    def value(self) -> float:
        return sum(val for _, val in self.paths)

    def arc_flow(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for path, val in self.paths:
            for aid in path:
                out[aid] = out.get(aid, 0.0) + val
        return out

    def path_weight(self, path: Sequence[int], w: Mapping[int, float]) -> float:
        return sum(w.get(aid, 0.0) for aid in path)

    def feasible(self, net: FlowNet, h: float) -> bool:
        for aid, val in self.arc_flow().items():
            if val > net.arcs[aid].cap * (1 + EPS):
                return False
        for path, val in self.paths:
            if val < 0 or sum(net.arcs[aid].length for aid in path) > h:
                return False
            if net.arcs[path[0]].tail != net.s or net.arcs[path[-1]].head != net.t:
                return False
        return True


def lightest_path(
    net: FlowNet,
    w: Mapping[int, float],
    h: float,
    *,
    residual: Optional[Mapping[int, float]] = None,
    arcs: Optional[Iterable[int]] = None,
) -> tuple[Optional[tuple[int, ...]], float]:
    """Lightest s→t path of total length ≤ h over usable arcs; cycles removed."""
    usable = sorted(net.arcs if arcs is None else arcs)
    # a simple path never exceeds the total arc length
    H = int(min(math.floor(h), sum(net.arcs[aid].length for aid in usable)))
    if residual is not None:
        usable = [aid for aid in usable if residual.get(aid, 0) > 0]
    best: list[dict[int, float]] = [dict() for _ in range(H + 1)]
    pred: list[dict[int, int]] = [dict() for _ in range(H + 1)]
    if H < 0:
        return None, INF
    best[0][net.s] = 0.0
    for L in range(1, H + 1):
        row, prow = best[L], pred[L]
        for aid in usable:
            a = net.arcs[aid]
            if a.length > L:
                continue
            prev = best[L - a.length].get(a.tail)
            if prev is None:
                continue
            cand = prev + w.get(aid, 0.0)
            if cand < row.get(a.head, INF):
                row[a.head] = cand
                prow[a.head] = aid
    end_L, end_w = None, INF
    for L in range(1, H + 1):
        val = best[L].get(net.t)
        if val is not None and val < end_w:
            end_L, end_w = L, val
    if end_L is None:
        return None, INF
    arcs_rev: list[int] = []
    x, L = net.t, end_L
    while not (x == net.s and L == 0):
        aid = pred[L][x]
        arcs_rev.append(aid)
        x = net.arcs[aid].tail
        L -= net.arcs[aid].length
    path = list(reversed(arcs_rev))
    # loop erasure keeps weight and length from growing
    seen: dict[int, int] = {net.s: 0}
    kept: list[int] = []
    for aid in path:
        head = net.arcs[aid].head
        if head in seen:
            cut_at = seen[head]
            for dropped in kept[cut_at:]:
                seen.pop(net.arcs[dropped].head, None)
            del kept[cut_at:]
        kept.append(aid)
        seen[head] = len(kept)
    return tuple(kept), sum(w.get(aid, 0.0) for aid in kept)


# ═══════════════════════════════════════════════════════════════
# Blockers
# ═══════════════════════════════════════════════════════════════

def base_blocker(
    net: FlowNet,
    h: float,
    delta: float,
    lam: float,
    w: Mapping[int, float],
    *,
    strict: bool = True,
    arcs: Optional[Iterable[int]] = None,
    residual: Optional[dict[int, float]] = None,
) -> HLengthFlow:
    """Saturate lightest h-length paths while they weigh ≤ (1+δ)λ.

    On exit every unsaturated h-length path weighs more than (1+δ)λ and
    every flow path weighs at most (1+δ)λ.
    """
    if residual is None:
        residual = {aid: float(a.cap) for aid, a in net.arcs.items()}
    arc_list = sorted(net.arcs if arcs is None else arcs)
    limit = (1 + delta) * lam * (1 + EPS)
    flow = HLengthFlow()
    first = True
    while True:
        path, weight = lightest_path(net, w, h, residual=residual, arcs=arc_list)
        if path is None:
            break
        if first and strict and weight < lam * (1 - EPS):
            raise PreconditionViolated(f"λ={lam:.6g} exceeds the lightest h-length path weight {weight:.6g}")
        first = False
        if weight > limit:
            break
        amount = min(residual[aid] for aid in path)
        for aid in path:
            residual[aid] -= amount
        flow.paths.append((path, amount))
    return flow


def _check_local(net: FlowNet, w: Mapping[int, float], *, zero_sink: bool = True) -> None:
    for aid, a in net.arcs.items():
        if a.tail == net.s and a.head == net.t:
            raise PreconditionViolated("the network has an s→t arc")
        if a.head == net.t:
            if a.length != 1:
                raise PreconditionViolated(f"sink arc {aid} has length {a.length}, expected 1")
            if zero_sink and w.get(aid, 0.0) != 0:
                raise PreconditionViolated(f"sink arc {aid} has nonzero weight")


@dataclass
class LocalBlockerResult:
    flow: HLengthFlow
    visited: list[set[int]]
    saturated: list[set[int]]
    extra_rounds: int = 0


def local_blocker(
    net: FlowNet,
    h: float,
    delta: float,
    lam: float,
    w: Mapping[int, float],
    *,
    strict: bool = True,
) -> LocalBlockerResult:
    """Blocker that only ever looks at out-arcs of s and of sink-saturated vertices."""
    _check_local(net, w)
    if strict:
        _, lightest = lightest_path(net, w, h)
        if lightest < lam * (1 - EPS):
            raise PreconditionViolated(f"λ={lam:.6g} exceeds the lightest h-length path weight {lightest:.6g}")
    residual = {aid: float(a.cap) for aid, a in net.arcs.items()}
    sink_arc = net.sink_arc()

    def frontier() -> tuple[list[int], set[int], set[int]]:
        sat: set[int] = set()
        seen = {net.s}
        queue = [net.s]
        while queue:
            x = queue.pop(0)
            for aid in net.out.get(x, ()):
                if residual[aid] <= 0:
                    continue
                y = net.arcs[aid].head
                if y == net.t or y in seen:
                    continue
                seen.add(y)
                sa = sink_arc.get(y)
                if sa is None or residual[sa] <= 0:
                    sat.add(y)
                    queue.append(y)
        expand = {net.s} | sat
        local: set[int] = set()
        touched = set(expand)
        for x in expand:
            for aid in net.out.get(x, ()):
                local.add(aid)
                y = net.arcs[aid].head
                touched.add(y)
                if y in sink_arc:
                    local.add(sink_arc[y])
        return sorted(local), touched, sat

    flow = HLengthFlow()
    visited: list[set[int]] = []
    saturated: list[set[int]] = []
    H = max(1, int(math.floor(h)))
    for i in range(1, H + 1):
        arcs, touched, sat = frontier()
        visited.append(touched)
        saturated.append(sat)
        part = base_blocker(net, min(i + 1, H), delta, lam, w, strict=False, arcs=arcs, residual=residual)
        flow.paths.extend(part.paths)
    # A productive round saturates at least one arc for good, so the fixpoint
    # takes at most one round per arc plus the final empty one.
    extra = 0
    for _ in range(len(net.arcs) + 1):
        arcs, touched, sat = frontier()
        visited.append(touched)
        saturated.append(sat)
        part = base_blocker(net, H, delta, lam, w, strict=False, arcs=arcs, residual=residual)
        if not part.paths:
            break
        extra += 1
        flow.paths.extend(part.paths)
    return LocalBlockerResult(flow, visited, saturated, extra)


def wrapped_blocker(
    net: FlowNet,
    h: float,
    delta: float,
    lam: float,
    w: Mapping[int, float],
) -> HLengthFlow:
    """(1+δ, 2+3δ) blocker for nets whose sink arcs carry weight.

    Sink arcs heavier than (1+δ)λ are deleted, the rest are zeroed, then the
    local blocker runs on the modified net.
    """
    _check_local(net, w, zero_sink=False)
    limit = (1 + delta) * lam * (1 + EPS)
    sink_arcs = [aid for aid, a in net.arcs.items() if a.head == net.t]
    drop = [aid for aid in sink_arcs if w.get(aid, 0.0) > limit]
    sub = net.without(drop)
    w2 = dict(w)
    for aid in sink_arcs:
        w2[aid] = 0.0
    return local_blocker(sub, h, delta, lam, w2, strict=False).flow


# ═══════════════════════════════════════════════════════════════
# LocalFlow (multiplicative weights over blockers)
# ═══════════════════════════════════════════════════════════════

# Scaled weights are exp(log w − reference), clamped above at e^LOG_CLAMP.
LOG_CLAMP = 600.0
# A lightest path heavier than e^LOG_SHIFT is re-measured at a higher reference.
LOG_SHIFT = 500.0


@dataclass
class LocalFlowResult:
    """Flow, moving cut and the log-space state that produced them.

    `log_w` is authoritative; `w` and `w_min` are its exponentials and may
    underflow to 0 for arcs the flow never touched.
    """

    flow: HLengthFlow
    integral: HLengthFlow
    log_w: dict[int, float]
    log_w_min: dict[int, float]
    checkpoints: list[tuple[float, float]]
    eta: float
    zeta: float
    delta0: float
    log_base: float
    arc_count: dict[int, int]

    @property
    def value(self) -> float:
        return self.flow.value

    @property
    def w(self) -> dict[int, float]:
        return {aid: math.exp(lw) for aid, lw in self.log_w.items()}

    @property
    def w_min(self) -> dict[int, float]:
        return {aid: math.exp(lw) for aid, lw in self.log_w_min.items()}

    @property
    def base(self) -> float:
        return math.exp(self.log_base)

    def _ratio(self, net: FlowNet, log_w: Mapping[int, float]) -> float:
        v = self.flow.value
        if v <= 0:
            return INF
        return math.exp(_log_cut_weight(net, log_w) - math.log(v))

    def ratio(self, net: FlowNet) -> float:
        return self._ratio(net, self.log_w)

    def ratio_min(self, net: FlowNet) -> float:
        return self._ratio(net, self.log_w_min)

    def weight_invariant_ok(self, net: FlowNet) -> bool:
        step = math.log1p(self.delta0)
        for aid, a in net.arcs.items():
            expect = self.log_base + self.arc_count.get(aid, 0) / a.cap * step
            if not math.isclose(self.log_w[aid], expect, rel_tol=1e-9, abs_tol=1e-9):
                return False
        return True

    def phase_invariant_ok(self) -> bool:
        """λ ≤ d at every phase start, compared in log space."""
        return all(log_lam <= log_d + EPS for log_lam, log_d in self.checkpoints)

    def ratio_ok(self, net: FlowNet, k_mwu: float = DEFAULT_PARAMS.k_mwu) -> bool:
        """|w| and |w_min| both ≤ k_mwu · (ln n / δ) · val(f), δ being the LocalFlow accuracy."""
        n = max(len(net.vertices()), 2)
        bound = k_mwu * max(1.0, math.log(n)) / (6 * self.delta0)
        return self.ratio(net) <= bound and self.ratio_min(net) <= bound


def _is_local_net(net: FlowNet) -> bool:
    try:
        _check_local(net, {}, zero_sink=False)
    except PreconditionViolated:
        return False
    return True


def _log_cut_weight(net: FlowNet, log_w: Mapping[int, float]) -> float:
    """log |w| = log Σ U(e)·w(e)."""
    aids = [aid for aid in sorted(net.arcs) if aid in log_w]
    if not aids:
        return -INF
    return float(logsumexp([log_w[aid] for aid in aids], b=[net.arcs[aid].cap for aid in aids]))


def _scaled(log_w: Mapping[int, float], ref: float) -> dict[int, float]:
    return {aid: math.exp(min(lw - ref, LOG_CLAMP)) for aid, lw in log_w.items()}


def _log_lightest(net: FlowNet, log_w: Mapping[int, float], h: float, ref: float) -> float:
    """log weight of the lightest h-length path, or INF when there is none."""
    while True:
        path, weight = lightest_path(net, _scaled(log_w, ref), h)
        if path is None:
            return INF
        if weight < math.exp(LOG_SHIFT) or ref >= 0:
            return float(logsumexp([log_w[aid] for aid in path]))
        ref += LOG_SHIFT


def local_flow(net: FlowNet, h: float, delta: float, *, iter_const: int = 8) -> LocalFlowResult:
    """Approximate h-length max-flow f with a fractional moving cut w.

    Weights start at 1/m^ζ and grow by (1+δ₀)^{f(e)/U(e)}; each phase runs
    the blocker at the current λ until it returns nothing, then raises λ by
    (1+δ₀). λ also skips straight to the largest power below the current
    lightest path weight. The loop ends once λ ≥ 1, so w is feasible.

    Weights and λ live in log space, so 1/m^ζ may be far below the smallest
    float. Blockers see exp(log w − log λ) and run at λ = 1.
    """
    m = max(len(net.arcs), 2)
    n = max(len(net.vertices()), 2)
    d0 = delta / 6
    step = math.log1p(d0)
    zeta = (1 + 2 * d0) / d0 + 1
    eta = (d0 / (1 + d0)) / (zeta * math.log(m) + math.log((1 + d0) * (2 + 3 * d0)))
    log_base = -zeta * math.log(m)
    log_w = {aid: log_base for aid in net.arcs}
    count = {aid: 0 for aid in net.arcs}
    log_lam = log_base
    use_local = _is_local_net(net)
    iter_cap = math.ceil(iter_const * h * max(1.0, math.log(n) / step) / d0)
    checkpoints: list[tuple[float, float]] = []
    acc: dict[tuple[int, ...], float] = {}
    log_w_min: dict[int, float] = {}
    best = INF
    while log_lam < 0:
        log_d = _log_lightest(net, log_w, h, log_lam)
        if log_d == INF:
            break
        checkpoints.append((log_lam, log_d))
        log_ratio = _log_cut_weight(net, log_w) - log_d
        if log_ratio < best:
            best = log_ratio
            log_w_min = {aid: lw - log_d for aid, lw in log_w.items()}
        if log_d < log_lam:
            logger.warning("LocalFlow phase invariant slipped (log λ=%.3g > log d=%.3g); resetting λ", log_lam, log_d)
            log_lam = log_d
        else:
            log_lam += math.floor((log_d - log_lam) / step) * step
        if log_lam >= 0:
            break
        for _ in range(iter_cap):
            w = _scaled(log_w, log_lam)
            if use_local:
                part = wrapped_blocker(net, h, d0, 1.0, w)
            else:
                part = base_blocker(net, h, d0, 1.0, w, strict=False)
            if not part.paths:
                break
            for path, amount in part.paths:
                acc[path] = acc.get(path, 0.0) + amount
                for aid in path:
                    count[aid] += int(round(amount))
            for aid in {a for path, _ in part.paths for a in path}:
                log_w[aid] = log_base + count[aid] / net.arcs[aid].cap * step
        log_lam += step
    log_d_end = _log_lightest(net, log_w, h, min(log_lam, 0.0))
    if log_d_end < INF and _log_cut_weight(net, log_w) - log_d_end < best:
        log_w_min = {aid: lw - log_d_end for aid, lw in log_w.items()}
    if not log_w_min:
        log_w_min = dict(log_w)
    integral = HLengthFlow(sorted(acc.items()))
    flow = HLengthFlow([(p, eta * v) for p, v in integral.paths])
    logger.debug(
        "LocalFlow: %d phases, val(f)=%.4g, log|w|=%.4g, η=%.3g",
        len(checkpoints), flow.value, _log_cut_weight(net, log_w), eta,
    )
    return LocalFlowResult(flow, integral, log_w, log_w_min, checkpoints, eta, zeta, d0, log_base, count)


def dump_flow(net: FlowNet, flow: HLengthFlow, w: Mapping[int, float]) -> str:
    """Debug dump, one arc per line: `tail head flow weight`."""
    f = flow.arc_flow()
    lines = [
        f"{net.arcs[aid].tail} {net.arcs[aid].head} {f.get(aid, 0.0):.6g} {w.get(aid, 0.0):.6g}"
        for aid in sorted(net.arcs)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# ═══════════════════════════════════════════════════════════════
# Matching rounding
# ═══════════════════════════════════════════════════════════════

def _floor(x: float) -> int:
    return math.floor(x + EPS)


def _ceil(x: float) -> int:
    return math.ceil(x - EPS)


def round_matching(M: Mapping[tuple[int, int], float]) -> dict[tuple[int, int], int]:
    """Integral matching with every edge, load and the total within floor/ceil.

    Solved as a min-cost circulation with lower bounds; the return arc costs
    −1 so the total is pushed to ⌈|M|⌉.
    """
    pairs = {k: v for k, v in M.items() if v > EPS}
    if not pairs:
        return {}
    left: dict[int, float] = {}
    right: dict[int, float] = {}
    for (a, b), val in pairs.items():
        left[a] = left.get(a, 0.0) + val
        right[b] = right.get(b, 0.0) + val
    total = sum(pairs.values())

    G = nx.DiGraph()
    demand: dict[object, int] = {}
    lower: dict[tuple[object, object], int] = {}

    def arc(x: object, y: object, lo: int, hi: int, cost: int = 0) -> None:
        G.add_edge(x, y, capacity=hi - lo, weight=cost)
        lower[(x, y)] = lo
        demand[x] = demand.get(x, 0) + lo
        demand[y] = demand.get(y, 0) - lo

    S, T = ("S",), ("T",)
    for a, val in sorted(left.items()):
        arc(S, ("L", a), _floor(val), _ceil(val))
    for (a, b), val in sorted(pairs.items()):
        arc(("L", a), ("R", b), _floor(val), _ceil(val))
    for b, val in sorted(right.items()):
        arc(("R", b), T, _floor(val), _ceil(val))
    arc(T, S, _floor(total), _ceil(total), cost=-1)
    for node in G.nodes:
        G.nodes[node]["demand"] = demand.get(node, 0)
    flow = nx.min_cost_flow(G)
    out: dict[tuple[int, int], int] = {}
    for (a, b) in sorted(pairs):
        x, y = ("L", a), ("R", b)
        val = flow[x][y] + lower[(x, y)]
        if val:
            out[(a, b)] = val
    return out


# ═══════════════════════════════════════════════════════════════
# Cutmatch
# ═══════════════════════════════════════════════════════════════

@dataclass
class CutmatchResult:
    src_matched: list[Node]
    src_unmatched: list[Node]
    sink_matched: list[Node]
    sink_unmatched: list[Node]
    matching: dict[Node, Node]
    paths: dict[Node, Walk]
    cut: MovingCut
    landmarks: LandmarkSet
    congestion: float
    cut_ratio: float
    engine: str = "greedy"
    k_cm: float = DEFAULT_PARAMS.k_cm

    @property
    def within_budget(self) -> bool:
        """|C| ≤ K_CM·φ·h_cm·|src|."""
        return self.cut_ratio <= self.k_cm


def _greedy_match(
    g: DynGraph,
    cut: Mapping[int, int],
    pending: Sequence[Node],
    free: dict[int, list[Node]],
    h_cm: int,
    cap: int,
    extra: MovingCut,
    loads: dict[int, int],
    matching: dict[Node, Node],
    paths: dict[Node, Walk],
) -> None:
    """Match each pending node to the nearest free sink along unsaturated edges.

    A path through a saturated edge lengthens those edges past h_cm in the
    extra cut and retries, so no later search can use them.
    """
    for x in pending:
        while True:
            dist, parent = dijkstra(g, [x[0]], add_cuts(cut, extra), bound=h_cm)
            cands = sorted((d, v) for v, d in dist.items() if free.get(v))
            if not cands:
                break
            _, y = cands[0]
            walk = path_from_tree(parent, {x[0]}, y)
            sat = sorted({eid for eid in walk.eids if loads.get(eid, 0) >= cap})
            if not sat:
                matching[x] = free[y].pop(0)
                paths[x] = walk
                for eid in walk.eids:
                    loads[eid] = loads.get(eid, 0) + 1
                break
            for eid in sat:
                current = g.edges[eid].length + cut.get(eid, 0) + extra.get(eid, 0)
                extra[eid] = extra.get(eid, 0) + max(0, h_cm + 1 - current)


def _matching_net(
    g: DynGraph,
    cut: Mapping[int, int],
    pending: Sequence[Node],
    free: Mapping[int, list[Node]],
    h_cm: int,
    cap: int,
    params: GlobalParams,
) -> tuple[FlowNet, dict[int, int], dict[int, list[Node]]]:
    net = FlowNet(SOURCE, SINK)
    src_by_v: dict[int, list[Node]] = {}
    for x in pending:
        src_by_v.setdefault(x[0], []).append(x)
    for v in sorted(src_by_v):
        net.add_arc(SOURCE, v, 1, params.cm_scale_x * len(src_by_v[v]))
    arc_edge: dict[int, int] = {}
    for eid in sorted(g.edges):
        e = g.edges[eid]
        length = e.length + cut.get(eid, 0)
        if length > h_cm:
            continue
        arc_edge[net.add_arc(e.u, e.v, length, cap)] = eid
        arc_edge[net.add_arc(e.v, e.u, length, cap)] = eid
    for v in sorted(free):
        if free[v]:
            net.add_arc(v, SINK, 1, len(free[v]))
    return net, arc_edge, src_by_v


def _localflow_match(
    g: DynGraph,
    cut: Mapping[int, int],
    src: Sequence[Node],
    free: dict[int, list[Node]],
    h_cm: int,
    phi_cm: float,
    params: GlobalParams,
    extra: MovingCut,
    loads: dict[int, int],
    matching: dict[Node, Node],
    paths: dict[Node, Walk],
) -> None:
    """Rounds of LocalFlow, each rounded to an integral matching.

    A round whose flow value drops below φ·|pending| stops the loop; the
    pending nodes are then cut off by 3·h_cm·w_min of that round.
    """
    cap = math.ceil(1 / phi_cm)
    pending = list(src)
    last: Optional[tuple[FlowNet, dict[int, int], LocalFlowResult]] = None
    for _ in range(math.ceil(math.log2(len(src) + 1)) + 1):
        net, arc_edge, src_by_v = _matching_net(g, cut, pending, free, h_cm, cap, params)
        res = local_flow(net, h_cm + 2, params.lf_delta, iter_const=params.mwu_iter_const)
        last = (net, arc_edge, res)
        if res.value < phi_cm * len(pending):
            logger.debug("LocalFlow round stopped: val(f)=%.4g < φ·%d", res.value, len(pending))
            break
        before = len(matching)
        _round_into(net, arc_edge, res, src_by_v, free, loads, matching, paths)
        pending = [x for x in pending if x not in matching]
        if not pending or len(matching) == before:
            break
    if last is None or not pending:
        return
    _, arc_edge, res = last
    w_min = res.w_min
    for aid, eid in arc_edge.items():
        c = math.floor(3 * h_cm * w_min.get(aid, 0.0))
        if c > 0:
            extra[eid] = max(extra.get(eid, 0), c)


def _round_into(
    net: FlowNet,
    arc_edge: Mapping[int, int],
    res: LocalFlowResult,
    src_by_v: Mapping[int, list[Node]],
    free: dict[int, list[Node]],
    loads: dict[int, int],
    matching: dict[Node, Node],
    paths: dict[Node, Walk],
) -> None:
    frac: dict[tuple[int, int], float] = {}
    best: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {}
    for path, val in res.flow.paths:
        a, b = net.arcs[path[0]].head, net.arcs[path[-1]].tail
        frac[(a, b)] = frac.get((a, b), 0.0) + val
        if val > best.get((a, b), (-1.0, ()))[0]:
            best[(a, b)] = (val, path)
    for (a, b), k in sorted(round_matching(frac).items()):
        _, path = best[(a, b)]
        vertices = [a]
        eids: list[int] = []
        for aid in path[1:-1]:
            eids.append(arc_edge[aid])
            vertices.append(net.arcs[aid].head)
        walk = Walk(tuple(vertices), tuple(eids))
        for _ in range(k):
            pending = [x for x in src_by_v.get(a, []) if x not in matching]
            if not pending or not free.get(b):
                break
            matching[pending[0]] = free[b].pop(0)
            paths[pending[0]] = walk
            for eid in eids:
                loads[eid] = loads.get(eid, 0) + 1


def cutmatch(
    g: DynGraph,
    cut: Optional[Mapping[int, int]],
    src: Sequence[Node],
    sink: Sequence[Node],
    h_cm: int,
    phi_cm: float,
    params: GlobalParams = DEFAULT_PARAMS,
    *,
    sigma: Optional[float] = None,
    engine: Optional[str] = None,
    check_pre: bool = True,
) -> CutmatchResult:
    """Match src nodes to sink nodes along short paths; cut off the rest.

    Unmatched src and sink nodes end up more than h_cm apart in
    G−cut−C_CM, and matched pairs are joined by walks of G−cut length
    ≤ h_cm with edge congestion ≤ ⌈1/φ⌉ (plus whatever the LocalFlow engine
    routed first).

    Engines: "greedy" matches along nearest free sinks, "localflow" runs
    LocalFlow rounds first, and "auto" runs greedy and falls back to
    "localflow" when the greedy cut exceeds K_CM·φ·h_cm·|src|, keeping the
    smaller of the two cuts.
    """
    cut = dict(cut or {})
    for x in list(src) + list(sink):
        if x[0] not in g.vertices:
            raise UnknownVertex(f"node {x} sits on a vertex outside the graph")
    if check_pre:
        count: dict[int, int] = {}
        for x in list(src) + list(sink):
            count[x[0]] = count.get(x[0], 0) + 1
        short = [v for v in sorted(g.vertices) if count.get(v, 0) < g.degree(v) + 1]
        if short:
            raise PreconditionViolated(
                f"src + sink must be ≥ deg + 1 at every vertex; short at {short[:5]}"
            )
    engine = engine or params.cm_engine
    sigma = sigma if sigma is not None else h_cm / params.kappa_sigma
    order = sorted(src)

    def attempt(name: str) -> CutmatchResult:
        cap = math.ceil(1 / phi_cm)
        free: dict[int, list[Node]] = {}
        for y in sorted(sink):
            free.setdefault(y[0], []).append(y)
        extra: MovingCut = {}
        loads: dict[int, int] = {}
        matching: dict[Node, Node] = {}
        paths: dict[Node, Walk] = {}
        if name == "localflow" and order:
            _localflow_match(g, cut, order, free, h_cm, phi_cm, params, extra, loads, matching, paths)
        _greedy_match(g, cut, [x for x in order if x not in matching], free, h_cm, cap, extra, loads, matching, paths)
        landmarks = LandmarkSet(greedy_landmarks(g, extra, sigma, base=cut), sigma)
        matched_sinks = set(matching.values())
        return CutmatchResult(
            src_matched=[x for x in order if x in matching],
            src_unmatched=[x for x in order if x not in matching],
            sink_matched=sorted(matched_sinks),
            sink_unmatched=[y for y in sorted(sink) if y not in matched_sinks],
            matching=matching,
            paths=paths,
            cut={eid: c for eid, c in extra.items() if c},
            landmarks=landmarks,
            congestion=float(max(loads.values(), default=0)),
            cut_ratio=cut_size(extra) / (phi_cm * max(h_cm, 1) * len(order)) if order else 0.0,
            engine=name,
            k_cm=params.k_cm,
        )

    result = attempt("localflow" if engine == "localflow" else "greedy")
    if engine == "auto" and not result.within_budget:
        other = attempt("localflow")
        logger.info(
            "cutmatch h=%d: greedy cut ratio %.3g over K_CM=%.3g; LocalFlow gives %.3g",
            h_cm, result.cut_ratio, params.k_cm, other.cut_ratio,
        )
        if cut_size(other.cut) < cut_size(result.cut):
            result = other
    logger.debug(
        "cutmatch h=%d (%s): %d/%d matched, |C|=%d, congestion %.0f",
        h_cm, result.engine, len(result.src_matched), len(order), cut_size(result.cut), result.congestion,
    )
    return result


def verify_cutmatch(
    g: DynGraph,
    cut: Optional[Mapping[int, int]],
    res: CutmatchResult,
    h_cm: int,
) -> dict:
    """Contract checks; `within_budget` is reported next to them but not required."""
    cut = dict(cut or {})
    full = add_cuts(cut, res.cut)
    sources = {x[0] for x in res.src_unmatched}
    dist, _ = dijkstra(g, sources, full, bound=h_cm) if sources else ({}, {})
    separated = all(y[0] not in dist for y in res.sink_unmatched)
    paths_ok = True
    for x, y in res.matching.items():
        walk = res.paths.get(x)
        if walk is None or not walk.is_valid(g) or walk.start != x[0] or walk.end != y[0]:
            paths_ok = False
            break
        if walk.length(g, cut) > h_cm:
            paths_ok = False
            break
    report = {
        "separated": separated,
        "paths_ok": paths_ok,
        "sizes_ok": len(res.src_matched) <= len(res.sink_matched) == len(res.matching),
        "distinct_ok": len(set(res.matching.values())) == len(res.matching),
        "landmarks_ok": verify_landmarks(g, res.cut, res.landmarks, base=cut),
    }
    report["ok"] = all(report.values())
    report["cut_ratio"] = res.cut_ratio
    report["k_cm"] = res.k_cm
    report["within_budget"] = res.within_budget
    return report


__all__ = [
    "Arc",
    "CutmatchResult",
    "FlowNet",
    "HLengthFlow",
    "LocalBlockerResult",
    "LocalFlowResult",
    "base_blocker",
    "cutmatch",
    "dump_flow",
    "lightest_path",
    "local_blocker",
    "local_flow",
    "round_matching",
    "verify_cutmatch",
    "wrapped_blocker",
]
