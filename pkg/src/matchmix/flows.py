"""Path systems on a state graph, their congestion, and the resulting
multicommodity upper bound and congestion-based lower bound."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graphs import GraphError, SizeError
from .mixing import MixingResult, spectral_bound
from .stategraph import PERFECT, StateGraph

__all__ = [
    "PATH_KINDS",
    "PathSystem",
    "CongestionReport",
    "StructureError",
    "build_paths",
    "congestion",
    "congestion_explicit",
    "commodity_flow",
    "multicommodity_bound",
    "lower_bound",
]

PATH_KINDS = ("canonical_p1", "one_shortest_p2", "all_shortest_p3")
EXPLICIT_CAP = int(os.environ.get("MATCHMIX_PATH_CAP", "20000"))


class StructureError(GraphError):
    pass


@dataclass
class PathSystem:
    """Paths between every ordered pair of distinct states.

    Explicit kinds (p1, p2) are materialised lazily through :meth:`path`;
    p3 is represented by the distance matrix alone, the shortest-path DAG
    of each root being implied by it.
    """

    kind: str
    sg: StateGraph
    dist: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    prob: np.ndarray
    _parents: dict = field(default_factory=dict, repr=False)
    _seg1: dict = field(default_factory=dict, repr=False)
    _nearest: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_arcs(self) -> int:
        return len(self.src)

    def arc_id(self, s, d):
        keys = self.src * self.sg.size + self.dst
        q = np.asarray(s) * self.sg.size + np.asarray(d)
        idx = np.searchsorted(keys, q)
        if np.any(idx >= len(keys)) or np.any(keys[np.minimum(idx, len(keys) - 1)] != q):
            raise StructureError("path uses a pair that is not an arc of the state graph")
        return idx

    def parents(self, root: int) -> np.ndarray:
        """BFS tree of ``root``: each state's smallest-index shortest-path predecessor."""
        par = self._parents.get(root)
        if par is None:
            d = self.dist[root]
            on = d[self.dst] == d[self.src] + 1
            par = np.full(self.sg.size, np.iinfo(np.int64).max, dtype=np.int64)
            np.minimum.at(par, self.dst[on], self.src[on])
            par[root] = -1
            if len(self._parents) < 4096:
                self._parents[root] = par
        return par

    def _tree_path(self, x: int, y: int) -> list[int]:
        par = self.parents(x)
        out = [y]
        while out[-1] != x:
            out.append(int(par[out[-1]]))
        out.reverse()
        return out

    def nearest_perfect(self) -> np.ndarray:
        if self._nearest is None:
            perfect = np.array([i for i, c in enumerate(self.sg.classes) if c == PERFECT], dtype=np.int64)
            if not len(perfect):
                raise StructureError("canonical paths need at least one perfect matching in the state space")
            sub = self.dist[:, perfect]
            # argmin returns the first minimum, i.e. the smallest state index
            self._nearest = perfect[np.argmin(sub, axis=1)]
        return self._nearest

    def path(self, x: int, y: int) -> list[int]:
        if self.kind == "one_shortest_p2":
            return self._tree_path(x, y)
        if self.kind == "canonical_p1":
            near = self.nearest_perfect()
            a, b = int(near[x]), int(near[y])
            seg1 = self._seg1.get(x)
            if seg1 is None:
                seg1 = self._seg1[x] = self._tree_path(x, a)
            walk = seg1 + self._tree_path(a, b)[1:] + self._tree_path(b, y)[1:]
            return _deloop(walk)
        raise ValueError("all_shortest_p3 has no single path per pair")


def _deloop(walk: list[int]) -> list[int]:
    out: list[int] = []
    pos: dict[int, int] = {}
    for s in walk:
        if s in pos:
            cut = pos[s]
            for dropped in out[cut + 1:]:
                del pos[dropped]
            del out[cut + 1:]
        else:
            pos[s] = len(out)
            out.append(s)
    return out


@dataclass
class CongestionReport:
    kind: str
    rho1: float
    rho2: float
    argmax_arc: tuple[int, int]
    argmax_arc_rho1: tuple[int, int]
    load1: np.ndarray = field(repr=False)
    load2: np.ndarray = field(repr=False)
    bound_rho2: float | None = None
    lower_bound_rho1: float | None = None
    lazy_used: bool = False
    # congestion actually used in the bound (differs from rho2 on the lazy chain)
    rho2_certified: float | None = None


def build_paths(sg: StateGraph, kind: str) -> PathSystem:
    if kind not in PATH_KINDS:
        raise ValueError(f"unknown path system {kind!r}; expected one of {PATH_KINDS}")
    if kind != "all_shortest_p3" and sg.size > EXPLICIT_CAP:
        raise SizeError(f"{sg.size} states exceeds the explicit path-system cap {EXPLICIT_CAP}")
    dist = shortest_path(sg.adjacency(), method="D", unweighted=True)
    if np.isinf(dist).any():
        raise StructureError("state graph is disconnected")
    src, dst, prob = sg.arcs()
    return PathSystem(kind, sg, dist.astype(np.int64), src, dst, prob)


def _capacity(ps: PathSystem, sg: StateGraph) -> np.ndarray:
    # Q(a) = pi(s) P(s, d) on the chain being certified (may be the lazy one)
    if sg is ps.sg:
        return sg.pi[ps.src] * ps.prob
    p = np.asarray(sg.P[ps.src, ps.dst]).ravel()
    return sg.pi[ps.src] * p


def _dag_sweep(order_level, d, src, dst, weight_of, tree_parent=None):
    """Per-root accumulation of arc flows.

    Forward sweep counts shortest paths from the root (sigma); backward sweep
    accumulates delta[v] = w[v] + sum over DAG successors, where w[v] is the
    per-path flow to target v. An arc (s, t) of the DAG then carries
    sigma[s] * delta[t].
    """
    n = len(d)
    if tree_parent is None:
        on = d[dst] == d[src] + 1
    else:
        on = tree_parent[dst] == src
    arcs = np.flatnonzero(on)
    a_src, a_dst = src[arcs], dst[arcs]
    lvl = d[a_src]
    by_level = np.argsort(lvl, kind="stable")
    a_src, a_dst, arcs, lvl = a_src[by_level], a_dst[by_level], arcs[by_level], lvl[by_level]
    cuts = np.searchsorted(lvl, np.arange(order_level + 2))
    sigma = np.zeros(n)
    sigma[d == 0] = 1.0
    for L in range(order_level + 1):
        lo, hi = cuts[L], cuts[L + 1]
        if lo < hi:
            np.add.at(sigma, a_dst[lo:hi], sigma[a_src[lo:hi]])
    delta = weight_of(sigma)
    for L in range(order_level, -1, -1):
        lo, hi = cuts[L], cuts[L + 1]
        if lo < hi:
            np.add.at(delta, a_src[lo:hi], delta[a_dst[lo:hi]])
    # delta at a node now includes its own target weight plus descendants
    return arcs, sigma[a_src] * delta[a_dst]


def _accumulate(ps: PathSystem, use_tree: bool):
    sg = ps.sg
    n = sg.size
    pi = sg.pi
    load1 = np.zeros(ps.n_arcs)
    load2 = np.zeros(ps.n_arcs)
    for x in range(n):
        d = ps.dist[x]
        base = pi[x] * pi
        base[x] = 0.0
        parent = ps.parents(x) if use_tree else None
        for load, f in ((load1, base), (load2, base * d)):
            arcs, amount = _dag_sweep(int(d.max()), d, ps.src, ps.dst, lambda s, f=f: f / s, parent)
            np.add.at(load, arcs, amount)
        if use_tree and len(ps._parents) >= 4096:
            ps._parents.pop(x, None)
    return load1, load2


def _explicit_loads(ps: PathSystem):
    sg = ps.sg
    n = sg.size
    pi = sg.pi
    load1 = np.zeros(ps.n_arcs)
    load2 = np.zeros(ps.n_arcs)
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            path = ps.path(x, y)
            ids = ps.arc_id(path[:-1], path[1:])
            f1 = pi[x] * pi[y]
            load1[ids] += f1
            load2[ids] += f1 * (len(path) - 1)
    return load1, load2


def _report(ps, sg, load1, load2) -> CongestionReport:
    q = _capacity(ps, sg)
    if np.any(q <= 0):
        raise StructureError("an arc with zero capacity carries flow")
    r1, r2 = load1 / q, load2 / q
    if not len(q):
        # a single state: nothing to route
        return CongestionReport(ps.kind, 0.0, 0.0, (-1, -1), (-1, -1), r1, r2)
    i1, i2 = int(np.argmax(r1)), int(np.argmax(r2))
    return CongestionReport(
        kind=ps.kind,
        rho1=float(r1[i1]),
        rho2=float(r2[i2]),
        argmax_arc=(int(ps.src[i2]), int(ps.dst[i2])),
        argmax_arc_rho1=(int(ps.src[i1]), int(ps.dst[i1])),
        load1=r1,
        load2=r2,
    )


def congestion(sg: StateGraph, ps: PathSystem) -> CongestionReport:
    """Maximum arc loadings rho_1 (flow pi(x)pi(y)) and rho_2 (flow times path length).

    ``sg`` may be the lazy variant of ``ps.sg``; the paths are reused and only
    the arc capacities change.
    """
    if sg.size != ps.sg.size:
        raise ValueError("path system was built on a different state graph")
    if ps.kind == "all_shortest_p3":
        load1, load2 = _accumulate(ps, use_tree=False)
    elif ps.kind == "one_shortest_p2":
        load1, load2 = _accumulate(ps, use_tree=True)
    else:
        load1, load2 = _explicit_loads(ps)
    return _report(ps, sg, load1, load2)


def congestion_explicit(sg: StateGraph, ps: PathSystem) -> CongestionReport:
    """Congestion of a one-path-per-pair system by walking every path."""
    load1, load2 = _explicit_loads(ps)
    return _report(ps, sg, load1, load2)


def commodity_flow(ps: PathSystem, x: int, y: int, which: int = 2) -> np.ndarray:
    """Per-arc flow of the single commodity (x, y) under all shortest paths."""
    d = ps.dist
    pi = ps.sg.pi
    total = pi[x] * pi[y] * (d[x, y] if which == 2 else 1)
    on = (d[x, ps.src] + 1 + d[ps.dst, y]) == d[x, y]
    on &= d[x, ps.dst] == d[x, ps.src] + 1
    n = ps.sg.size
    fwd = np.zeros(n)
    bwd = np.zeros(n)
    fwd[x] = bwd[y] = 1.0
    dx, dy = d[x], d[y]
    arcs = np.flatnonzero(on)
    for L in range(int(d[x, y])):
        sel = arcs[dx[ps.src[arcs]] == L]
        np.add.at(fwd, ps.dst[sel], fwd[ps.src[sel]])
    for L in range(int(d[x, y])):
        sel = arcs[dy[ps.dst[arcs]] == L]
        np.add.at(bwd, ps.src[sel], bwd[ps.dst[sel]])
    out = np.zeros(ps.n_arcs)
    out[arcs] = fwd[ps.src[arcs]] * bwd[ps.dst[arcs]] * total / fwd[y]
    return out


def multicommodity_bound(
    report: CongestionReport, sg: StateGraph, epsilon: float, spectral: MixingResult | None = None,
    ps: PathSystem | None = None,
) -> float:
    """rho_2 * (ln(1/eps) + ln(1/pi_min)).

    The bound needs lambda_max = |lambda_2|. When the most negative eigenvalue
    dominates, the congestion is recomputed on the 1/2-lazy chain (same paths)
    and ``report.lazy_used`` is set.
    """
    spectral = spectral or spectral_bound(sg, epsilon)
    rho2 = report.rho2
    report.lazy_used = False
    if spectral.lambda2 is not None and abs(spectral.lambda_min) > abs(spectral.lambda2) + 1e-12:
        if ps is None:
            ps = build_paths(sg, report.kind)
        rho2 = congestion(sg.lazy(0.5), ps).rho2
        report.lazy_used = True
    report.rho2_certified = rho2
    report.bound_rho2 = rho2 * (math.log(1.0 / epsilon) + math.log(1.0 / sg.pi_min))
    return report.bound_rho2


def lower_bound(report: CongestionReport, sg: StateGraph, epsilon: float) -> float:
    """rho_1 ln(2/eps) / ln(1/pi_min): an order-of-growth witness with no constant."""
    if report.kind == "all_shortest_p3":
        raise ValueError("the lower bound needs exactly one path per pair (p1 or p2)")
    if sg.pi_min >= 1.0:
        report.lower_bound_rho1 = 0.0
        return 0.0
    report.lower_bound_rho1 = report.rho1 * math.log(2.0 / epsilon) / math.log(1.0 / sg.pi_min)
    return report.lower_bound_rho1
