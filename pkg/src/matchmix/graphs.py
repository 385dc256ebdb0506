"""Bipartite graphs: representation, family generators, exact matching counts
and the reduction gadgets used to relate near-perfect and perfect counts."""

from __future__ import annotations

import json
import os
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

__all__ = [
    "BipartiteGraph",
    "MatchingCounts",
    "FamilySpec",
    "GraphError",
    "SizeError",
    "generate_family",
    "family_holes",
    "expected_counts",
    "fibonacci",
    "ladder",
    "enumerate_matchings",
    "iter_matchings",
    "count_perfect",
    "count_all",
    "count_near",
    "is_threshold",
    "threshold_graph",
    "brualdi_ryser_product",
    "brualdi_ryser_count",
    "gadget_append_paths",
    "append_paths_identity",
    "gadget_tilde",
    "tilde_identity",
    "telescope_check",
]

FAMILIES = ("hexagon", "triangle_threshold", "regular_chain", "regular_ladder")
DEFAULT_COUNT_CAP = int(os.environ.get("MATCHMIX_COUNT_CAP", "40"))
DEFAULT_LIST_CAP = 10**6


class GraphError(ValueError):
    """Raised for malformed graphs or unmet preconditions."""


class SizeError(GraphError):
    """Raised when an instance exceeds a configured size cap."""


@dataclass(frozen=True)
class BipartiteGraph:
    n_u: int
    n_v: int
    edges: tuple[tuple[int, int], ...]
    label: str = ""

    def __post_init__(self):
        edges = tuple(sorted((int(u), int(v)) for u, v in self.edges))
        for u, v in edges:
            if not (0 <= u < self.n_u and 0 <= v < self.n_v):
                raise GraphError(f"edge ({u}, {v}) out of range for {self.n_u}x{self.n_v}")
        if len(set(edges)) != len(edges):
            raise GraphError("duplicate edges")
        object.__setattr__(self, "edges", edges)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def n(self) -> int:
        """Half the vertex count; only meaningful for balanced graphs."""
        return self.n_u

    @property
    def balanced(self) -> bool:
        return self.n_u == self.n_v

    @property
    def order(self) -> int:
        return self.n_u + self.n_v

    @property
    def adj_u(self) -> tuple[tuple[int, ...], ...]:
        return self._adjacency()[0]

    @property
    def adj_v(self) -> tuple[tuple[int, ...], ...]:
        return self._adjacency()[1]

    def _adjacency(self):
        cached = self.__dict__.get("_adj")
        if cached is None:
            au = [[] for _ in range(self.n_u)]
            av = [[] for _ in range(self.n_v)]
            for u, v in self.edges:
                au[u].append(v)
                av[v].append(u)
            cached = (tuple(map(tuple, au)), tuple(map(tuple, av)))
            object.__setattr__(self, "_adj", cached)
        return cached

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj_u[u]

    def degrees(self) -> tuple[list[int], list[int]]:
        return [len(a) for a in self.adj_u], [len(a) for a in self.adj_v]

    def biadjacency(self) -> list[list[int]]:
        rows = [[0] * self.n_v for _ in range(self.n_u)]
        for u, v in self.edges:
            rows[u][v] = 1
        return rows

    def is_connected(self) -> bool:
        if self.order == 0:
            return True
        seen_u, seen_v = {0} if self.n_u else set(), set() if self.n_u else {0}
        stack = [("u", 0)] if self.n_u else [("v", 0)]
        while stack:
            side, x = stack.pop()
            if side == "u":
                for y in self.adj_u[x]:
                    if y not in seen_v:
                        seen_v.add(y)
                        stack.append(("v", y))
            else:
                for y in self.adj_v[x]:
                    if y not in seen_u:
                        seen_u.add(y)
                        stack.append(("u", y))
        return len(seen_u) + len(seen_v) == self.order

    def without(self, us: Sequence[int] = (), vs: Sequence[int] = ()) -> "BipartiteGraph":
        """Delete vertices, relabelling the survivors in their original order."""
        us, vs = set(us), set(vs)
        umap = {u: i for i, u in enumerate(x for x in range(self.n_u) if x not in us)}
        vmap = {v: i for i, v in enumerate(x for x in range(self.n_v) if x not in vs)}
        edges = [(umap[u], vmap[v]) for u, v in self.edges if u in umap and v in vmap]
        return BipartiteGraph(len(umap), len(vmap), tuple(edges), self.label)

    def to_json(self) -> str:
        return json.dumps(
            {"n_u": self.n_u, "n_v": self.n_v, "edges": [list(e) for e in self.edges], "label": self.label}
        )

    @classmethod
    def from_json(cls, text: str | dict) -> "BipartiteGraph":
        data = json.loads(text) if isinstance(text, str) else text
        try:
            return cls(int(data["n_u"]), int(data["n_v"]), tuple(map(tuple, data["edges"])), data.get("label", ""))
        except (KeyError, TypeError) as exc:
            raise GraphError(f"bad edge-list JSON: {exc}") from exc

    @classmethod
    def from_biadjacency(cls, rows: Sequence[Sequence[int]], label: str = "") -> "BipartiteGraph":
        n_u = len(rows)
        n_v = len(rows[0]) if rows else 0
        edges = tuple((i, j) for i, row in enumerate(rows) for j, x in enumerate(row) if x)
        return cls(n_u, n_v, edges, label)


@dataclass
class MatchingCounts:
    """Exact matching counts; ``None`` marks a field that was not computed."""

    perfect: int | None = None
    near_by_holes: dict[tuple[int, int], int] = field(default_factory=dict)
    near_total: int | None = None
    all_matchings: int | None = None

    def near(self, u: int, v: int) -> int:
        return self.near_by_holes.get((u, v), 0)


@dataclass(frozen=True)
class FamilySpec:
    family: str
    size: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GraphError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.size < 1:
            raise GraphError("family size parameter must be positive")
        if self.family == "regular_ladder" and self.size % 2:
            raise GraphError("regular_ladder needs an even k for the graph to be bipartite")
        if self.family == "triangle_threshold" and self.size % 2 == 0:
            raise GraphError("triangle_threshold needs an odd n")

    @classmethod
    def parse(cls, text: str) -> "FamilySpec":
        name, _, k = text.partition(":")
        if not k:
            raise GraphError(f"family spec {text!r} must look like 'hexagon:3'")
        return cls(name.strip(), int(k))

    def __str__(self):
        return f"{self.family}:{self.size}"


# --------------------------------------------------------------------------
# family generators


def fibonacci(k: int) -> int:
    """F_1 = F_2 = 1."""
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


class _Builder:
    def __init__(self):
        self.n_u = 0
        self.n_v = 0
        self.edges: list[tuple[int, int]] = []

    def new_u(self, count=1):
        start = self.n_u
        self.n_u += count
        return list(range(start, start + count))

    def new_v(self, count=1):
        start = self.n_v
        self.n_v += count
        return list(range(start, start + count))

    def build(self, label):
        return BipartiteGraph(self.n_u, self.n_v, tuple(self.edges), label)


def ladder(k: int) -> BipartiteGraph:
    """Ladder with ``k`` rungs; rails alternate sides, rung i joins the rails."""
    if k < 1:
        raise GraphError("a ladder needs at least one rung")
    b = _Builder()
    _ladder_into(b, k)
    return b.build(f"ladder:{k}")


def _ladder_into(b: _Builder, k: int):
    # top[i] is on U for even i, bottom[i] on the other side
    top, bottom = [], []
    for i in range(k):
        if i % 2 == 0:
            top.append(("u", b.new_u()[0]))
            bottom.append(("v", b.new_v()[0]))
        else:
            top.append(("v", b.new_v()[0]))
            bottom.append(("u", b.new_u()[0]))

    def join(a, c):
        (sa, xa), (sc, xc) = a, c
        b.edges.append((xa, xc) if sa == "u" else (xc, xa))

    for i in range(k):
        join(top[i], bottom[i])
        if i + 1 < k:
            join(top[i], top[i + 1])
            join(bottom[i], bottom[i + 1])
    return top, bottom


def _hexagon(k: int) -> BipartiteGraph:
    b = _Builder()
    u, = b.new_u()
    v, = b.new_v()
    prev_exit = u
    for _ in range(k):
        a1, a2, a3 = b.new_u(3)
        b1, b2, b3 = b.new_v(3)
        # 6-cycle a1 b1 a2 b2 a3 b3; entry b1 and exit a3 are opposite corners
        b.edges += [(a1, b1), (a2, b1), (a2, b2), (a3, b2), (a3, b3), (a1, b3)]
        b.edges.append((prev_exit, b1))
        prev_exit = a3
    b.edges.append((prev_exit, v))
    return b.build(f"hexagon:{k} u={u} v={v}")


def _block(b: _Builder):
    """Cube graph minus one edge: 6 perfect matchings, 3 with entry/exit unmatched.

    Returns (entry V vertex, exit U vertex).
    """
    us = b.new_u(4)
    vs = b.new_v(4)
    for i in range(4):
        for j in range(4):
            if i != j and not (i == 3 and j == 0):
                b.edges.append((us[i], vs[j]))
    return vs[0], us[3]


def _row(b: _Builder, k: int, start_u: int):
    """k blocks in a chain fed from U vertex ``start_u``; returns the last exit."""
    prev = start_u
    for _ in range(k):
        entry, exit_ = _block(b)
        b.edges.append((prev, entry))
        prev = exit_
    return prev


def _regular_chain(k: int) -> BipartiteGraph:
    b = _Builder()
    u, = b.new_u()
    v, = b.new_v()
    for _ in range(3):
        last = _row(b, k, u)
        b.edges.append((last, v))
    return b.build(f"regular_chain:{k} u={u} v={v}")


def _regular_ladder(k: int) -> BipartiteGraph:
    b = _Builder()
    u, = b.new_u()
    v, = b.new_v()
    # upper track: u -> blocks -> ladder corner
    row1_exit = _row(b, k, u)
    top, bottom = _ladder_into(b, k + 2)
    (_, u_l), (_, v_l) = top[0], bottom[0]
    (_, v_l2), (_, u_l2) = top[-1], bottom[-1]
    b.edges.append((u, v_l))
    b.edges.append((row1_exit, v_l2))
    b.edges.append((u_l2, v))
    # second track starts at the ladder corner u_l
    row2_exit = _row(b, k, u_l)
    b.edges.append((row2_exit, v))
    # lower track G_2
    row3_exit = _row(b, k, u)
    b.edges.append((row3_exit, v))
    return b.build(f"regular_ladder:{k} u={u} v={v}")


def threshold_graph(row_sums: Sequence[int], n_v: int | None = None, label: str = "") -> BipartiteGraph:
    """Bipartite graph whose biadjacency rows are prefixes of ones."""
    n_v = max(row_sums, default=0) if n_v is None else n_v
    rows = [[1] * r + [0] * (n_v - r) for r in row_sums]
    return BipartiteGraph.from_biadjacency(rows, label) if rows else BipartiteGraph(0, n_v, ())


def _triangle_threshold(n: int) -> BipartiteGraph:
    g = threshold_graph([n - i for i in range(n)], n)
    return BipartiteGraph(g.n_u, g.n_v, g.edges, f"triangle_threshold:{n} u={n - 1} v={n - 1}")


def generate_family(spec: FamilySpec | str) -> BipartiteGraph:
    """Build the graph for a family member; see :func:`family_holes` for (u, v)."""
    if isinstance(spec, str):
        spec = FamilySpec.parse(spec)
    builder = {
        "hexagon": _hexagon,
        "triangle_threshold": _triangle_threshold,
        "regular_chain": _regular_chain,
        "regular_ladder": _regular_ladder,
    }[spec.family]
    return builder(spec.size)


def family_holes(spec: FamilySpec | str) -> tuple[int, int]:
    """The distinguished hole pair (u, v) of a family graph."""
    if isinstance(spec, str):
        spec = FamilySpec.parse(spec)
    if spec.family == "triangle_threshold":
        return spec.size - 1, spec.size - 1
    return 0, 0


def expected_counts(spec: FamilySpec | str) -> MatchingCounts:
    """Closed-form counts for a family; fields without a closed form stay ``None``."""
    if isinstance(spec, str):
        spec = FamilySpec.parse(spec)
    k = spec.size
    holes = family_holes(spec)
    if spec.family == "hexagon":
        perfect, near = 1, 2**k
    elif spec.family == "triangle_threshold":
        perfect, near = 1, 2 ** (k - 2) if k >= 2 else 1
    elif spec.family == "regular_chain":
        perfect, near = 6 ** (2 * k) * 3 ** (k + 1), 6 ** (3 * k)
    else:
        f = fibonacci
        m_g1 = 3 ** (2 * k) + 2 * f(k + 2) * 3**k * 6**k + 6 ** (2 * k)
        perfect = 6 ** (2 * k) * f(k + 3) * 3**k + 6**k * m_g1
        near = 6 ** (3 * k) * f(k + 3)
    return MatchingCounts(perfect=perfect, near_by_holes={holes: near})


# --------------------------------------------------------------------------
# exact counting


def _elimination_order(adj_u, us, vs):
    """Greedy U order keeping the set of half-processed V vertices small."""
    remaining = set(us)
    pending = {v: sum(1 for u in us if v in adj_u[u]) for v in vs}
    active: set[int] = set()
    order = []
    while remaining:
        best = None
        for x in remaining:
            nbrs = [y for y in adj_u[x] if y in pending]
            opened = sum(1 for y in nbrs if y not in active and pending[y] > 1)
            closed = sum(1 for y in nbrs if pending[y] == 1)
            key = (opened - closed, -len(nbrs), x)
            if best is None or key < best[0]:
                best = (key, x)
        x = best[1]
        remaining.discard(x)
        order.append(x)
        for y in adj_u[x]:
            if y in pending:
                pending[y] -= 1
                if pending[y] == 0:
                    active.discard(y)
                else:
                    active.add(y)
    return order


def _frontier_count(g: BipartiteGraph, us, vs, perfect: bool) -> int:
    """Count matchings of the subgraph induced by ``us`` and ``vs``.

    Recursion over U vertices (match to a free neighbour, or skip when not
    counting perfect matchings), memoised on the set of used V vertices that
    still have unprocessed neighbours.
    """
    us, vs = list(us), set(vs)
    if perfect and len(us) != len(vs):
        return 0
    if not us:
        return 1 if (not perfect or not vs) else 0
    uset = set(us)
    adj = [tuple(y for y in g.adj_u[x] if y in vs) if x in uset else () for x in range(g.n_u)]
    if perfect:
        covered = {y for x in us for y in adj[x]}
        if covered != vs:
            return 0
    order = _elimination_order(adj, us, vs)
    last = {}
    for pos, x in enumerate(order):
        for y in adj[x]:
            last[y] = pos
    closing = defaultdict(int)
    for y, pos in last.items():
        closing[pos] |= 1 << y
    states = {0: 1}
    for pos, x in enumerate(order):
        close = closing.get(pos, 0)
        nxt: dict[int, int] = defaultdict(int)
        for used, c in states.items():
            for y in adj[x]:
                bit = 1 << y
                if used & bit:
                    continue
                s = used | bit
                if perfect and (s & close) != close:
                    continue
                nxt[s & ~close] += c
            if not perfect:
                nxt[used & ~close] += c
        states = nxt
        if not states:
            return 0
    return sum(states.values())


def _check_cap(g: BipartiteGraph, cap: int | None):
    cap = DEFAULT_COUNT_CAP if cap is None else cap
    if g.order > cap:
        raise SizeError(f"graph has {g.order} vertices, above the counting cap {cap}")


def count_perfect(g: BipartiteGraph, cap: int | None = None) -> int:
    _check_cap(g, cap)
    return _frontier_count(g, range(g.n_u), range(g.n_v), perfect=True)


def count_all(g: BipartiteGraph, cap: int | None = None) -> int:
    _check_cap(g, cap)
    return _frontier_count(g, range(g.n_u), range(g.n_v), perfect=False)


def count_near(g: BipartiteGraph, u: int, v: int, cap: int | None = None) -> int:
    """|N_{u,v}(G)|: matchings covering everything except ``u`` and ``v``."""
    _check_cap(g, cap)
    if not (0 <= u < g.n_u and 0 <= v < g.n_v):
        raise GraphError("hole index out of range")
    us = [x for x in range(g.n_u) if x != u]
    vs = [y for y in range(g.n_v) if y != v]
    return _frontier_count(g, us, vs, perfect=True)


def enumerate_matchings(g: BipartiteGraph, mode: str = "all", cap: int | None = None) -> MatchingCounts:
    """Exact counts by exhaustive recursion.

    ``mode`` selects which counts are filled: ``"perfect"``, ``"near_perfect"``
    (perfect plus every hole class) or ``"all"`` (everything, including the
    number of all matchings).
    """
    if mode not in ("perfect", "near_perfect", "all"):
        raise GraphError(f"unknown mode {mode!r}")
    _check_cap(g, cap)
    out = MatchingCounts(perfect=_frontier_count(g, range(g.n_u), range(g.n_v), True) if g.balanced else 0)
    if mode in ("near_perfect", "all"):
        if g.balanced:
            for u in range(g.n_u):
                for v in range(g.n_v):
                    c = count_near(g, u, v, cap=g.order)
                    if c:
                        out.near_by_holes[(u, v)] = c
        out.near_total = sum(out.near_by_holes.values())
    if mode == "all":
        out.all_matchings = _frontier_count(g, range(g.n_u), range(g.n_v), False)
    return out


def iter_matchings(g: BipartiteGraph, mode: str = "all", limit: int = DEFAULT_LIST_CAP) -> Iterator[tuple[int, ...]]:
    """Yield matchings as partner tuples (``-1`` = unmatched U vertex).

    ``mode`` is ``"perfect"``, ``"near_perfect"`` (size n-1 in a balanced
    graph) or ``"all"``. Raises :class:`SizeError` after ``limit`` results.
    """
    target = {"perfect": g.n_u, "near_perfect": g.n_u - 1, "all": None}[mode]
    if target is not None and not g.balanced:
        return
    partner = [-1] * g.n_u
    used = [False] * g.n_v
    produced = 0

    def rec(i, size):
        nonlocal produced
        if target is not None and size + (g.n_u - i) < target:
            return
        if i == g.n_u:
            if target is None or size == target:
                produced += 1
                if produced > limit:
                    raise SizeError(f"more than {limit} matchings")
                yield tuple(partner)
            return
        for y in g.adj_u[i]:
            if not used[y]:
                used[y] = True
                partner[i] = y
                yield from rec(i + 1, size + 1)
                partner[i] = -1
                used[y] = False
        yield from rec(i + 1, size)

    yield from rec(0, 0)


# --------------------------------------------------------------------------
# threshold graphs


def _ferrers_rows(g: BipartiteGraph) -> list[int] | None:
    deg_u, deg_v = g.degrees()
    col_order = sorted(range(g.n_v), key=lambda y: (-deg_v[y], y))
    rank = {y: i for i, y in enumerate(col_order)}
    for x in range(g.n_u):
        if sorted(rank[y] for y in g.adj_u[x]) != list(range(deg_u[x])):
            return None
    return deg_u


def is_threshold(g: BipartiteGraph) -> bool:
    return _ferrers_rows(g) is not None


def brualdi_ryser_product(g: BipartiteGraph) -> int:
    """Raw product over ascending row sums s_0 <= s_1 <= ...: prod (s_j - j)."""
    rows = _ferrers_rows(g)
    if rows is None:
        raise GraphError("not a threshold graph (biadjacency is not a Ferrers matrix)")
    if not g.balanced:
        raise GraphError("perfect matchings need a square biadjacency matrix")
    prod = 1
    for j, s in enumerate(sorted(rows)):
        prod *= s - j
    return prod


def brualdi_ryser_count(g: BipartiteGraph) -> int:
    return max(brualdi_ryser_product(g), 0)


# --------------------------------------------------------------------------
# reduction gadgets


def gadget_append_paths(g: BipartiteGraph, u_star: int, v_star: int) -> BipartiteGraph:
    """Hang u*-v'-u'' off u* and v*-u'-v'' off v*.

    New vertices: u' = n_u, u'' = n_u + 1, v' = n_v, v'' = n_v + 1.
    """
    if not (0 <= u_star < g.n_u and 0 <= v_star < g.n_v):
        raise GraphError("u*/v* out of range")
    u1, u2, v1, v2 = g.n_u, g.n_u + 1, g.n_v, g.n_v + 1
    edges = g.edges + ((u_star, v1), (u2, v1), (u1, v_star), (u1, v2))
    return BipartiteGraph(g.n_u + 2, g.n_v + 2, edges, g.label)


def append_paths_identity(g: BipartiteGraph, u_star: int, v_star: int) -> tuple[Fraction, Fraction]:
    """Both sides of the hole-sum identity for :func:`gadget_append_paths`."""
    gp = gadget_append_paths(g, u_star, v_star)
    m, mp = count_perfect(g, cap=g.order), count_perfect(gp, cap=gp.order)
    if m == 0:
        raise GraphError("identity needs |M(G)| > 0")
    u2 = g.n_u + 1
    lhs = Fraction(sum(count_near(gp, u2, y, cap=gp.order) for y in range(gp.n_v)), mp)
    rhs = (
        Fraction(sum(count_near(g, u_star, y, cap=g.order) for y in range(g.n_v)), m)
        + 1
        + Fraction(count_near(g, u_star, v_star, cap=g.order), m)
    )
    return lhs, rhs


def gadget_tilde(g: BipartiteGraph, u_star: int) -> BipartiteGraph:
    """Pendant 2-paths on every V vertex and on every U vertex except u*.

    For v_i: new u_i' (adjacent to v_i) and v_i'' (adjacent to u_i').
    For u_i != u*: new v_i' (adjacent to u_i) and u_i'' (adjacent to v_i').
    New U vertices are numbered u_0', u_1', ... then u'' in order; same for V.
    """
    if not (0 <= u_star < g.n_u):
        raise GraphError("u* out of range")
    others = [x for x in range(g.n_u) if x != u_star]
    n_u, n_v = g.n_u, g.n_v
    u_prime = {y: n_u + i for i, y in enumerate(range(n_v))}
    u_dprime = {x: n_u + n_v + i for i, x in enumerate(others)}
    v_prime = {x: n_v + i for i, x in enumerate(others)}
    v_dprime = {y: n_v + len(others) + i for i, y in enumerate(range(n_v))}
    edges = list(g.edges)
    for y in range(n_v):
        edges += [(u_prime[y], y), (u_prime[y], v_dprime[y])]
    for x in others:
        edges += [(x, v_prime[x]), (u_dprime[x], v_prime[x])]
    return BipartiteGraph(n_u + n_v + len(others), n_v + len(others) + n_v, tuple(edges), g.label)


def tilde_identity(g: BipartiteGraph, u_star: int) -> tuple[Fraction, Fraction]:
    """Both sides of |N(G~)|/|M(G~)| = 4|N|/|M| + (2n-1) - 2 sum_v |N_{u*,v}|/|M|."""
    if not g.balanced:
        raise GraphError("identity needs a balanced graph")
    gt = gadget_tilde(g, u_star)
    m = count_perfect(g, cap=g.order)
    if m == 0:
        raise GraphError("identity needs |M(G)| > 0")
    mt = count_perfect(gt, cap=gt.order)
    near_t = sum(count_near(gt, x, y, cap=gt.order) for x in range(gt.n_u) for y in range(gt.n_v))
    near = sum(count_near(g, x, y, cap=g.order) for x in range(g.n_u) for y in range(g.n_v))
    row = sum(count_near(g, u_star, y, cap=g.order) for y in range(g.n_v))
    lhs = Fraction(near_t, mt)
    rhs = 4 * Fraction(near, m) + (2 * g.n - 1) - 2 * Fraction(row, m)
    return lhs, rhs


def telescope_check(g: BipartiteGraph, pm: Sequence[int]) -> Fraction:
    """Product of |M(G_i)| / |N_{u_{i+1},v_{i+1}}(G_i)| over the peeled graphs.

    ``pm`` is a perfect matching as a partner tuple. G_i deletes the first i
    matched pairs (ordered by U index). The result equals |M(G)|.
    """
    if not g.balanced or len(pm) != g.n_u or sorted(pm) != list(range(g.n_v)):
        raise GraphError("pm is not a perfect matching")
    if any(not g.has_edge(x, y) for x, y in enumerate(pm)):
        raise GraphError("pm uses a non-edge")
    product = Fraction(1)
    removed_u: list[int] = []
    removed_v: list[int] = []
    for x, y in enumerate(pm):
        gi = g.without(removed_u, removed_v)
        # indices of x, y inside G_i
        xi = x - sum(1 for r in removed_u if r < x)
        yi = y - sum(1 for r in removed_v if r < y)
        product *= Fraction(count_perfect(gi, cap=gi.order), count_near(gi, xi, yi, cap=gi.order))
        removed_u.append(x)
        removed_v.append(y)
    return product
