"""Explicit state graphs of the three matching chains.

A matching is a tuple ``partner`` with one entry per U vertex: the matched V
vertex, or ``-1``. Every chain picks an edge of the bipartite graph uniformly
at random and applies a local rule to it; the resulting transition matrix is
stored sparse together with its stationary distribution.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching

from .graphs import BipartiteGraph, GraphError, MatchingCounts, SizeError

__all__ = [
    "ChainKind",
    "StateGraph",
    "Matching",
    "NoPerfectMatchingError",
    "propose",
    "neighbors",
    "jsv_weights",
    "build_state_graph",
    "find_perfect_matching",
    "holes",
    "matching_edges",
]

Matching = tuple  # partner per U vertex, -1 if unmatched
CHAINS = ("broder", "jsv", "monomer_dimer")
DEFAULT_STATE_CAP = int(os.environ.get("MATCHMIX_STATE_CAP", "200000"))
PERFECT = "perfect"


class NoPerfectMatchingError(GraphError):
    pass


@dataclass(frozen=True)
class ChainKind:
    kind: str
    laziness: float = 0.0

    def __post_init__(self):
        if self.kind not in CHAINS:
            raise GraphError(f"unknown chain {self.kind!r}; expected one of {CHAINS}")
        if not 0.0 <= self.laziness < 1.0:
            raise GraphError("laziness must lie in [0, 1)")

    def __str__(self):
        return self.kind if not self.laziness else f"{self.kind}(lazy={self.laziness:g})"


def matching_edges(m: Matching) -> list[tuple[int, int]]:
    return [(x, y) for x, y in enumerate(m) if y >= 0]


def _inverse(m: Matching, n_v: int) -> list[int]:
    inv = [-1] * n_v
    for x, y in enumerate(m):
        if y >= 0:
            inv[y] = x
    return inv


def holes(m: Matching, g: BipartiteGraph):
    """``"perfect"``, the hole pair (u, v) of a near-perfect matching, or
    ``None`` for any other matching."""
    size = sum(1 for y in m if y >= 0)
    if g.balanced and size == g.n_u:
        return PERFECT
    if g.balanced and size == g.n_u - 1:
        u = m.index(-1)
        v = next(y for y, x in enumerate(_inverse(m, g.n_v)) if x < 0)
        return (u, v)
    return None


def _with(m, changes):
    out = list(m)
    for x, y in changes:
        out[x] = y
    return tuple(out)


def propose(m: Matching, inv: Sequence[int], edge: tuple[int, int], kind: str, hole=None) -> Matching:
    """Apply the move rule of ``kind`` for the chosen edge; returns ``m`` on a loop.

    ``inv`` maps V vertices to their partner (or -1). ``hole`` is the state's
    class as returned by :func:`holes` (recomputed when omitted).
    """
    x, y = edge
    if kind == "monomer_dimer":
        if m[x] == y:
            return _with(m, [(x, -1)])
        xf, yf = m[x] < 0, inv[y] < 0
        if xf and yf:
            return _with(m, [(x, y)])
        if xf:
            return _with(m, [(inv[y], -1), (x, y)])
        if yf:
            return _with(m, [(x, y)])
        return m
    if hole is None:
        n_v = len(inv)
        free_u = [i for i, p in enumerate(m) if p < 0]
        free_v = [j for j in range(n_v) if inv[j] < 0]
        if not free_u and not free_v:
            hole = PERFECT
        elif len(free_u) == 1 and len(free_v) == 1:
            hole = (free_u[0], free_v[0])
        else:
            raise GraphError("state is neither perfect nor near-perfect")
    if hole == PERFECT:
        return _with(m, [(x, -1)]) if m[x] == y else m
    u, v = hole
    if x == u and y == v:
        return _with(m, [(x, y)])
    if x == u:
        # y is matched to x2; x2 becomes the new U hole
        return _with(m, [(inv[y], -1), (x, y)])
    if y == v:
        # x is matched to y2; y2 becomes the new V hole
        return _with(m, [(x, y)])
    return m


def jsv_weights(counts: MatchingCounts) -> dict:
    """Exact weights per state class: 1 for perfect matchings and
    |M(G)|/|N_{u,v}(G)| for the hole class (u, v). Empty classes are absent."""
    if not counts.perfect:
        raise NoPerfectMatchingError("JSV weights need |M(G)| > 0")
    w = {PERFECT: Fraction(1)}
    for key, c in counts.near_by_holes.items():
        if c:
            w[key] = Fraction(counts.perfect, c)
    return w


def _acceptance(kind, weights, src_class, dst_class) -> float:
    if kind != "jsv":
        return 1.0
    if weights is None:
        raise GraphError("the jsv chain needs exact weights")
    ratio = weights[dst_class] / weights[src_class]
    return 1.0 if ratio >= 1 else float(ratio)


def neighbors(
    m: Matching, g: BipartiteGraph, chain: ChainKind | str, weights: dict | None = None
) -> list[tuple[Matching, float]]:
    """All one-step successors of ``m`` with their transition probabilities.

    The self-loop (if it carries mass) is included as ``(m, p)``; entries
    are sorted by state with the loop last.
    """
    chain = ChainKind(chain) if isinstance(chain, str) else chain
    inv = _inverse(m, g.n_v)
    hole = holes(m, g)
    if chain.kind != "monomer_dimer" and hole is None:
        raise GraphError("broder/jsv states must be perfect or near-perfect")
    if chain.kind == "jsv" and weights is None:
        raise GraphError("the jsv chain needs exact weights")
    mass: dict[Matching, float] = {}
    step = (1.0 - chain.laziness) / g.m
    for e in g.edges:
        nxt = propose(m, inv, e, chain.kind, hole)
        if nxt == m:
            continue
        p = step * _acceptance(chain.kind, weights, hole, holes(nxt, g) if chain.kind == "jsv" else None)
        mass[nxt] = mass.get(nxt, 0.0) + p
    out = sorted(mass.items())
    loop = 1.0 - sum(p for _, p in out)
    if loop > 1e-15:
        out.append((m, loop))
    return out


def find_perfect_matching(g: BipartiteGraph) -> Matching | None:
    if not g.balanced:
        return None
    if g.n_u == 0:
        return ()
    rows, cols = zip(*g.edges) if g.edges else ((), ())
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n_u, g.n_v))
    match = maximum_bipartite_matching(a, perm_type="column")
    if (match < 0).any():
        return None
    return tuple(int(y) for y in match)


@dataclass
class StateGraph:
    """Explicit Markov chain over matchings.

    ``P`` is the sparse transition matrix in state-discovery order, ``pi`` the
    stationary distribution, ``classes[i]`` the class of state i (see
    :func:`holes`), ``weights`` the exact per-state weights (None for
    uniform chains) and ``counts`` the class sizes gathered during the scan.
    """

    P: sp.csr_matrix
    pi: np.ndarray
    chain: ChainKind
    states: list = field(default_factory=list)
    source: BipartiteGraph | None = None
    classes: list = field(default_factory=list)
    weights: list | None = None
    counts: MatchingCounts | None = None

    @property
    def size(self) -> int:
        return self.P.shape[0]

    @property
    def pi_min(self) -> float:
        return float(self.pi.min())

    @property
    def index(self) -> dict:
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {s: i for i, s in enumerate(self.states)}
            self.__dict__["_index"] = cached
        return cached

    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Non-loop arcs (src, dst, probability), sorted by (src, dst)."""
        coo = self.P.tocoo()
        keep = coo.row != coo.col
        src, dst, p = coo.row[keep], coo.col[keep], coo.data[keep]
        order = np.lexsort((dst, src))
        return src[order].astype(np.int64), dst[order].astype(np.int64), p[order]

    def adjacency(self) -> sp.csr_matrix:
        """0/1 adjacency of Gamma without loops."""
        src, dst, _ = self.arcs()
        n = self.size
        return sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))

    def has_self_loop(self) -> bool:
        return bool((self.P.diagonal() > 0).any())

    def components(self) -> list[list[int]]:
        ncomp, labels = connected_components(self.adjacency(), directed=False)
        return [np.flatnonzero(labels == c).tolist() for c in range(ncomp)]

    def is_bipartite(self) -> bool:
        """True when Gamma (loops included) admits a proper 2-colouring."""
        if self.has_self_loop():
            return False
        adj = self.adjacency()
        colour = np.full(self.size, -1)
        for root in range(self.size):
            if colour[root] >= 0:
                continue
            colour[root] = 0
            queue = deque([root])
            while queue:
                x = queue.popleft()
                for y in adj.indices[adj.indptr[x]:adj.indptr[x + 1]]:
                    if colour[y] < 0:
                        colour[y] = 1 - colour[x]
                        queue.append(y)
                    elif colour[y] == colour[x]:
                        return False
        return True

    def lazy(self, laziness: float = 0.5) -> "StateGraph":
        """The chain (1 - l) P + l I with the same stationary distribution."""
        if self.chain.laziness:
            base = (self.P - self.chain.laziness * sp.identity(self.size)) / (1.0 - self.chain.laziness)
        else:
            base = self.P
        P = ((1.0 - laziness) * base + laziness * sp.identity(self.size)).tocsr()
        P.eliminate_zeros()
        return replace(self, P=P, chain=ChainKind(self.chain.kind, laziness))

    def check(self, tol: float = 1e-12) -> None:
        """Assert row-stochasticity, reversibility and connectivity."""
        rows = np.asarray(self.P.sum(axis=1)).ravel()
        if np.abs(rows - 1.0).max(initial=0.0) > tol:
            raise AssertionError(f"row sums deviate from 1 by {np.abs(rows - 1).max():.3g}")
        flow = sp.diags(self.pi) @ self.P
        asym = abs(flow - flow.T)
        if asym.nnz and asym.max() > tol:
            raise AssertionError(f"detailed balance violated by {asym.max():.3g}")
        comps = self.components()
        if len(comps) > 1:
            raise AssertionError(f"state graph has {len(comps)} components: {[len(c) for c in comps]}")

    @classmethod
    def from_matrix(cls, P, pi=None, chain: ChainKind | None = None) -> "StateGraph":
        """Wrap an arbitrary reversible transition matrix (states are indices)."""
        P = sp.csr_matrix(P, dtype=float)
        if pi is None:
            vals, vecs = np.linalg.eig(P.toarray().T)
            vec = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
            pi = vec / vec.sum()
        pi = np.asarray(pi, dtype=float)
        return cls(P=P, pi=pi, chain=chain or ChainKind("broder"), states=list(range(P.shape[0])))

    def to_dot(self, max_states: int = 200) -> str:
        if self.size > max_states:
            raise SizeError(f"{self.size} states is too many for DOT export")
        lines = ["digraph gamma {"]
        for i, c in enumerate(self.classes or [None] * self.size):
            if c == PERFECT:
                lines.append(f'  {i} [shape=box, label="{i}: perfect"];')
            elif isinstance(c, tuple):
                lines.append(f'  {i} [shape=ellipse, label="{i}: holes u{c[0]} v{c[1]}"];')
            else:
                lines.append(f'  {i} [label="{i}"];')
        for s, d, p in zip(*self.arcs()):
            lines.append(f'  {s} -> {d} [label="{p:.4g}"];')
        lines.append("}")
        return "\n".join(lines)


def build_state_graph(
    g: BipartiteGraph, chain: ChainKind | str = "broder", cap: int | None = None, check: bool = True
) -> StateGraph:
    """Breadth-first scan of the chain's state space.

    Broder and JSV start at a perfect matching and share one state space
    (perfect plus near-perfect matchings); monomer-dimer starts at the empty
    matching and covers all matchings.
    """
    chain = ChainKind(chain) if isinstance(chain, str) else chain
    cap = DEFAULT_STATE_CAP if cap is None else cap
    if g.m == 0:
        raise GraphError("graph has no edges")
    if chain.kind == "monomer_dimer":
        start = tuple([-1] * g.n_u)
        rule = "monomer_dimer"
    else:
        start = find_perfect_matching(g)
        if start is None:
            raise NoPerfectMatchingError("graph has no perfect matching")
        rule = "broder"

    index = {start: 0}
    states = [start]
    classes = [holes(start, g)]
    rows, cols, mult = [], [], []
    queue = deque([0])
    while queue:
        i = queue.popleft()
        m = states[i]
        inv = _inverse(m, g.n_v)
        hole = classes[i]
        seen: dict[int, int] = {}
        for e in g.edges:
            nxt = propose(m, inv, e, rule, hole)
            if nxt == m:
                continue
            j = index.get(nxt)
            if j is None:
                if len(states) >= cap:
                    raise SizeError(f"state space exceeds the cap of {cap} states")
                j = len(states)
                index[nxt] = j
                states.append(nxt)
                classes.append(holes(nxt, g))
                queue.append(j)
            seen[j] = seen.get(j, 0) + 1
        for j, c in seen.items():
            rows.append(i)
            cols.append(j)
            mult.append(c)

    n = len(states)
    rows, cols = np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)
    prob = np.asarray(mult, dtype=float) / g.m

    counts = None
    weights = None
    if chain.kind == "monomer_dimer":
        pi = np.full(n, 1.0 / n)
        counts = MatchingCounts(all_matchings=n)
    else:
        near: dict = {}
        n_perfect = 0
        for c in classes:
            if c == PERFECT:
                n_perfect += 1
            else:
                near[c] = near.get(c, 0) + 1
        counts = MatchingCounts(perfect=n_perfect, near_by_holes=near, near_total=n - n_perfect)
        if chain.kind == "jsv":
            w_class = jsv_weights(counts)
            weights = [w_class[c] for c in classes]
            total = sum(weights)
            pi = np.array([float(w / total) for w in weights])
            accept = np.array(
                [1.0 if weights[j] >= weights[i] else float(weights[j] / weights[i]) for i, j in zip(rows, cols)]
            )
            prob = prob * accept
        else:
            pi = np.full(n, 1.0 / n)

    prob = prob * (1.0 - chain.laziness)
    P = sp.csr_matrix((prob, (rows, cols)), shape=(n, n))
    loop = 1.0 - np.asarray(P.sum(axis=1)).ravel()
    loop[loop < 1e-15] = 0.0
    P = (P + sp.diags(loop)).tocsr()
    P.eliminate_zeros()
    P.sort_indices()
    sg = StateGraph(P=P, pi=pi, chain=chain, states=states, source=g, classes=classes, weights=weights, counts=counts)
    sg.__dict__["_index"] = index
    if check:
        sg.check()
    return sg
