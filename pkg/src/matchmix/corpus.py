"""graph6 input/output and small enumerations of connected bipartite graphs."""

from __future__ import annotations

import itertools
import logging
from typing import Iterable, Iterator

import networkx as nx

from .graphs import BipartiteGraph, GraphError

__all__ = [
    "parse_graph6",
    "to_graph6",
    "read_graph6",
    "from_networkx",
    "to_networkx",
    "connected_bipartite_graphs",
]

log = logging.getLogger(__name__)


def from_networkx(h: nx.Graph, label: str = "") -> BipartiteGraph:
    """Two-colour a bipartite graph by BFS; vertex 0's colour class becomes U.

    Vertices are numbered within each side in increasing original order.
    Isolated vertices other than vertex 0 get the colour of a fresh BFS root.
    """
    nodes = sorted(h.nodes)
    colour: dict = {}
    for root in nodes:
        if root in colour:
            continue
        colour[root] = 0
        for a, b in nx.bfs_edges(h, root):
            colour[b] = 1 - colour[a]
    for a, b in h.edges:
        if colour[a] == colour[b]:
            raise GraphError(f"graph {label or '?'} is not bipartite")
    us = [x for x in nodes if colour[x] == 0]
    vs = [x for x in nodes if colour[x] == 1]
    iu = {x: i for i, x in enumerate(us)}
    iv = {x: i for i, x in enumerate(vs)}
    edges = [(iu[a], iv[b]) if colour[a] == 0 else (iu[b], iv[a]) for a, b in h.edges]
    return BipartiteGraph(len(us), len(vs), tuple(edges), label)


def to_networkx(g: BipartiteGraph) -> nx.Graph:
    """U vertices keep their index; V vertex y becomes n_u + y."""
    h = nx.Graph()
    h.add_nodes_from(range(g.n_u + g.n_v))
    h.add_edges_from((x, g.n_u + y) for x, y in g.edges)
    return h


def parse_graph6(line: str | bytes, label: str = "") -> BipartiteGraph:
    text = line.strip()
    if isinstance(text, str):
        text = text.encode("ascii")
    if text.startswith(b">>graph6<<"):
        text = text[len(b">>graph6<<"):]
    try:
        h = nx.from_graph6_bytes(text)
    except (ValueError, nx.NetworkXError) as exc:
        raise GraphError(f"bad graph6 record: {exc}") from exc
    return from_networkx(h, label or text.decode("ascii"))


def to_graph6(g: BipartiteGraph) -> str:
    return nx.to_graph6_bytes(to_networkx(g), header=False).decode("ascii").strip()


def read_graph6(lines: Iterable[str]) -> Iterator[tuple[int, BipartiteGraph | None, str]]:
    """Yield ``(line_number, graph, label)`` per non-empty line; ``graph`` is
    None (and a warning is logged) when the line fails to parse."""
    for no, line in enumerate(lines, 1):
        rec = line.strip()
        if not rec or rec.startswith(">>graph6<<") and len(rec) == len(">>graph6<<"):
            continue
        try:
            yield no, parse_graph6(rec), rec
        except GraphError as exc:
            log.warning("line %d: %s", no, exc)
            yield no, None, rec


def connected_bipartite_graphs(order: int) -> list[BipartiteGraph]:
    """All connected bipartite graphs on ``order`` vertices up to isomorphism.

    Brute force over biadjacency matrices with sorted rows, bucketed by a
    Weisfeiler-Lehman hash; intended for order <= 9 (use nauty beyond that).
    Results are sorted by their graph6 string.
    """
    if order < 1:
        return []
    if order == 1:
        return [BipartiteGraph(1, 0, (), "@")]
    buckets: dict[str, list[nx.Graph]] = {}
    for a in range(1, order // 2 + 1):
        b = order - a
        full = (1 << b) - 1
        for rows in itertools.combinations_with_replacement(range(1, full + 1), a):
            cover = 0
            for r in rows:
                cover |= r
            if cover != full:
                continue
            edges = [(x, a + y) for x, r in enumerate(rows) for y in range(b) if r >> y & 1]
            h = nx.Graph(edges)
            if not nx.is_connected(h):
                continue
            key = nx.weisfeiler_lehman_graph_hash(h, iterations=3)
            bucket = buckets.setdefault(key, [])
            if not any(nx.is_isomorphic(h, o) for o in bucket):
                bucket.append(h)
    out = []
    for bucket in buckets.values():
        for h in bucket:
            text = nx.to_graph6_bytes(nx.convert_node_labels_to_integers(h), header=False).decode().strip()
            out.append((text, h))
    out.sort(key=lambda p: p[0])
    return [from_networkx(nx.convert_node_labels_to_integers(h), text) for text, h in out]
