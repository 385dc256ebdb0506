from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

from matchmix.corpus import parse_graph6
from matchmix.graphs import BipartiteGraph
from matchmix.stategraph import find_perfect_matching

DATA = Path(__file__).parent / "data"


def random_bipartite(rng: random.Random, n_u: int, n_v: int, p: float, label: str = "") -> BipartiteGraph:
    edges = [(x, y) for x in range(n_u) for y in range(n_v) if rng.random() < p]
    return BipartiteGraph(n_u, n_v, tuple(edges), label)


def random_connected_with_pm(rng: random.Random, n: int, p: float = 0.45) -> BipartiteGraph:
    """Rejection-sample a connected balanced graph that has a perfect matching."""
    while True:
        g = random_bipartite(rng, n, n, p)
        if g.m and g.is_connected() and find_perfect_matching(g) is not None:
            return g


@st.composite
def bipartite_graphs(draw, max_side: int = 4, balanced: bool = False):
    n_u = draw(st.integers(1, max_side))
    n_v = n_u if balanced else draw(st.integers(1, max_side))
    cells = [(x, y) for x in range(n_u) for y in range(n_v)]
    mask = draw(st.lists(st.booleans(), min_size=len(cells), max_size=len(cells)))
    return BipartiteGraph(n_u, n_v, tuple(c for c, keep in zip(cells, mask) if keep))


@pytest.fixture(scope="session")
def corpus8() -> list[BipartiteGraph]:
    """All connected bipartite graphs on 8 vertices, as produced by nauty geng."""
    return [parse_graph6(line) for line in (DATA / "bip8.g6").read_text().split()]


@pytest.fixture(scope="session")
def corpus8_pm(corpus8) -> list[BipartiteGraph]:
    return [g for g in corpus8 if find_perfect_matching(g) is not None]


def k2() -> BipartiteGraph:
    return BipartiteGraph(1, 1, ((0, 0),), "K2")


def c4() -> BipartiteGraph:
    return BipartiteGraph(2, 2, ((0, 0), (0, 1), (1, 0), (1, 1)), "C4")


def complete(n_u: int, n_v: int) -> BipartiteGraph:
    return BipartiteGraph(n_u, n_v, tuple((x, y) for x in range(n_u) for y in range(n_v)), f"K{n_u},{n_v}")


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
