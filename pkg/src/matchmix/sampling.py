"""Running the matching chains as samplers, the exact threshold-graph
sampler, and empirical checks against an exact stationary distribution."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .graphs import BipartiteGraph, GraphError, MatchingCounts, brualdi_ryser_product, is_threshold
from .stategraph import (
    PERFECT,
    ChainKind,
    Matching,
    NoPerfectMatchingError,
    StateGraph,
    _inverse,
    holes,
    jsv_weights,
    propose,
)

__all__ = [
    "SampleRun",
    "ConfigurationError",
    "ConsistencyError",
    "make_rng",
    "metropolis_run",
    "metropolis_batch",
    "sample_trajectories",
    "threshold_exact_sample",
    "threshold_exact_batch",
    "sample_perfect_via_monomer_dimer",
    "empirical_tvd",
    "noise_floor",
]


class ConfigurationError(GraphError):
    pass


class ConsistencyError(RuntimeError):
    pass


@dataclass
class SampleRun:
    chain: ChainKind
    t: int
    trials: int
    seed: int
    outcome: Matching | None = None
    # 1-based index of the trial that produced ``outcome``
    trial_index: int | None = None
    empirical: Counter = field(default_factory=Counter)

    def to_header(self) -> dict:
        return {"chain": str(self.chain), "t": self.t, "trials": self.trials, "seed": self.seed}


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for trial ``stream`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64((seed ^ stream) & (2**64 - 1)))


def _as_chain(chain) -> ChainKind:
    return ChainKind(chain) if isinstance(chain, str) else chain


def _class_weights(chain: ChainKind, weights) -> dict | None:
    if chain.kind != "jsv":
        return None
    if weights is None:
        raise ConfigurationError("the jsv chain needs exact weights (a MatchingCounts or a weight map)")
    if isinstance(weights, MatchingCounts):
        return jsv_weights(weights)
    return weights


def metropolis_run(
    g: BipartiteGraph, chain: ChainKind | str, start: Matching, t: int, seed: int, weights=None,
    rng: np.random.Generator | None = None,
) -> Matching:
    """Simulate ``t`` steps of the chain from ``start`` without building the state graph.

    Each step draws the lazy coin (if the chain is lazy), then an edge index,
    then (jsv only, when the move is not automatically accepted) a uniform
    variate for the Metropolis filter.
    """
    chain = _as_chain(chain)
    w = _class_weights(chain, weights)
    rng = rng or make_rng(seed)
    m = tuple(start)
    if len(m) != g.n_u:
        raise GraphError("start matching has the wrong length")
    cls = holes(m, g)
    if chain.kind != "monomer_dimer" and cls is None:
        raise GraphError("start is not in the chain's state space")
    rule = "monomer_dimer" if chain.kind == "monomer_dimer" else "broder"
    edges = g.edges
    for _ in range(t):
        if chain.laziness and rng.random() < chain.laziness:
            continue
        e = edges[int(rng.integers(g.m))]
        nxt = propose(m, _inverse(m, g.n_v), e, rule, cls if rule == "broder" else None)
        if nxt == m:
            continue
        ncls = holes(nxt, g) if rule == "broder" else None
        if w is None:
            m, cls = nxt, ncls
            continue
        ratio = w[ncls] / w[cls]
        if ratio >= 1 or rng.random() < float(ratio):
            m, cls = nxt, ncls
    return m


def metropolis_batch(
    g: BipartiteGraph, chain: ChainKind | str, start: Matching, t: int, trials: int, seed: int, weights=None
) -> np.ndarray:
    """``trials`` independent trajectories advanced in lock-step with numpy.

    An independent implementation of the move rules on partner arrays; all
    trials share one generator, so trajectories differ from
    :func:`metropolis_run` even for the same seed. Returns a
    ``(trials, n_u)`` array of final partner vectors.
    """
    chain = _as_chain(chain)
    wmap = _class_weights(chain, weights)
    rng = make_rng(seed)
    n_u, n_v = g.n_u, g.n_v
    eu = np.array([e[0] for e in g.edges], dtype=np.int64)
    ev = np.array([e[1] for e in g.edges], dtype=np.int64)
    rows = np.arange(trials)
    part = np.tile(np.asarray(start, dtype=np.int64), (trials, 1))
    inv = np.full((trials, n_v), -1, dtype=np.int64)
    for x, y in enumerate(start):
        if y >= 0:
            inv[:, y] = x
    md = chain.kind == "monomer_dimer"
    if not md:
        cls = holes(tuple(start), g)
        if cls is None:
            raise GraphError("start is not in the chain's state space")
        hu = np.full(trials, -1 if cls == PERFECT else cls[0], dtype=np.int64)
        hv = np.full(trials, -1 if cls == PERFECT else cls[1], dtype=np.int64)
        if wmap is not None:
            # weight of hole class (u, v) at [u, v]; perfect class at [n_u, n_v]
            wtab = np.full((n_u + 1, n_v + 1), np.nan)
            for key, val in wmap.items():
                if key == PERFECT:
                    wtab[n_u, n_v] = float(val)
                else:
                    wtab[key] = float(val)

    for _ in range(t):
        active = np.ones(trials, dtype=bool)
        if chain.laziness:
            active &= rng.random(trials) >= chain.laziness
        e = rng.integers(g.m, size=trials)
        x, y = eu[e], ev[e]
        px, iy = part[rows, x], inv[rows, y]
        if md:
            remove = active & (px == y)
            add = active & (px < 0) & (iy < 0)
            slide_u = active & (px < 0) & (iy >= 0)
            slide_v = active & (px >= 0) & (px != y) & (iy < 0)
            r = rows[remove]
            part[r, x[remove]] = -1
            inv[r, y[remove]] = -1
            r = rows[slide_u]
            part[r, iy[slide_u]] = -1
            r = rows[slide_v]
            inv[r, px[slide_v]] = -1
            move = add | slide_u | slide_v
            r = rows[move]
            part[r, x[move]] = y[move]
            inv[r, y[move]] = x[move]
            continue

        perfect = hu < 0
        remove = active & perfect & (px == y)
        near = active & ~perfect
        add = near & (x == hu) & (y == hv)
        slide_u = near & (x == hu) & (y != hv)
        slide_v = near & (y == hv) & (x != hu)
        # hole class after the proposed move
        nu = np.where(remove, x, np.where(add, -1, np.where(slide_u, iy, hu)))
        nv = np.where(remove, y, np.where(add, -1, np.where(slide_v, px, hv)))
        if wmap is not None:
            moving = remove | add | slide_u | slide_v
            w_old = wtab[np.where(hu < 0, n_u, hu), np.where(hv < 0, n_v, hv)]
            w_new = wtab[np.where(nu < 0, n_u, nu), np.where(nv < 0, n_v, nv)]
            ratio = w_new / w_old
            coin = rng.random(trials)
            ok = (ratio >= 1) | (coin < ratio)
            keep = moving & ok
            remove, add, slide_u, slide_v = remove & keep, add & keep, slide_u & keep, slide_v & keep
            nu = np.where(keep, nu, hu)
            nv = np.where(keep, nv, hv)
        r = rows[remove]
        part[r, x[remove]] = -1
        inv[r, y[remove]] = -1
        r = rows[slide_u]
        part[r, iy[slide_u]] = -1
        r = rows[slide_v]
        inv[r, px[slide_v]] = -1
        move = add | slide_u | slide_v
        r = rows[move]
        part[r, x[move]] = y[move]
        inv[r, y[move]] = x[move]
        hu, hv = nu, nv
    return part


def sample_trajectories(
    g: BipartiteGraph, chain: ChainKind | str, start: Matching, t: int, trials: int, seed: int,
    weights=None, vectorized: bool = True,
) -> SampleRun:
    """Final states of ``trials`` runs of length ``t``, tallied per matching."""
    chain = _as_chain(chain)
    run = SampleRun(chain=chain, t=t, trials=trials, seed=seed)
    if vectorized:
        final = metropolis_batch(g, chain, start, t, trials, seed, weights)
        base = g.n_v + 1
        if base ** g.n_u < 2**62:
            # mixed-radix key per row is much faster to tally than rows
            keys = (final + 1) @ (base ** np.arange(g.n_u, dtype=np.int64))
            _, first, cnt = np.unique(keys, return_index=True, return_counts=True)
            uniq = final[first]
        else:
            uniq, cnt = np.unique(final, axis=0, return_counts=True)
        run.empirical = Counter({tuple(int(v) for v in row): int(c) for row, c in zip(uniq, cnt)})
    else:
        for i in range(trials):
            run.empirical[metropolis_run(g, chain, start, t, seed, weights, rng=make_rng(seed, i))] += 1
    return run


def threshold_exact_sample(g: BipartiteGraph, seed: int | np.random.Generator) -> Matching:
    """Uniform perfect matching of a threshold graph.

    Rows are visited from the smallest neighbourhood to the largest; since
    the neighbourhoods are nested, every row sees exactly (row sum - rows
    already placed) free columns, so each matching has the same probability.
    """
    if not is_threshold(g):
        raise GraphError("not a threshold graph")
    if brualdi_ryser_product(g) <= 0:
        raise NoPerfectMatchingError("threshold graph has no perfect matching")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    used = set()
    out = [-1] * g.n_u
    for x in sorted(range(g.n_u), key=lambda i: (len(g.adj_u[i]), i)):
        free = [y for y in g.adj_u[x] if y not in used]
        y = free[int(rng.integers(len(free)))]
        used.add(y)
        out[x] = y
    return tuple(out)


def threshold_exact_batch(g: BipartiteGraph, size: int, seed: int) -> np.ndarray:
    """``size`` independent draws of :func:`threshold_exact_sample` as a
    ``(size, n_u)`` partner array (one generator for the whole batch)."""
    if not is_threshold(g):
        raise GraphError("not a threshold graph")
    if brualdi_ryser_product(g) <= 0:
        raise NoPerfectMatchingError("threshold graph has no perfect matching")
    rng = make_rng(seed)
    out = np.full((size, g.n_u), -1, dtype=np.int64)
    used = np.zeros((size, g.n_v), dtype=bool)
    for placed, x in enumerate(sorted(range(g.n_u), key=lambda i: (len(g.adj_u[i]), i))):
        cols = np.array(g.adj_u[x], dtype=np.int64)
        pick = rng.integers(len(cols) - placed, size=size)
        free = ~used[:, cols]
        # position of the (pick+1)-th free column in this row's neighbourhood
        j = (np.cumsum(free, axis=1) <= pick[:, None]).sum(axis=1)
        y = cols[j]
        out[:, x] = y
        used[np.arange(size), y] = True
    return out


def sample_perfect_via_monomer_dimer(g: BipartiteGraph, l: int, t: int, seed: int) -> SampleRun:
    """Run up to ``l`` monomer-dimer trajectories of ``t`` steps from the empty
    matching; stop at the first whose final state is perfect.

    ``outcome`` is that matching (None if every trial failed) and
    ``trial_index`` the 1-based trial that produced it.
    """
    if l < 1 or t < 1:
        raise ValueError("l and t must be positive")
    chain = ChainKind("monomer_dimer")
    run = SampleRun(chain=chain, t=t, trials=0, seed=seed)
    empty = tuple([-1] * g.n_u)
    for i in range(l):
        m = metropolis_run(g, chain, empty, t, seed, rng=make_rng(seed, i))
        run.trials += 1
        run.empirical[m] += 1
        if g.balanced and all(y >= 0 for y in m):
            run.outcome, run.trial_index = m, i + 1
            break
    return run


def empirical_tvd(run: SampleRun, sg: StateGraph) -> float:
    """Half the L1 distance between the run's empirical frequencies and pi."""
    total = sum(run.empirical.values())
    if total == 0:
        raise ValueError("run holds no samples")
    freq = np.zeros(sg.size)
    index = sg.index
    for state, c in run.empirical.items():
        i = index.get(tuple(state))
        if i is None:
            raise ConsistencyError(f"sampled state {state} is not in the state graph")
        freq[i] = c
    return float(0.5 * np.abs(freq / total - sg.pi).sum())


def noise_floor(sg: StateGraph, trials: int) -> float:
    """Sampling-noise scale sqrt(|Omega| / trials) of an empirical TVD."""
    return math.sqrt(sg.size / trials)
