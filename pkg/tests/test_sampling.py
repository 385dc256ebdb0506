from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from matchmix.graphs import BipartiteGraph, GraphError, count_all, count_perfect, generate_family, threshold_graph
from matchmix.mixing import total_mixing_time
from matchmix.sampling import (
    ConfigurationError,
    ConsistencyError,
    SampleRun,
    empirical_tvd,
    metropolis_batch,
    metropolis_run,
    noise_floor,
    sample_perfect_via_monomer_dimer,
    sample_trajectories,
    threshold_exact_batch,
    threshold_exact_sample,
)
from matchmix.stategraph import ChainKind, NoPerfectMatchingError, build_state_graph, jsv_weights

from conftest import c4, complete, k2

FERRERS_4 = BipartiteGraph.from_biadjacency([[1, 1, 1, 1], [1, 1, 1, 0], [1, 1, 1, 0], [1, 0, 0, 0]])


def test_zero_steps_returns_start():
    g = generate_family("hexagon:2")
    start = build_state_graph(g).states[0]
    assert metropolis_run(g, "broder", start, 0, seed=1) == start


def test_k2_single_step_removes_edge():
    for seed in range(20):
        assert metropolis_run(k2(), "broder", (0,), 1, seed) == (-1,)


def test_determinism():
    g = generate_family("hexagon:2")
    sg = build_state_graph(g, "jsv")
    w = jsv_weights(sg.counts)
    a = [metropolis_run(g, "jsv", sg.states[0], 40, s, w) for s in range(10)]
    b = [metropolis_run(g, "jsv", sg.states[0], 40, s, w) for s in range(10)]
    assert a == b
    np.testing.assert_array_equal(metropolis_batch(g, "jsv", sg.states[0], 30, 50, 9, w),
                                  metropolis_batch(g, "jsv", sg.states[0], 30, 50, 9, w))


def test_jsv_needs_weights():
    with pytest.raises(ConfigurationError):
        metropolis_run(c4(), "jsv", (0, 1), 5, 0)


def _check_row(freq: np.ndarray, row: np.ndarray, n: int):
    sigma = np.sqrt(row * (1 - row) / n)
    assert np.all(np.abs(freq - row) <= 4 * sigma + 1e-12), (freq, row)


@pytest.mark.parametrize("chain", ["broder", "jsv", "monomer_dimer", ChainKind("jsv", 0.3)])
def test_single_step_kernel_matches_state_graph(chain):
    g = generate_family("hexagon:1")
    sg = build_state_graph(g, chain)
    w = jsv_weights(sg.counts) if sg.chain.kind == "jsv" else None
    P = sg.P.toarray()
    n = 4000
    for i in range(0, sg.size, max(1, sg.size // 6)):
        start = sg.states[i]
        batch = metropolis_batch(g, chain, start, 1, n, seed=i, weights=w)
        freq = np.zeros(sg.size)
        for row in batch:
            freq[sg.index[tuple(int(v) for v in row)]] += 1
        _check_row(freq / n, P[i], n)
        single = Counter(metropolis_run(g, chain, start, 1, s, w) for s in range(1000))
        freq = np.zeros(sg.size)
        for state, c in single.items():
            freq[sg.index[state]] = c
        _check_row(freq / 1000, P[i], 1000)


def test_batch_distribution_matches_matrix_power():
    g = generate_family("triangle_threshold:5")
    sg = build_state_graph(g, "jsv")
    w = jsv_weights(sg.counts)
    t, n = 12, 50000
    run = sample_trajectories(g, "jsv", sg.states[0], t, n, seed=5, weights=w)
    row = np.linalg.matrix_power(sg.P.toarray(), t)[0]
    freq = np.zeros(sg.size)
    for state, c in run.empirical.items():
        freq[sg.index[state]] = c
    _check_row(freq / n, row, n)


def test_threshold_identity_ferrers():
    g = generate_family("triangle_threshold:5")
    assert {threshold_exact_sample(g, s) for s in range(50)} == {(4, 3, 2, 1, 0)}


def test_threshold_small_ferrers_uniform():
    draws = threshold_exact_batch(FERRERS_4, 100000, seed=11)
    _, counts = np.unique(draws, axis=0, return_counts=True)
    assert len(counts) == 2
    assert abs(counts[0] / 1e5 - 0.5) <= 3 * math.sqrt(0.25 / 1e5)


def test_threshold_single_and_batch_agree_in_law():
    g = threshold_graph([4, 4, 3, 2], 4)
    single = Counter(threshold_exact_sample(g, s) for s in range(4000))
    assert len(single) == count_perfect(g) == 8
    assert chisquare(list(single.values())).pvalue > 0.001


def test_threshold_errors():
    with pytest.raises(GraphError):
        threshold_exact_sample(BipartiteGraph(2, 2, ((0, 0), (1, 1))), 0)
    with pytest.raises(NoPerfectMatchingError):
        threshold_exact_sample(threshold_graph([1, 1], 2), 0)


def test_monomer_dimer_k2():
    run = sample_perfect_via_monomer_dimer(k2(), 1, 1, seed=0)
    assert run.outcome == (0,) and run.trial_index == 1


def test_monomer_dimer_k33_success_rate():
    g = complete(3, 3)
    mass = count_perfect(g) / count_all(g)
    l = 10
    expected = 1 - (1 - mass) ** l
    wins = sum(sample_perfect_via_monomer_dimer(g, l, 1000, seed=r).outcome is not None for r in range(100))
    assert abs(wins / 100 - expected) <= 3 * math.sqrt(expected * (1 - expected) / 100)


def test_monomer_dimer_hexagon_rare():
    g = generate_family("hexagon:4")
    mass = count_perfect(g) / count_all(g)
    assert mass < 1e-3
    run = sample_perfect_via_monomer_dimer(g, 3, 200, seed=1)
    assert run.trials == 3 and run.outcome is None


def test_empirical_tvd_examples():
    sg = build_state_graph(c4())
    exact = SampleRun(ChainKind("broder"), 0, 6, 0, empirical=Counter({s: 1 for s in sg.states}))
    assert empirical_tvd(exact, sg) == pytest.approx(0.0)
    one = SampleRun(ChainKind("broder"), 0, 5, 0, empirical=Counter({sg.states[0]: 5}))
    assert empirical_tvd(one, sg) == pytest.approx(1 - 1 / 6)
    bad = SampleRun(ChainKind("broder"), 0, 1, 0, empirical=Counter({(-1, -1): 1}))
    with pytest.raises(ConsistencyError):
        empirical_tvd(bad, sg)


def test_c4_tvd_at_mixing_time():
    sg = build_state_graph(c4())
    eps = 1e-3
    tau = total_mixing_time(sg, eps).tau_exact
    trials = 10**6
    run = sample_trajectories(c4(), "broder", sg.states[0], tau, trials, seed=2)
    assert empirical_tvd(run, sg) <= eps + noise_floor(sg, trials)
