"""Markov-chain state graphs over bipartite matchings: exact mixing times,
spectral and multicommodity-flow bounds, samplers and count checks."""

from .graphs import (
    BipartiteGraph,
    FamilySpec,
    GraphError,
    MatchingCounts,
    SizeError,
    brualdi_ryser_count,
    count_all,
    count_near,
    count_perfect,
    enumerate_matchings,
    expected_counts,
    generate_family,
)
from .stategraph import ChainKind, StateGraph, build_state_graph
from .mixing import MixingResult, mixing_report, spectral_bound, total_mixing_time
from .flows import CongestionReport, PathSystem, build_paths, congestion, lower_bound, multicommodity_bound
from .pipeline import BoundReport, analyze, batch

__version__ = "0.1.0"
