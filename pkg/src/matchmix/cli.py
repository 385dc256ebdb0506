"""Command-line entry point: ``matchmix <subcommand> ...``.

CSV goes to stdout and logs to stderr. Size caps are read from the
environment (MATCHMIX_STATE_CAP, MATCHMIX_DENSE_CAP, MATCHMIX_PATH_CAP,
MATCHMIX_COUNT_CAP).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Iterator

from .corpus import read_graph6, to_graph6
from .graphs import BipartiteGraph, FamilySpec, GraphError, enumerate_matchings, generate_family
from .mixing import variation_trace
from .pipeline import (
    ANALYSES,
    EPS_DEFAULT,
    EPS_SMALL,
    analyze,
    batch,
    count_table,
    verify_counts,
    write_reports,
)
from .sampling import (
    sample_perfect_via_monomer_dimer,
    make_rng,
    metropolis_run,
    threshold_exact_sample,
)
from .stategraph import ChainKind, build_state_graph, find_perfect_matching, jsv_weights, matching_edges

log = logging.getLogger("matchmix")


def _family_range(text: str) -> list[FamilySpec]:
    """``hexagon:3`` or ``hexagon:1..5`` (odd/even steps are not implied)."""
    name, _, rng = text.partition(":")
    lo, sep, hi = rng.partition("..")
    if not sep:
        return [FamilySpec.parse(text)]
    out = []
    for k in range(int(lo), int(hi) + 1):
        try:
            out.append(FamilySpec(name, k))
        except GraphError:
            continue
    return out


def _load_graphs(source: str) -> Iterator[BipartiteGraph]:
    """Graphs from a graph6 file, edge-list JSON, ``-`` for stdin, or a family spec."""
    if source != "-" and not os.path.exists(source) and ":" in source:
        for spec in _family_range(source):
            g = generate_family(spec)
            yield BipartiteGraph(g.n_u, g.n_v, g.edges, str(spec))
        return
    fh = sys.stdin if source == "-" else open(source)
    try:
        text = fh.read()
    finally:
        if fh is not sys.stdin:
            fh.close()
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        data = json.loads(stripped)
        for i, item in enumerate(data if isinstance(data, list) else [data]):
            g = BipartiteGraph.from_json(item)
            yield g if g.label else BipartiteGraph(g.n_u, g.n_v, g.edges, f"json{i}")
        return
    for _, g, _ in read_graph6(text.splitlines()):
        if g is not None:
            yield g


def _epsilon(args) -> float:
    return EPS_SMALL if args.small_eps else args.epsilon


def _chain(args) -> ChainKind:
    return ChainKind(args.chain, args.laziness)


def cmd_gen(args) -> int:
    for spec in _family_range(args.family):
        g = generate_family(spec)
        g = BipartiteGraph(g.n_u, g.n_v, g.edges, str(spec))
        print(g.to_json() if args.format == "json" else to_graph6(g))
    return 0


def cmd_counts(args) -> int:
    rows = verify_counts(_family_range(args.family), scan_cap=args.scan_cap)
    sys.stdout.write(count_table(rows))
    return 0 if all(r.match for r in rows) else 1


def cmd_verify(args) -> int:
    rows = verify_counts(scan_cap=args.scan_cap)
    sys.stdout.write(count_table(rows))
    return 0 if all(r.match for r in rows) else 1


def _analyses(text: str) -> tuple[str, ...]:
    which = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = set(which) - set(ANALYSES)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown analyses {sorted(bad)}; choose from {','.join(ANALYSES)}")
    return which


def cmd_analyze(args) -> int:
    eps = _epsilon(args)
    reports = [analyze(g, _chain(args), eps, args.analyses) for g in _load_graphs(args.input)]
    write_reports(reports, sys.stdout, timings=args.timings)
    return 0


def cmd_batch(args) -> int:
    if args.input == "-":
        lines = sys.stdin
    else:
        lines = open(args.input)
    with lines:
        reports, summary = batch(lines, _chain(args), _epsilon(args), args.analyses, jobs=args.jobs)
    write_reports(reports, sys.stdout, timings=args.timings)
    text = json.dumps(summary.to_dict(), indent=2)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)
    for gid, bad in ((v.split(":", 1)) for v in summary.violating):
        log.warning("ranking violated on %s: %s", gid, bad)
    return 0


def cmd_trace(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["graph_id", "t", "d"])
    for g in _load_graphs(args.input):
        sg = build_state_graph(g, _chain(args))
        for t, d in variation_trace(sg, args.t_max):
            w.writerow([g.label, t, f"{d:.12g}"])
    return 0


def cmd_sample(args) -> int:
    g = next(_load_graphs(args.input), None)
    if g is None:
        log.error("no graph in %s", args.input)
        return 2
    chain = _chain(args)
    header = {"graph": g.label, "method": args.method, "chain": str(chain), "seed": args.seed,
              "t": args.t, "trials": args.trials}
    print(json.dumps(header))
    if args.method == "threshold":
        rng = make_rng(args.seed)
        for _ in range(args.trials):
            print(json.dumps(matching_edges(threshold_exact_sample(g, rng))))
        return 0
    if args.method == "via-monomer-dimer":
        run = sample_perfect_via_monomer_dimer(g, args.trials, args.t, args.seed)
        print(json.dumps(None if run.outcome is None else matching_edges(run.outcome)))
        log.info("trials used: %d", run.trials)
        return 0 if run.outcome is not None else 1
    weights = None
    if chain.kind == "jsv":
        weights = jsv_weights(enumerate_matchings(g, "near_perfect", cap=g.order))
    if chain.kind == "monomer_dimer":
        start = tuple([-1] * g.n_u)
    else:
        start = find_perfect_matching(g)
        if start is None:
            log.error("graph has no perfect matching")
            return 1
    for i in range(args.trials):
        m = metropolis_run(g, chain, start, args.t, args.seed, weights, rng=make_rng(args.seed, i))
        print(json.dumps(matching_edges(m)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matchmix", description="Mixing-time experiments for matching Markov chains.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def chain_opts(sp):
        sp.add_argument("--chain", default="broder", choices=["broder", "jsv", "monomer_dimer"])
        sp.add_argument("--laziness", type=float, default=0.0)

    def eps_opts(sp):
        sp.add_argument("--epsilon", type=float, default=EPS_DEFAULT)
        sp.add_argument("--small-eps", action="store_true", help=f"use epsilon = {EPS_SMALL:g}")
        sp.add_argument("--analyses", type=_analyses, default=ANALYSES,
                        help=f"comma-separated subset of {','.join(ANALYSES)}")
        sp.add_argument("--timings", action="store_true", help="append per-stage wall times")

    sp = sub.add_parser("gen", help="emit a family graph")
    sp.add_argument("family", help="e.g. hexagon:3 or hexagon:1..4")
    sp.add_argument("--format", choices=["graph6", "json"], default="json")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("counts", help="closed-form vs enumerated counts for a family range")
    sp.add_argument("family", help="e.g. hexagon:1..5")
    sp.add_argument("--scan-cap", type=int, default=20000)
    sp.set_defaults(func=cmd_counts)

    sp = sub.add_parser("analyze", help="bounds for graphs from a file, stdin or a family range")
    sp.add_argument("input")
    chain_opts(sp)
    eps_opts(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("batch", help="analyze a graph6 stream")
    sp.add_argument("input")
    chain_opts(sp)
    eps_opts(sp)
    sp.add_argument("-j", "--jobs", type=int, default=1)
    sp.add_argument("--summary", help="write the JSON summary here instead of stderr")
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("trace", help="t vs d(pi, t) for plotting")
    sp.add_argument("input")
    chain_opts(sp)
    sp.add_argument("--t-max", type=int, default=100)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("sample", help="draw matchings")
    sp.add_argument("input")
    chain_opts(sp)
    sp.add_argument("--method", choices=["metropolis", "threshold", "via-monomer-dimer"], default="metropolis")
    sp.add_argument("--t", type=int, default=100, help="steps per trajectory")
    sp.add_argument("--trials", type=int, default=1, help="samples to draw (l for via-monomer-dimer)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("verify", help="check every closed-form count")
    sp.add_argument("--scan-cap", type=int, default=20000)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GraphError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
