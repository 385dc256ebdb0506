"""Per-graph analysis pipeline, batch runs over graph6 streams, and the
closed-form count verification table."""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Iterator, Sequence

from .corpus import read_graph6
from .flows import build_paths, congestion, lower_bound, multicommodity_bound
from .graphs import (
    BipartiteGraph,
    FamilySpec,
    GraphError,
    SizeError,
    count_near,
    count_perfect,
    expected_counts,
    generate_family,
)
from .mixing import NumericError, PeriodicityError, spectral_bound, total_mixing_time
from .stategraph import ChainKind, NoPerfectMatchingError, build_state_graph

__all__ = [
    "ANALYSES",
    "CSV_VERSION",
    "EPS_DEFAULT",
    "EPS_SMALL",
    "BoundReport",
    "BatchSummary",
    "analyze",
    "batch",
    "write_reports",
    "verify_counts",
    "ranking_violations",
    "summarize",
    "count_table",
    "CountRow",
    "DEFAULT_SWEEP",
]

log = logging.getLogger(__name__)

CSV_VERSION = 1
EPS_DEFAULT = 1.0 / (2.0 * math.e)
EPS_SMALL = 1e-9
ANALYSES = ("tau", "spectral", "p1", "p2", "p3")
PATH_OF = {"p1": "canonical_p1", "p2": "one_shortest_p2", "p3": "all_shortest_p3"}
RANK_TOL = 1e-9


@dataclass
class BoundReport:
    graph_id: str
    n: int
    m: int
    omega: int | None = None
    chain: str = "broder"
    epsilon: float = EPS_DEFAULT
    tau_exact: int | None = None
    spectral: float | None = None
    b_p1: float | None = None
    b_p2: float | None = None
    b_p3: float | None = None
    rho1_p1: float | None = None
    rho1_p2: float | None = None
    rho1_p3: float | None = None
    rho2_p1: float | None = None
    rho2_p2: float | None = None
    rho2_p3: float | None = None
    lb_p2: float | None = None
    lambda2: float | None = None
    lambda_min: float | None = None
    pi_min: float | None = None
    lazy_used: bool = False
    status: str = "ok"
    wall_times: dict = field(default_factory=dict)

    def ranking(self) -> list[str]:
        """Pairs of the ordering tau <= spectral <= b_p3 <= b_p2 <= b_p1 that fail."""
        chain = [("tau", self.tau_exact), ("spectral", self.spectral), ("b_p3", self.b_p3),
                 ("b_p2", self.b_p2), ("b_p1", self.b_p1)]
        present = [(k, v) for k, v in chain if v is not None]
        bad = []
        for (ka, va), (kb, vb) in zip(present, present[1:]):
            if va > vb * (1 + RANK_TOL) + RANK_TOL:
                bad.append(f"{ka}>{kb}")
        return bad


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.12g}"
    return str(v)


CSV_FIELDS = [f.name for f in fields(BoundReport) if f.name != "wall_times"]


def write_reports(reports: Iterable[BoundReport], out, timings: bool = False) -> None:
    """CSV with a versioned header comment; floats at 12 significant digits."""
    cols = CSV_FIELDS + (["wall_times"] if timings else [])
    out.write(f"# matchmix bound report v{CSV_VERSION}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        row = [_fmt(getattr(r, c)) for c in CSV_FIELDS]
        if timings:
            row.append(";".join(f"{k}={v:.3f}" for k, v in r.wall_times.items()))
        w.writerow(row)


def analyze(
    g: BipartiteGraph,
    chain: ChainKind | str = "broder",
    epsilon: float = EPS_DEFAULT,
    which: Sequence[str] = ANALYSES,
    graph_id: str | None = None,
) -> BoundReport:
    """Build the state graph and run the selected analyses.

    Size, periodicity and numeric failures are recorded in ``status``
    instead of being raised, so batches keep going.
    """
    chain = ChainKind(chain) if isinstance(chain, str) else chain
    unknown = set(which) - set(ANALYSES)
    if unknown:
        raise ValueError(f"unknown analyses {sorted(unknown)}; expected a subset of {ANALYSES}")
    rep = BoundReport(graph_id=graph_id or g.label, n=g.order, m=g.m, chain=str(chain), epsilon=epsilon)
    clock = time.perf_counter
    t0 = clock()
    try:
        sg = build_state_graph(g, chain)
    except NoPerfectMatchingError:
        rep.status = "skipped: no perfect matching"
        return rep
    except (SizeError, GraphError) as exc:
        rep.status = f"error: {exc}"
        return rep
    rep.wall_times["build"] = clock() - t0
    rep.omega = sg.size
    rep.pi_min = sg.pi_min
    spec = None
    try:
        if "tau" in which:
            t0 = clock()
            rep.tau_exact = total_mixing_time(sg, epsilon).tau_exact
            rep.wall_times["tau"] = clock() - t0
        need_spec = "spectral" in which or any(p in which for p in PATH_OF)
        if need_spec:
            t0 = clock()
            spec = spectral_bound(sg, epsilon)
            rep.lambda2, rep.lambda_min = spec.lambda2, spec.lambda_min
            if "spectral" in which:
                rep.spectral = spec.spectral_bound
            rep.wall_times["spectral"] = clock() - t0
        for key, kind in PATH_OF.items():
            if key not in which:
                continue
            t0 = clock()
            ps = build_paths(sg, kind)
            cr = congestion(sg, ps)
            setattr(rep, f"b_{key}", multicommodity_bound(cr, sg, epsilon, spec, ps))
            setattr(rep, f"rho1_{key}", cr.rho1)
            setattr(rep, f"rho2_{key}", cr.rho2)
            rep.lazy_used = rep.lazy_used or cr.lazy_used
            if key == "p2":
                rep.lb_p2 = lower_bound(cr, sg, epsilon)
            rep.wall_times[key] = clock() - t0
    except PeriodicityError as exc:
        rep.status = f"error: periodic ({exc})"
    except (SizeError, NumericError) as exc:
        rep.status = f"error: {exc}"
    return rep


@dataclass
class BatchSummary:
    rows: int = 0
    parse_failures: int = 0
    with_perfect: int = 0
    errors: int = 0
    omega_min: int | None = None
    omega_max: int | None = None
    omega_mean: float | None = None
    omega_median: float | None = None
    tau_max: int | None = None
    argmax_tau: list[str] = field(default_factory=list)
    ranking_violations: int = 0
    violating: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def ranking_violations(reports: Iterable[BoundReport]) -> list[tuple[str, list[str]]]:
    return [(r.graph_id, bad) for r in reports if (bad := r.ranking())]


def summarize(reports: Sequence[BoundReport], parse_failures: int = 0) -> BatchSummary:
    s = BatchSummary(rows=len(reports), parse_failures=parse_failures)
    omegas = [r.omega for r in reports if r.omega is not None]
    s.with_perfect = len(omegas)
    s.errors = sum(r.status.startswith("error") for r in reports)
    if omegas:
        s.omega_min, s.omega_max = min(omegas), max(omegas)
        s.omega_mean = statistics.fmean(omegas)
        s.omega_median = statistics.median(omegas)
    taus = [(r.tau_exact, r.graph_id) for r in reports if r.tau_exact is not None]
    if taus:
        s.tau_max = max(t for t, _ in taus)
        s.argmax_tau = sorted(gid for t, gid in taus if t == s.tau_max)
    bad = ranking_violations(reports)
    s.ranking_violations = len(bad)
    s.violating = [f"{gid}:{'|'.join(b)}" for gid, b in bad]
    return s


def _job(args):
    g, chain, epsilon, which = args
    return analyze(g, chain, epsilon, which)


def batch(
    lines: Iterable[str],
    chain: ChainKind | str = "broder",
    epsilon: float = EPS_DEFAULT,
    which: Sequence[str] = ANALYSES,
    jobs: int = 1,
) -> tuple[list[BoundReport], BatchSummary]:
    """Analyze every graph6 record; rows come back in input order whatever ``jobs`` is."""
    graphs = []
    failures = 0
    for _, g, _ in read_graph6(lines):
        if g is None:
            failures += 1
        else:
            graphs.append(g)
    tasks = [(g, chain, epsilon, tuple(which)) for g in graphs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_job, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        reports = [_job(t) for t in tasks]
    return reports, summarize(reports, failures)


@dataclass
class CountRow:
    family: str
    k: int
    quantity: str
    formula: int
    enumerated: int
    scan: int | None
    match: bool


def _iter_sweep(sweep: Iterable[FamilySpec | str]) -> Iterator[FamilySpec]:
    for s in sweep:
        yield FamilySpec.parse(s) if isinstance(s, str) else s


DEFAULT_SWEEP = (
    [f"hexagon:{k}" for k in range(1, 6)]
    + [f"triangle_threshold:{n}" for n in (3, 5, 7)]
    + ["regular_chain:1", "regular_ladder:2"]
)


def verify_counts(sweep: Iterable[FamilySpec | str] = DEFAULT_SWEEP, scan_cap: int = 20000) -> list[CountRow]:
    """Closed form vs frontier enumeration vs state-graph scan, per quantity.

    ``scan`` is None when the Broder state space exceeds ``scan_cap``.
    """
    rows = []
    for spec in _iter_sweep(sweep):
        g = generate_family(spec)
        exp = expected_counts(spec)
        cap = g.order
        scan = None
        try:
            sg = build_state_graph(g, "broder", cap=scan_cap, check=False)
            scan = sg.counts
        except SizeError:
            pass
        got = count_perfect(g, cap=cap)
        rows.append(CountRow(spec.family, spec.size, "perfect", exp.perfect, got,
                             None if scan is None else scan.perfect,
                             got == exp.perfect and (scan is None or scan.perfect == got)))
        for (u, v), want in exp.near_by_holes.items():
            got = count_near(g, u, v, cap=cap)
            sc = None if scan is None else scan.near(u, v)
            rows.append(CountRow(spec.family, spec.size, f"near({u},{v})", want, got, sc,
                                 got == want and (sc is None or sc == got)))
    return rows


def count_table(rows: Sequence[CountRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "k", "quantity", "formula", "enumerated", "scan", "match"])
    for r in rows:
        w.writerow([r.family, r.k, r.quantity, r.formula, r.enumerated, "" if r.scan is None else r.scan,
                    "ok" if r.match else "MISMATCH"])
    return buf.getvalue()
