"""Exact total mixing times and the spectral upper bound."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .graphs import SizeError
from .stategraph import StateGraph

__all__ = [
    "MixingResult",
    "PeriodicityError",
    "NumericError",
    "PowerCache",
    "total_variation",
    "variation_trace",
    "total_mixing_time",
    "total_mixing_time_linear",
    "symmetrized",
    "spectral_bound",
    "mixing_report",
]

log = logging.getLogger(__name__)

DENSE_CAP = int(os.environ.get("MATCHMIX_DENSE_CAP", "6000"))
EIGEN_DENSE_LIMIT = 2000
TIE_TOL = 1e-9
DRIFT_TOL = 1e-9


class PeriodicityError(RuntimeError):
    pass


class NumericError(RuntimeError):
    pass


@dataclass
class MixingResult:
    epsilon: float
    pi_min: float
    tau_exact: int | None = None
    # other admissible values when d(pi, t) sits within 1e-9 of epsilon
    tau_alternatives: list[int] = field(default_factory=list)
    d_trace: list[tuple[int, float]] | None = None
    lambda2: float | None = None
    lambda_min: float | None = None
    lambda_max_abs: float | None = None
    spectral_bound: float | None = None


def _dense(sg: StateGraph) -> np.ndarray:
    if sg.size > DENSE_CAP:
        raise SizeError(f"{sg.size} states exceeds the dense-matrix cap {DENSE_CAP}")
    return sg.P.toarray()


class PowerCache:
    """Matrix powers by binary exponentiation, caching P^(2^i)."""

    def __init__(self, P: np.ndarray):
        self.squares = [np.asarray(P, dtype=float)]

    def square(self, i: int) -> np.ndarray:
        while len(self.squares) <= i:
            last = self.squares[-1]
            self.squares.append(last @ last)
        return self.squares[i]

    def power(self, t: int) -> np.ndarray:
        n = self.squares[0].shape[0]
        out = None
        i = 0
        while t:
            if t & 1:
                sq = self.square(i)
                out = sq.copy() if out is None else out @ sq
            t >>= 1
            i += 1
        return np.eye(n) if out is None else out


def _distance(Pt: np.ndarray, pi: np.ndarray) -> float:
    return float(0.5 * np.abs(Pt - pi[None, :]).sum(axis=1).max())


def _guard(Pt: np.ndarray, t: int) -> np.ndarray:
    drift = np.abs(Pt.sum(axis=1) - 1.0).max()
    if drift > DRIFT_TOL:
        log.warning("row sums of P^%d drifted by %.3g; renormalising", t, drift)
        Pt = Pt / Pt.sum(axis=1, keepdims=True)
    return Pt


def total_variation(sg: StateGraph, t: int, cache: PowerCache | None = None) -> float:
    """d(pi, t): the worst start state's variation distance after t steps."""
    if t < 0:
        raise ValueError("t must be non-negative")
    cache = cache or PowerCache(_dense(sg))
    return _distance(_guard(cache.power(t), t), sg.pi)


def variation_trace(sg: StateGraph, t_max: int) -> list[tuple[int, float]]:
    """d(pi, t) for t = 0..t_max by repeated multiplication."""
    P = _dense(sg)
    Pt = np.eye(sg.size)
    out = [(0, _distance(Pt, sg.pi))]
    for t in range(1, t_max + 1):
        Pt = Pt @ P
        out.append((t, _distance(Pt, sg.pi)))
    return out


def _gate(sg: StateGraph) -> None:
    if sg.size > 1 and sg.is_bipartite():
        raise PeriodicityError(
            "state graph is bipartite without self-loops, so the chain is periodic; "
            "use the lazy variant (StateGraph.lazy) instead"
        )


def _ties(d_at: dict[int, float], tau: int, eps: float) -> list[int]:
    alt = []
    if tau in d_at and abs(d_at[tau] - eps) < TIE_TOL:
        alt.append(tau + 1)
    if tau - 1 in d_at and abs(d_at[tau - 1] - eps) < TIE_TOL:
        alt.append(tau - 1)
    return alt


def total_mixing_time(sg: StateGraph, epsilon: float, trace: bool = False, t_max: int = 2**40) -> MixingResult:
    """tau(eps) = min{t : d(pi, t) <= eps} by doubling then binary search.

    Relies on d(pi, t) being non-increasing in t. The bracket search reuses
    the cached squarings, so only O(log tau) products are formed.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    res = MixingResult(epsilon=epsilon, pi_min=sg.pi_min)
    d_at: dict[int, float] = {}
    if sg.size == 1:
        res.tau_exact = 0
        res.d_trace = [(0, 0.0)] if trace else None
        return res
    _gate(sg)
    cache = PowerCache(_dense(sg))
    pi = sg.pi

    d_at[0] = 1.0 - float(pi.min())
    if d_at[0] <= epsilon:
        res.tau_exact = 0
    else:
        j = 0
        while True:
            t = 1 << j
            if t > t_max:
                raise NumericError(f"d(pi, t) still above {epsilon} at t = {t_max}")
            d_at[t] = _distance(_guard(cache.square(j), t), pi)
            if d_at[t] <= epsilon:
                break
            j += 1
        if j == 0:
            res.tau_exact = 1
        else:
            lo = 1 << (j - 1)
            acc = cache.square(j - 1)
            for i in range(j - 2, -1, -1):
                cand = acc @ cache.square(i)
                t = lo + (1 << i)
                d_at[t] = _distance(_guard(cand, t), pi)
                if d_at[t] > epsilon:
                    lo, acc = t, cand
            res.tau_exact = lo + 1
            if res.tau_exact not in d_at:
                d_at[res.tau_exact] = _distance(_guard(acc @ cache.square(0), res.tau_exact), pi)
    res.tau_alternatives = _ties(d_at, res.tau_exact, epsilon)
    if trace:
        res.d_trace = sorted(d_at.items())
    return res


def total_mixing_time_linear(sg: StateGraph, epsilon: float, t_max: int = 10**6) -> int:
    """Reference tau(eps) by scanning t = 0, 1, 2, ... one multiplication at a time."""
    if sg.size == 1:
        return 0
    P = _dense(sg)
    Pt = np.eye(sg.size)
    for t in range(t_max + 1):
        if _distance(Pt, sg.pi) <= epsilon:
            return t
        Pt = Pt @ P
    raise NumericError(f"no t <= {t_max} reaches epsilon {epsilon}")


def symmetrized(sg: StateGraph) -> sp.csr_matrix:
    """S = D^(1/2) P D^(-1/2); symmetric exactly when P is reversible w.r.t. pi."""
    root = np.sqrt(sg.pi)
    return (sp.diags(root) @ sg.P @ sp.diags(1.0 / root)).tocsr()


def _extremes(S: sp.csr_matrix) -> tuple[float, float]:
    n = S.shape[0]
    if n <= EIGEN_DENSE_LIMIT:
        vals = np.linalg.eigvalsh(S.toarray())
        return float(vals[-2]), float(vals[0])
    try:
        top, vt = eigsh(S, k=2, which="LA", tol=1e-12)
        low, vl = eigsh(S, k=1, which="SA", tol=1e-12)
    except ArpackNoConvergence as exc:
        raise NumericError(f"eigensolver did not converge: {exc}") from exc
    vals = np.concatenate([top, low])
    vecs = np.hstack([vt, vl])
    resid = np.linalg.norm(S @ vecs - vecs * vals, axis=0).max()
    if resid > 1e-9:
        raise NumericError(f"eigenpair residual {resid:.3g} above 1e-9")
    return float(np.sort(top)[0]), float(low[0])


def spectral_bound(sg: StateGraph, epsilon: float) -> MixingResult:
    """Upper bound (ln(1/eps) + ln(1/pi_min)) / (1 - lambda_max), with
    lambda_max = max(|lambda_2|, |lambda_min|)."""
    res = MixingResult(epsilon=epsilon, pi_min=sg.pi_min)
    log_term = math.log(1.0 / epsilon) + math.log(1.0 / sg.pi_min)
    if sg.size == 1:
        res.lambda2 = res.lambda_min = res.lambda_max_abs = 0.0
        res.spectral_bound = log_term
        return res
    S = symmetrized(sg)
    asym = abs(S - S.T)
    if asym.nnz and asym.max() > 1e-10:
        raise NumericError(f"chain is not reversible (asymmetry {asym.max():.3g})")
    S = ((S + S.T) * 0.5).tocsr()
    lam2, lam_min = _extremes(S)
    res.lambda2, res.lambda_min = lam2, lam_min
    res.lambda_max_abs = max(abs(lam2), abs(lam_min))
    gap = 1.0 - res.lambda_max_abs
    res.spectral_bound = math.inf if gap <= 1e-14 else log_term / gap
    return res


def mixing_report(sg: StateGraph, epsilon: float, trace: bool = False) -> MixingResult:
    """Exact tau(eps) together with the eigenvalue fields."""
    spec = spectral_bound(sg, epsilon)
    tau = total_mixing_time(sg, epsilon, trace=trace)
    spec.tau_exact = tau.tau_exact
    spec.tau_alternatives = tau.tau_alternatives
    spec.d_trace = tau.d_trace
    return spec
