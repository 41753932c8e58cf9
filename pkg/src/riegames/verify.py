"""Independent oracles and monitors: finite differences, descent-inequality
audits, contraction-rate fitting, and closed-form geometric oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import (
    EvaluationFailure,
    InsufficientData,
    StrideTooCoarse,
)
from .manifolds import Point, TangentVector, exp_map
from .solvers import RunTrace

FD_STEP = 1e-5
AUDIT_TOL = 1e-9
MIN_STOCHASTIC_SEEDS = 20


def finite_diff_directional(f: Callable[[Point], float], p: Point, v: TangentVector, h: float = FD_STEP) -> float:
    """Central difference of f along the geodesic through p with velocity v."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    try:
        hi = f(exp_map(p, h * v))
        lo = f(exp_map(p, -h * v))
    except Exception as e:
        raise EvaluationFailure(f"objective raised during finite differencing: {e!r}") from e
    return (hi - lo) / (2.0 * h)


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[int, ...]
    worst_slack: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _contraction_factor(eta: float, mu: float, lipschitz: float) -> float:
    gain = 2.0 * eta * mu - (eta * lipschitz) ** 2
    return 1.0 - gain / (2.0 - 2.0 * eta * mu + (eta * lipschitz) ** 2)


def _noise_denominator(eta: float, mu: float, lipschitz: float) -> float:
    return 2.0 * eta * mu - (eta * lipschitz) ** 2


def _require_unit_stride(trace: RunTrace) -> None:
    ks = [r.k for r in trace.records]
    if any(b - a != 1 for a, b in zip(ks, ks[1:])):
        raise StrideTooCoarse("descent auditing needs record_every = 1")


def _series(trace: RunTrace, attr: str):
    return [getattr(r, attr) for r in trace.records]


def audit_descent(
    traces: RunTrace | Sequence[RunTrace],
    mu: float,
    lipschitz: float,
    sigma2: float = 0.0,
    tolerance: float = AUDIT_TOL,
) -> ViolationReport:
    """Check every recorded step against the gradient-norm descent inequality.

    Deterministic mode (sigma2 = 0) audits a single trace exactly, flagging
    iteration k when ||F(y_{k+1})||^2 exceeds the contraction factor times
    ||F(y_k)||^2 plus a relative tolerance. Stochastic mode averages at least
    20 seeds and allows the per-batch variance term plus a three-standard-error
    band on the estimate.
    """
    if isinstance(traces, RunTrace):
        traces = [traces]
    if not traces:
        raise ValueError("need at least one trace")
    for t in traces:
        _require_unit_stride(t)
    if sigma2 == 0.0:
        violations: list[int] = []
        worst = -math.inf
        for t in traces:
            gn = _series(t, "grad_norm")
            for i in range(len(gn) - 1):
                rec = t.records[i]
                factor = _contraction_factor(rec.step_size, mu, lipschitz)
                bound = (factor + tolerance) * gn[i] ** 2
                slack = gn[i + 1] ** 2 - bound
                worst = max(worst, slack)
                if slack > 0.0:
                    violations.append(rec.k)
        return ViolationReport(tuple(sorted(set(violations))), worst, tolerance)

    if len(traces) < MIN_STOCHASTIC_SEEDS:
        raise ValueError(f"stochastic auditing needs >= {MIN_STOCHASTIC_SEEDS} seeds")
    length = min(len(t.records) for t in traces)
    sq = np.array([[r.grad_norm**2 for r in t.records[:length]] for t in traces])
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(len(traces))
    violations = []
    worst = -math.inf
    for i in range(length - 1):
        rec = traces[0].records[i]
        factor = _contraction_factor(rec.step_size, mu, lipschitz)
        denom = _noise_denominator(rec.step_size, mu, lipschitz)
        noise = 4.0 * sigma2 / (rec.batch_size * denom)
        bound = factor * mean[i] + noise + 3.0 * se[i + 1] + tolerance * mean[i]
        slack = mean[i + 1] - bound
        worst = max(worst, slack)
        if slack > 0.0:
            violations.append(rec.k)
    return ViolationReport(tuple(violations), worst, tolerance)


def audit_mixed_descent(
    traces: RunTrace | Sequence[RunTrace],
    mu: float,
    lipschitz: float,
    sigma2: float = 0.0,
    tolerance: float = AUDIT_TOL,
) -> ViolationReport:
    """Audit the mixed-problem surrogate residual against its descent
    inequality; transitions are checked from k = 1 where the surrogate exists."""
    if isinstance(traces, RunTrace):
        traces = [traces]
    for t in traces:
        _require_unit_stride(t)
    if sigma2 == 0.0:
        violations: list[int] = []
        worst = -math.inf
        for t in traces:
            recs = [r for r in t.records if r.surrogate is not None]
            for a, b in zip(recs, recs[1:]):
                if b.k - a.k != 1:
                    raise StrideTooCoarse("descent auditing needs record_every = 1")
                factor = _contraction_factor(a.step_size, mu, lipschitz)
                bound = (factor + tolerance) * a.surrogate**2
                slack = b.surrogate**2 - bound
                worst = max(worst, slack)
                if slack > 0.0:
                    violations.append(a.k)
        return ViolationReport(tuple(sorted(set(violations))), worst, tolerance)

    if len(traces) < MIN_STOCHASTIC_SEEDS:
        raise ValueError(f"stochastic auditing needs >= {MIN_STOCHASTIC_SEEDS} seeds")
    usable = [[r for r in t.records if r.surrogate is not None] for t in traces]
    length = min(len(u) for u in usable)
    sq = np.array([[r.surrogate**2 for r in u[:length]] for u in usable])
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(len(traces))
    violations = []
    worst = -math.inf
    for i in range(length - 1):
        rec = usable[0][i]
        factor = _contraction_factor(rec.step_size, mu, lipschitz)
        denom = _noise_denominator(rec.step_size, mu, lipschitz)
        noise = 3.0 * sigma2 / (rec.batch_size * denom)
        bound = factor * mean[i] + noise + 3.0 * se[i + 1] + tolerance * mean[i]
        slack = mean[i + 1] - bound
        worst = max(worst, slack)
        if slack > 0.0:
            violations.append(rec.k)
    return ViolationReport(tuple(violations), worst, tolerance)


MIN_FIT_RECORDS = 10
FIT_FLOOR = 1e-12


def fit_contraction(trace: RunTrace) -> float:
    """Least-squares slope of log ||F(y_k)||^2 against k.

    A run with constant step mu/L^2 should produce a slope at most
    log(1 - kappa^2 / (2 - kappa^2)) up to fitting noise.
    """
    pts = [(r.k, r.grad_norm) for r in trace.records if r.grad_norm > FIT_FLOOR]
    if len(pts) < MIN_FIT_RECORDS:
        raise InsufficientData(f"need >= {MIN_FIT_RECORDS} records above {FIT_FLOOR:.0e}")
    ks = np.array([p[0] for p in pts], dtype=float)
    logs = np.array([2.0 * math.log(p[1]) for p in pts])
    slope, _ = np.polyfit(ks, logs, 1)
    return float(slope)


def contraction_slope_bound(mu: float, lipschitz: float) -> float:
    """log of the per-step factor guaranteed at eta = mu / L^2."""
    kappa = mu / lipschitz
    return math.log(1.0 - kappa**2 / (2.0 - kappa**2))


def karcher_midpoint_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geodesic midpoint of two SPD matrices: A^(1/2) (A^(-1/2) B A^(-1/2))^(1/2) A^(1/2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sq = linalg.sym_func(a, "sqrt")
    isq = linalg.sym_func(a, "inv_sqrt")
    mid = isq @ b @ isq
    root = linalg.sym_func(0.5 * (mid + mid.T), "sqrt")
    out = sq @ root @ sq
    return 0.5 * (out + out.T)
