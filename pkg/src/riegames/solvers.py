"""First-order solvers: Riemannian gradient descent with the curvature-free
schedules, Riemannian extra gradient, and projected descent for mixed
variational inequalities, plus the constrained-game transformation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    GradientUnavailable,
    InvalidConstants,
    NumericalFailure,
    PointOutsideSet,
    StepSizeTooLarge,
)
from .games import GameSpec, StochasticOracle, joint_gradient, sample_gradient
from .manifolds import (
    Manifold,
    Point,
    TangentVector,
    coords_add,
    coords_finite,
    coords_scale,
    dist,
    exp_map,
    inner,
    log_map,
    random_point,
    tangent_norm,
    transport,
)

BOUNDARY_TOL = 1e-9
MIN_D2 = 1e-12


# ---------------------------------------------------------------------------
# configuration and traces
# ---------------------------------------------------------------------------


def _schedule_at(schedule, k: int, default):
    if schedule is None:
        return default
    if np.isscalar(schedule):
        return schedule
    seq = schedule
    return seq[k] if k < len(seq) else seq[-1]


@dataclass
class SolverConfig:
    """Iteration budget, schedules, stopping target and trace stride.

    ``step_sizes`` and ``batch_sizes`` may be scalars or per-iteration
    sequences; a sequence shorter than the budget persists its last entry.
    ``epsilon = 0`` disables early stopping.
    """

    max_iterations: int
    step_sizes: float | Sequence[float]
    batch_sizes: int | Sequence[int] = 1
    epsilon: float = 0.0
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        for k in range(self.max_iterations):
            if self.step_at(k) <= 0.0:
                raise ValueError(f"step size at k={k} must be positive")
            if self.batch_at(k) < 1:
                raise ValueError(f"batch size at k={k} must be >= 1")

    def step_at(self, k: int) -> float:
        return float(_schedule_at(self.step_sizes, k, 1.0))

    def batch_at(self, k: int) -> int:
        return int(_schedule_at(self.batch_sizes, k, 1))


@dataclass(frozen=True)
class TraceRecord:
    k: int
    grad_norm: float
    residual: float
    dist_to_reference: float | None
    step_size: float
    batch_size: int
    cumulative_queries: int
    wall_nanos: int
    surrogate: float | None = None


@dataclass
class RunTrace:
    records: list[TraceRecord]
    terminal_point: object
    terminated_by: str  # "budget" | "epsilon_reached" | "numerical_failure"
    metadata: dict = field(default_factory=dict)

    @property
    def terminal_record(self) -> TraceRecord:
        return self.records[-1]


# ---------------------------------------------------------------------------
# schedules from the convergence guarantees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremSchedule:
    """Constant step, iteration count, batch schedule and query budget that
    realize the last-iterate rate for a strongly monotone game."""

    eta: float
    k_star: int
    batch_sizes: tuple[int, ...]
    query_budget: float
    stochastic: bool


def stochastic_batches(
    mu: float, lipschitz: float, sigma2: float, distance_bound: float, count: int
) -> tuple[int, ...]:
    """Geometrically growing batch sizes keeping the per-step variance term
    aligned with the contraction envelope."""
    kappa = mu / lipschitz
    coeff = 16.0 * sigma2 / (kappa**4 * (lipschitz * distance_bound) ** 2)
    return tuple(math.ceil(coeff * math.exp(kappa**2 * k / 4.0)) for k in range(count))


def theorem_schedule(
    mu: float, lipschitz: float, sigma2: float, distance_bound: float, epsilon: float
) -> TheoremSchedule:
    """Step size mu/L^2 with the iteration count and geometric batch growth
    matched to the target accuracy.

    ``distance_bound`` is d(y0, y*) in the deterministic case and an upper
    bound B >= d(y0, y*) in the stochastic case.
    """
    if not (0.0 < mu <= lipschitz):
        raise InvalidConstants(f"need 0 < mu <= L, got mu={mu}, L={lipschitz}")
    if epsilon <= 0.0:
        raise InvalidConstants("epsilon must be positive")
    if distance_bound <= 0.0:
        raise InvalidConstants("distance bound must be positive")
    if sigma2 < 0.0:
        raise InvalidConstants("sigma2 must be nonnegative")
    kappa = mu / lipschitz
    eta = mu / lipschitz**2
    lead = lipschitz * distance_bound / epsilon
    if sigma2 == 0.0:
        k_star = max(1, math.ceil(4.0 * math.log(lead) / kappa**2)) if lead > 1.0 else 1
        return TheoremSchedule(eta, k_star, (1,) * k_star, 0.0, False)
    k_star = max(1, math.ceil(8.0 * math.log(lead) / kappa**2)) if lead > 1.0 else 1
    batches = stochastic_batches(mu, lipschitz, sigma2, distance_bound, k_star)
    budget = 109.0 * sigma2 / (kappa**6 * epsilon**2)
    return TheoremSchedule(eta, k_star, batches, budget, True)


@dataclass(frozen=True)
class MixedViSchedule:
    step_sizes: tuple[float, ...]
    batch_sizes: tuple[int, ...]


def mixed_vi_schedule(
    mu: float, lipschitz: float, sigma2: float, distance_bound: float, max_iterations: int
) -> MixedViSchedule:
    """Warmup step 1/L, then mu/L^2; batch m0 = ceil(L^2 B^2 / sigma^2) and
    geometric growth afterwards. Deterministic mode uses unit batches."""
    if not (0.0 < mu <= lipschitz):
        raise InvalidConstants(f"need 0 < mu <= L, got mu={mu}, L={lipschitz}")
    if max_iterations < 1:
        raise InvalidConstants("max_iterations must be >= 1")
    if sigma2 < 0.0:
        raise InvalidConstants("sigma2 must be nonnegative")
    kappa = mu / lipschitz
    steps = tuple(
        1.0 / lipschitz if k == 0 else mu / lipschitz**2 for k in range(max_iterations)
    )
    if sigma2 == 0.0:
        return MixedViSchedule(steps, (1,) * max_iterations)
    if distance_bound <= 0.0:
        raise InvalidConstants("distance bound must be positive in stochastic mode")
    coeff = 12.0 * sigma2 / (91.0 * mu**2 * kappa**2 * distance_bound**2)
    batches = [math.ceil(lipschitz**2 * distance_bound**2 / sigma2)]
    for k in range(1, max_iterations):
        batches.append(max(1, math.ceil(coeff * math.exp(kappa**2 * (k - 1) / 4.0))))
    return MixedViSchedule(steps, tuple(batches))


# ---------------------------------------------------------------------------
# Riemannian gradient descent
# ---------------------------------------------------------------------------


def rgd_step(game: GameSpec, y: Point, eta: float, g: TangentVector) -> Point:
    """One descent step y -> exp_y(-eta * g)."""
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    return exp_map(y, -eta * g)


def _record(
    records, k, grad_norm, residual, dref, eta, batch, queries, t0, surrogate=None
):
    records.append(
        TraceRecord(
            k=k,
            grad_norm=grad_norm,
            residual=residual,
            dist_to_reference=dref,
            step_size=eta,
            batch_size=batch,
            cumulative_queries=queries,
            wall_nanos=time.perf_counter_ns() - t0,
            surrogate=surrogate,
        )
    )


def run_rgd(
    game: GameSpec,
    y0: Point,
    config: SolverConfig,
    oracle: StochasticOracle | None = None,
    reference: Point | None = None,
) -> RunTrace:
    """Run (stochastic) Riemannian gradient descent and record a trace.

    Enforces the descent precondition eta_k <= 2 mu / L^2 for every k. With an
    oracle, each iteration consumes the scheduled batch of stochastic queries;
    without one, exact gradients are used (one query per iteration).
    """
    cap = 2.0 * game.mu / game.lipschitz**2
    for k in range(config.max_iterations):
        if config.step_at(k) > cap * (1.0 + 1e-12):
            raise StepSizeTooLarge(
                f"eta={config.step_at(k)} at k={k} exceeds 2*mu/L^2 = {cap:.6g}"
            )
    t0 = time.perf_counter_ns()
    records: list[TraceRecord] = []
    y = y0
    queries = 0
    terminated = "budget"
    k = 0
    while True:
        gn = tangent_norm(joint_gradient(game, y))
        if not math.isfinite(gn) or not coords_finite(y):
            trace = RunTrace(records, y, "numerical_failure")
            raise NumericalFailure(f"non-finite state at k={k}", trace)
        dref = dist(y, reference) if reference is not None else None
        eta = config.step_at(k)
        batch = config.batch_at(k)
        if k % config.record_every == 0 or k == config.max_iterations:
            _record(records, k, gn, gn, dref, eta, batch, queries, t0)
        if config.epsilon > 0.0 and gn <= config.epsilon:
            terminated = "epsilon_reached"
            if records[-1].k != k:
                _record(records, k, gn, gn, dref, eta, batch, queries, t0)
            break
        if k >= config.max_iterations:
            if records[-1].k != k:
                _record(records, k, gn, gn, dref, eta, batch, queries, t0)
            break
        if oracle is not None:
            g = sample_gradient(oracle, y, batch)
            queries += batch
        else:
            g = joint_gradient(game, y)
            queries += 1
        y = rgd_step(game, y, eta, g)
        k += 1
    return RunTrace(records, y, terminated, {"solver": "rgd"})


def run_reg(
    game: GameSpec,
    y0: Point,
    eta: float,
    max_iterations: int,
    record_every: int = 1,
    reference: Point | None = None,
    epsilon: float = 0.0,
) -> RunTrace:
    """Riemannian extra gradient with exact gradients.

    Each iteration takes a half step along -eta F(y_k), then steps from y_k
    along the transported midpoint gradient. No rate is asserted.
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    t0 = time.perf_counter_ns()
    records: list[TraceRecord] = []
    y = y0
    queries = 0
    terminated = "budget"
    k = 0
    while True:
        g = joint_gradient(game, y)
        gn = tangent_norm(g)
        if not math.isfinite(gn) or not coords_finite(y):
            raise NumericalFailure(f"non-finite state at k={k}", RunTrace(records, y, "numerical_failure"))
        dref = dist(y, reference) if reference is not None else None
        if k % record_every == 0 or k == max_iterations:
            _record(records, k, gn, gn, dref, eta, 1, queries, t0)
        if epsilon > 0.0 and gn <= epsilon:
            terminated = "epsilon_reached"
            if records[-1].k != k:
                _record(records, k, gn, gn, dref, eta, 1, queries, t0)
            break
        if k >= max_iterations:
            if records[-1].k != k:
                _record(records, k, gn, gn, dref, eta, 1, queries, t0)
            break
        half = exp_map(y, -eta * g)
        g_half = joint_gradient(game, half)
        carried = transport(half, y, g_half)
        y = exp_map(y, -eta * carried)
        queries += 2
        k += 1
    return RunTrace(records, y, terminated, {"solver": "reg"})


# ---------------------------------------------------------------------------
# mixed variational inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonnegativeOrthant:
    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0)

    def contains(self, x: np.ndarray, tol: float = BOUNDARY_TOL) -> bool:
        return x.shape == (self.dim,) and bool(np.all(x >= -tol))

    def residual_sq(self, x: np.ndarray, f: np.ndarray, tol: float = BOUNDARY_TOL) -> float:
        active = x <= tol
        contrib = np.where(active, np.minimum(f, 0.0) ** 2, f**2)
        return float(np.sum(contrib))


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lower <= upper componentwise")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = BOUNDARY_TOL) -> bool:
        return x.shape == self.lower.shape and bool(
            np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        )

    def residual_sq(self, x: np.ndarray, f: np.ndarray, tol: float = BOUNDARY_TOL) -> float:
        at_lower = x <= self.lower + tol
        at_upper = x >= self.upper - tol
        total = 0.0
        for i in range(self.dim):
            if at_lower[i] and at_upper[i]:
                continue  # pinned coordinate, normal cone is all of R
            if at_lower[i]:
                total += min(f[i], 0.0) ** 2
            elif at_upper[i]:
                total += max(f[i], 0.0) ** 2
            else:
                total += f[i] ** 2
        return float(total)


def tangent_residual(constraint, x: np.ndarray, f_e: np.ndarray) -> float:
    """Distance from -f_e to the normal cone at x: min_{c in N(x)} ||f_e + c||.

    Interior coordinates contribute f_i^2; coordinates on an active face only
    contribute the component pointing out of the set.
    """
    x = np.asarray(x, dtype=float)
    f_e = np.asarray(f_e, dtype=float)
    if x.size == 0:
        return 0.0
    if not constraint.contains(x):
        raise PointOutsideSet(f"x is outside the constraint set beyond {BOUNDARY_TOL:.0e}")
    return math.sqrt(constraint.residual_sq(x, f_e))


@dataclass
class MixedVIProblem:
    """Operator pair over a manifold block and a constrained Euclidean block."""

    manifold: Manifold
    euclidean_dim: int
    constraint: object
    operator_manifold: Callable[[Point, np.ndarray], TangentVector]
    operator_euclidean: Callable[[Point, np.ndarray], np.ndarray]
    mu: float
    lipschitz: float
    sigma2: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.mu <= self.lipschitz):
            raise ValueError("need 0 <= mu <= L")


def mixed_distance(problem: MixedVIProblem, z0, z1) -> float:
    y0, x0 = z0
    y1, x1 = z1
    return math.sqrt(dist(y0, y1) ** 2 + float(np.sum((x0 - x1) ** 2)))


def _mixed_residual(problem: MixedVIProblem, y: Point, x: np.ndarray):
    fm = problem.operator_manifold(y, x)
    fe = problem.operator_euclidean(y, x)
    gm = tangent_norm(fm)
    rtan = tangent_residual(problem.constraint, x, fe) if x.size else 0.0
    return fm, fe, gm, math.sqrt(gm * gm + rtan * rtan)


def run_mixed_vi(
    problem: MixedVIProblem,
    z0,
    config: SolverConfig,
    reference=None,
) -> RunTrace:
    """Projected descent for a mixed variational inequality.

    The manifold block takes exponential-map steps while the Euclidean block
    takes projected gradient steps; the recorded residual combines the
    manifold gradient norm with the tangent residual. Each record also carries
    the surrogate quantity used by the descent audit (defined from k = 1).
    """
    y, x = z0
    x = np.asarray(x, dtype=float)
    if x.size and not problem.constraint.contains(x):
        raise PointOutsideSet("initial Euclidean block outside the constraint set")
    rng = np.random.default_rng(config.seed)
    sigma = math.sqrt(problem.sigma2)
    t0 = time.perf_counter_ns()
    records: list[TraceRecord] = []
    queries = 0
    terminated = "budget"
    k = 0
    prev = None  # (x_prev, g_e_used, eta_used)
    while True:
        fm, fe, gm, residual = _mixed_residual(problem, y, x)
        if not math.isfinite(residual) or not coords_finite(y) or not np.all(np.isfinite(x)):
            raise NumericalFailure(
                f"non-finite state at k={k}", RunTrace(records, (y, x), "numerical_failure")
            )
        surrogate = None
        if prev is not None:
            x_prev, ge_prev, eta_prev = prev
            drift = fe - ge_prev + (x_prev - x) / eta_prev if x.size else np.zeros(0)
            surrogate = math.sqrt(float(np.sum(drift**2)) + gm * gm)
        dref = mixed_distance(problem, (y, x), reference) if reference is not None else None
        eta = config.step_at(k)
        batch = config.batch_at(k)
        if k % config.record_every == 0 or k == config.max_iterations:
            _record(records, k, gm, residual, dref, eta, batch, queries, t0, surrogate)
        if config.epsilon > 0.0 and residual <= config.epsilon:
            terminated = "epsilon_reached"
            if records[-1].k != k:
                _record(records, k, gm, residual, dref, eta, batch, queries, t0, surrogate)
            break
        if k >= config.max_iterations:
            if records[-1].k != k:
                _record(records, k, gm, residual, dref, eta, batch, queries, t0, surrogate)
            break
        gm_vec, ge_vec = fm.value, fe
        if sigma > 0.0:
            gm_vec, ge_vec = _mixed_noisy(problem, y, x, fm, fe, batch, sigma, rng)
        queries += batch
        y_next = exp_map(y, TangentVector(y, coords_scale(gm_vec, -eta)))
        x_next = problem.constraint.project(x - eta * ge_vec) if x.size else x
        prev = (x, ge_vec, eta)
        y, x = y_next, x_next
        k += 1
    return RunTrace(records, (y, x), terminated, {"solver": "mixed"})


def _mixed_noisy(problem, y, x, fm, fe, m, sigma, rng):
    """Average of m joint noisy queries: one Gaussian radius spread over a
    unit-norm joint direction (manifold block + Euclidean block)."""
    manifold = problem.manifold
    ip = manifold.metric_at(y.value)
    acc_m = manifold.zero(y.value)
    acc_e = np.zeros_like(x)
    for _ in range(m):
        t = manifold.project(y.value, manifold.ambient_normal(y.value, rng))
        te = rng.standard_normal(x.shape) if x.size else np.zeros(0)
        nrm = math.sqrt(max(ip(t, t), 0.0) + float(np.sum(te**2)))
        r = sigma * rng.standard_normal()
        if nrm > 0.0:
            acc_m = coords_add(acc_m, coords_scale(t, r / nrm))
            acc_e = acc_e + (r / nrm) * te
    gm = coords_add(fm.value, coords_scale(acc_m, 1.0 / m))
    ge = fe + acc_e / m
    return gm, ge


# ---------------------------------------------------------------------------
# constrained game -> mixed variational inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintFunction:
    """Geodesically convex constraint g(y_i) <= 0 with a Riemannian gradient."""

    value: Callable[[Point], float]
    gradient: Callable[[Point], TangentVector] | None = None


def constrained_game_to_mixed_vi(
    game: GameSpec,
    constraints: Sequence[Sequence[ConstraintFunction]],
    certify_pairs: int = 100,
    certify_seed: int = 0,
    multiplier_radius: float = 2.0,
) -> MixedVIProblem:
    """Lift per-player constraints into Lagrange multipliers on the
    nonnegative orthant and return the resulting mixed problem.

    The manifold operator becomes F(y) + sum_j x_j grad g_j(y); the Euclidean
    operator stacks -g_j(y). Monotonicity of the lifted operator is certified
    by sampling at construction.
    """
    if len(constraints) != game.players:
        raise ValueError("one constraint list per player required")
    flat: list[tuple[int, ConstraintFunction]] = []
    for i, per_player in enumerate(constraints):
        for g in per_player:
            if g.gradient is None:
                raise GradientUnavailable(f"constraint for player {i} lacks a gradient")
            flat.append((i, g))
    n = len(flat)

    def op_manifold(y: Point, x: np.ndarray) -> TangentVector:
        base = joint_gradient(game, y)
        if n == 0:
            return base
        comps = (y,) if game.players == 1 else tuple(
            Point(m, v) for m, v in zip(game.manifolds, y.value)
        )
        parts = list(base.value) if game.players > 1 else [base.value]
        for (i, g), xj in zip(flat, x):
            parts[i] = coords_add(parts[i], coords_scale(g.gradient(comps[i]).value, float(xj)))
        return TangentVector(y, parts[0] if game.players == 1 else tuple(parts))

    def op_euclidean(y: Point, x: np.ndarray) -> np.ndarray:
        comps = (y,) if game.players == 1 else tuple(
            Point(m, v) for m, v in zip(game.manifolds, y.value)
        )
        return np.array([-g.value(comps[i]) for i, g in flat], dtype=float)

    problem = MixedVIProblem(
        manifold=game.joint,
        euclidean_dim=n,
        constraint=NonnegativeOrthant(n),
        operator_manifold=op_manifold,
        operator_euclidean=op_euclidean,
        mu=0.0,
        lipschitz=max(game.lipschitz, 1.0),
        sigma2=0.0,
    )
    if n == 0:
        problem.mu, problem.lipschitz = game.mu, game.lipschitz
        return problem
    report = certify_mixed_monotonicity(
        problem, game.center, certify_pairs, certify_seed, multiplier_radius
    )
    problem.mu = max(0.95 * report[0], 0.0)
    problem.lipschitz = 1.05 * report[1]
    return problem


def certify_mixed_monotonicity(
    problem: MixedVIProblem, center: Point, n_pairs: int, seed: int, multiplier_radius: float
):
    """Sampled (min quotient, max Lipschitz ratio) for a mixed operator."""
    rng = np.random.default_rng(seed)
    n = problem.euclidean_dim
    min_ratio = math.inf
    max_lip = 0.0
    for _ in range(n_pairs):
        y1 = random_point(problem.manifold, rng, center=center, radius=1.0)
        y2 = random_point(problem.manifold, rng, center=center, radius=1.0)
        x1 = problem.constraint.project(rng.uniform(0.0, multiplier_radius, size=n))
        x2 = problem.constraint.project(rng.uniform(0.0, multiplier_radius, size=n))
        d2 = dist(y1, y2) ** 2 + float(np.sum((x1 - x2) ** 2))
        if d2 < MIN_D2:
            continue
        f1m = problem.operator_manifold(y1, x1)
        f2m = problem.operator_manifold(y2, x2)
        carried = transport(y2, y1, f2m)
        f1e = problem.operator_euclidean(y1, x1)
        f2e = problem.operator_euclidean(y2, x2)
        num = inner(y1, carried - f1m, log_map(y1, y2)) + float(np.dot(f2e - f1e, x2 - x1))
        lip2 = tangent_norm(f1m - carried) ** 2 + float(np.sum((f1e - f2e) ** 2))
        min_ratio = min(min_ratio, num / d2)
        max_lip = max(max_lip, math.sqrt(lip2 / d2))
    if not math.isfinite(min_ratio):
        raise ValueError("no usable sample pairs")
    return min_ratio, max_lip
