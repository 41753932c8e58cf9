"""Named experiment scenarios and their configuration schema."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from . import linalg
from .errors import ConfigError
from .games import (
    GameSpec,
    check_monotonicity,
    make_min_max_distance_game,
    make_potential_distance_game,
    make_robust_karcher_game,
)
from .manifolds import (
    SPD,
    Euclidean,
    Hyperboloid,
    Point,
    Product,
    point,
    random_point,
)
from .solvers import (
    MixedVIProblem,
    NonnegativeOrthant,
    RunTrace,
    SolverConfig,
    run_rgd,
)

SCENARIO_NAMES = (
    "potential_spd",
    "potential_hyperbolic",
    "karcher_robust",
    "minmax_distance",
    "mixed_vi_orthant",
    "reg_bilinear",
)

_DEFAULT_SOLVER = {
    "potential_spd": "rgd",
    "potential_hyperbolic": "rgd",
    "karcher_robust": "rgd",
    "minmax_distance": "rgd",
    "mixed_vi_orthant": "mixed",
    "reg_bilinear": "reg",
}

_DEFAULT_DIM = {
    "potential_spd": 3,
    "potential_hyperbolic": 3,
    "karcher_robust": 3,
    "minmax_distance": 2,
    "mixed_vi_orthant": 2,
    "reg_bilinear": 2,
}


@dataclass
class ScenarioConfig:
    """Flat JSON-backed configuration; unknown keys are rejected."""

    scenario: str
    dim: int | None = None
    players: int = 2
    anchors_seed: int = 0
    gamma: float = 4.0
    coupling: float = 0.5
    solver: str | None = None
    mu: Any = "estimate"
    lipschitz: Any = "estimate"
    sigma2: float = 0.0
    bound: float | None = None
    epsilon: float = 1e-6
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs"
    max_iterations: int | None = None
    record_every: int = 1
    gap_radius: float = 1.0
    estimate_pairs: int = 200
    estimate_seed: int = 1
    step_size: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.scenario!r}; known: {', '.join(SCENARIO_NAMES)}")
        if self.solver is None:
            self.solver = _DEFAULT_SOLVER[self.scenario]
        if self.solver not in ("rgd", "reg", "mixed"):
            raise ConfigError(f"solver must be one of rgd/reg/mixed, got {self.solver!r}")
        if self.dim is None:
            self.dim = _DEFAULT_DIM[self.scenario]
        if self.dim < 2 or self.dim > 16:
            raise ConfigError("dim must be between 2 and 16")
        if self.players < 1 or self.players > 8:
            raise ConfigError("players must be between 1 and 8")
        if self.sigma2 < 0.0:
            raise ConfigError("sigma2 must be nonnegative")
        if self.epsilon < 0.0:
            raise ConfigError("epsilon must be nonnegative")
        if not self.seeds or not all(isinstance(s, int) for s in self.seeds):
            raise ConfigError("seeds must be a nonempty list of integers")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.gap_radius <= 0.0:
            raise ConfigError("gap_radius must be positive")
        for name in ("mu", "lipschitz"):
            v = getattr(self, name)
            if v != "estimate" and not isinstance(v, (int, float)):
                raise ConfigError(f"{name} must be a number or the string 'estimate'")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "scenario" not in raw:
            raise ConfigError("config needs a 'scenario' key")
        try:
            return cls(**raw)
        except TypeError as e:
            raise ConfigError(str(e)) from e


@dataclass
class PreparedScenario:
    """Everything a runner needs: the problem, a start point, and a reference."""

    name: str
    kind: str  # rgd | reg | mixed
    game: GameSpec | None
    problem: MixedVIProblem | None
    start: object
    reference: object | None
    reference_source: str  # analytic | prerun | none
    notes: dict = field(default_factory=dict)


def _spd_anchor_points(n: int, count: int, seed: int):
    spd = SPD(n)
    rng = np.random.default_rng(seed)
    center = point(spd, spd.origin(), check=False)
    return [random_point(spd, rng, center=center, radius=0.6) for _ in range(count)]


def _start_near(game: GameSpec, seed: int, radius: float) -> Point:
    rng = np.random.default_rng(seed + 104729)
    return random_point(game.joint, rng, center=game.center, radius=radius)


def _resolve_constants(cfg: ScenarioConfig, game: GameSpec) -> tuple[float, float, str]:
    if cfg.mu == "estimate" or cfg.lipschitz == "estimate":
        report = check_monotonicity(game, cfg.estimate_pairs, cfg.estimate_seed)
        if report.min_ratio < -1e-9:
            raise ConfigError(
                f"sampled monotonicity quotient is negative ({report.min_ratio:.3e})"
            )
        mu = max(0.95 * report.min_ratio, 0.0) if cfg.mu == "estimate" else float(cfg.mu)
        lipschitz = (
            1.05 * report.max_lipschitz_ratio if cfg.lipschitz == "estimate" else float(cfg.lipschitz)
        )
        source = "estimated"
    else:
        mu, lipschitz = float(cfg.mu), float(cfg.lipschitz)
        source = "config"
    if not (0.0 <= mu <= lipschitz):
        raise ConfigError(f"resolved constants invalid: mu={mu}, L={lipschitz}")
    game.mu, game.lipschitz = mu, lipschitz
    return mu, lipschitz, source


def _build_potential(cfg: ScenarioConfig, kind: str) -> PreparedScenario:
    n = cfg.dim
    if kind == "spd":
        anchors = _spd_anchor_points(min(n, 5), cfg.players, cfg.anchors_seed)
    else:
        hyp = Hyperboloid(n)
        rng = np.random.default_rng(cfg.anchors_seed)
        origin = point(hyp, hyp.origin(), check=False)
        anchors = [random_point(hyp, rng, center=origin, radius=0.6) for _ in range(cfg.players)]
    game = make_potential_distance_game(anchors)
    start = _start_near(game, cfg.anchors_seed, radius=1.2)
    return PreparedScenario(
        name=f"potential_{kind}",
        kind="rgd",
        game=game,
        problem=None,
        start=start,
        reference=game.nash,
        reference_source="analytic",
    )


def _build_karcher(cfg: ScenarioConfig) -> PreparedScenario:
    anchors = _spd_anchor_points(min(cfg.dim, 5), max(cfg.players, 2), cfg.anchors_seed)
    game = make_robust_karcher_game(anchors, cfg.gamma)
    start = _start_near(game, cfg.anchors_seed, radius=0.5)
    return PreparedScenario(
        name="karcher_robust",
        kind="rgd",
        game=game,
        problem=None,
        start=start,
        reference=None,
        reference_source="prerun",
    )


def _build_minmax(cfg: ScenarioConfig) -> PreparedScenario:
    n = cfg.dim
    rng = np.random.default_rng(cfg.anchors_seed)
    euc = Euclidean(n)
    a = point(euc, rng.uniform(-1.0, 1.0, size=n), check=False)
    b = point(euc, rng.uniform(-1.0, 1.0, size=n), check=False)
    game = make_min_max_distance_game(a, b, cfg.coupling)
    start = _start_near(game, cfg.anchors_seed, radius=1.5)
    return PreparedScenario(
        name="minmax_distance",
        kind="rgd",
        game=game,
        problem=None,
        start=start,
        reference=game.nash,
        reference_source="analytic",
    )


def _sym_part_extremes(j: np.ndarray) -> tuple[float, float]:
    sym = 0.5 * (j + j.T)
    mu = float(linalg.sym_eigen(sym).eigenvalues.min())
    lam_max = float(linalg.sym_eigen(j.T @ j).eigenvalues.max())
    return mu, math.sqrt(lam_max)


def build_affine_mixed_problem(dim: int, euclidean_dim: int, seed: int):
    """Strongly monotone affine operator over Euclidean(dim) x orthant with a
    constructed solution: half the multipliers active with outward pressure.

    Returns (problem, z_star).
    """
    rng = np.random.default_rng(seed)
    n, m = dim, euclidean_dim
    euc = Euclidean(n)
    cross = rng.uniform(-0.5, 0.5, size=(n, m))
    p_block = 2.0 * np.eye(n) + _random_sym(rng, n, 0.3)
    q_block = 2.0 * np.eye(m) + _random_sym(rng, m, 0.3)
    j = np.block([[p_block, cross], [-cross.T, q_block]])
    mu, lipschitz = _sym_part_extremes(j)

    y_star = rng.uniform(-0.5, 0.5, size=n)
    x_star = np.where(np.arange(m) % 2 == 0, 0.0, 0.7)
    push = np.where(x_star == 0.0, 0.5, 0.0)  # outward pressure on active faces
    z_star = np.concatenate([y_star, x_star])

    def op(yv: np.ndarray, xv: np.ndarray) -> np.ndarray:
        z = np.concatenate([yv, xv])
        out = j @ (z - z_star)
        out[n:] += push
        return out

    def op_manifold(yp: Point, xv: np.ndarray):
        from .manifolds import TangentVector

        return TangentVector(yp, op(yp.value, xv)[:n])

    def op_euclidean(yp: Point, xv: np.ndarray) -> np.ndarray:
        return op(yp.value, xv)[n:]

    problem = MixedVIProblem(
        manifold=euc,
        euclidean_dim=m,
        constraint=NonnegativeOrthant(m),
        operator_manifold=op_manifold,
        operator_euclidean=op_euclidean,
        mu=mu,
        lipschitz=lipschitz,
    )
    reference = (point(euc, y_star, check=False), x_star)
    return problem, reference


def _random_sym(rng, n: int, scale: float) -> np.ndarray:
    a = rng.uniform(-scale, scale, size=(n, n))
    return 0.5 * (a + a.T)


def _build_mixed(cfg: ScenarioConfig) -> PreparedScenario:
    problem, reference = build_affine_mixed_problem(cfg.dim, cfg.dim, cfg.anchors_seed)
    rng = np.random.default_rng(cfg.anchors_seed + 104729)
    euc = problem.manifold
    y0 = point(euc, reference[0].value + rng.uniform(-1.0, 1.0, size=cfg.dim), check=False)
    x0 = problem.constraint.project(reference[1] + rng.uniform(-0.5, 1.0, size=cfg.dim))
    return PreparedScenario(
        name="mixed_vi_orthant",
        kind="mixed",
        game=None,
        problem=problem,
        start=(y0, x0),
        reference=reference,
        reference_source="analytic",
    )


def make_bilinear_game(dim: int, seed: int) -> GameSpec:
    """Zero-sum bilinear saddle u(y1, y2) = y1 . (C y2); merely monotone.

    C stays close to the identity so its singular values are bounded away
    from zero and extra-gradient contracts at a usable rate.
    """
    rng = np.random.default_rng(seed)
    c = 0.2 * rng.uniform(-1.0, 1.0, size=(dim, dim)) + np.eye(dim)
    euc = Euclidean(dim)
    joint = Product((euc, euc))
    lipschitz = math.sqrt(float(linalg.sym_eigen(c.T @ c).eigenvalues.max()))
    center = Point(joint, (np.zeros(dim), np.zeros(dim)))

    def u(y: Point) -> float:
        y1, y2 = y.value
        return float(y1 @ c @ y2)

    def loss2(y: Point) -> float:
        return -u(y)

    def gradient(y: Point):
        from .manifolds import TangentVector

        y1, y2 = y.value
        return TangentVector(y, (c @ y2, -(c.T @ y1)))

    return GameSpec(
        name="bilinear_saddle",
        manifolds=(euc, euc),
        losses=(u, loss2),
        gradient_fn=gradient,
        mu=0.0,
        lipschitz=lipschitz,
        center=center,
        nash=center,
    )


def _build_reg(cfg: ScenarioConfig) -> PreparedScenario:
    game = make_bilinear_game(cfg.dim, cfg.anchors_seed)
    rng = np.random.default_rng(cfg.anchors_seed + 104729)
    start = random_point(game.joint, rng, center=game.center, radius=1.5)
    return PreparedScenario(
        name="reg_bilinear",
        kind="reg",
        game=game,
        problem=None,
        start=start,
        reference=game.nash,
        reference_source="analytic",
    )


_BUILDERS = {
    "potential_spd": lambda cfg: _build_potential(cfg, "spd"),
    "potential_hyperbolic": lambda cfg: _build_potential(cfg, "hyperbolic"),
    "karcher_robust": _build_karcher,
    "minmax_distance": _build_minmax,
    "mixed_vi_orthant": _build_mixed,
    "reg_bilinear": _build_reg,
}


def build_scenario(cfg: ScenarioConfig) -> PreparedScenario:
    prepared = _BUILDERS[cfg.scenario](cfg)
    if prepared.kind != cfg.solver:
        if cfg.solver == "rgd" and cfg.scenario == "reg_bilinear":
            raise ConfigError("reg_bilinear is merely monotone; rgd schedules need mu > 0")
        if cfg.solver == "mixed" or prepared.kind == "mixed":
            raise ConfigError(f"scenario {cfg.scenario} requires solver {prepared.kind}")
        prepared.kind = cfg.solver
    return prepared


def compute_prerun_reference(game: GameSpec, start: Point, budget: int) -> Point:
    """High-precision descent run used when no analytic equilibrium exists."""
    eta = game.mu / game.lipschitz**2
    config = SolverConfig(
        max_iterations=budget, step_sizes=eta, epsilon=1e-12, record_every=max(budget, 1)
    )
    trace: RunTrace = run_rgd(game, start, config)
    return trace.terminal_point


def scenario_defaults(name: str) -> dict:
    cfg = ScenarioConfig(scenario=name)
    return {
        "scenario": name,
        "solver": cfg.solver,
        "dim": cfg.dim,
        "players": cfg.players,
        "anchors_seed": cfg.anchors_seed,
        "gamma": cfg.gamma if name == "karcher_robust" else None,
        "coupling": cfg.coupling if name == "minmax_distance" else None,
        "mu": cfg.mu,
        "lipschitz": cfg.lipschitz,
        "sigma2": cfg.sigma2,
        "epsilon": cfg.epsilon,
        "seeds": cfg.seeds,
    }
