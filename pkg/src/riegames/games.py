"""Games on Riemannian manifolds: loss evaluators, the concatenated gradient
field, monotonicity certification, proximity bounds, and example factories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import (
    CouplingTooLarge,
    DegenerateSample,
    EvaluationFailure,
    InvalidAnchor,
    InvalidGamma,
    NonPositiveRadius,
    RieGamesError,
)
from .manifolds import (
    SPD,
    Euclidean,
    Hyperboloid,
    Manifold,
    Point,
    Product,
    TangentVector,
    _coords_equal,
    coords_add,
    coords_scale,
    curvature_distortion,
    dist,
    exp_map,
    inner,
    log_map,
    random_point,
    tangent_norm,
    transport,
)

MIN_PAIR_DISTANCE = 1e-6
DEFAULT_SAMPLING_RADIUS = 2.0


@dataclass
class GameSpec:
    """An N-player game: per-player manifolds, losses, and the joint gradient field.

    ``mu`` and ``lipschitz`` are the claimed strong-monotonicity modulus and
    smoothness constant of the field; ``center`` anchors monotonicity sampling
    and ``nash`` holds the analytic equilibrium when one is known.
    """

    name: str
    manifolds: tuple[Manifold, ...]
    losses: tuple[Callable[[Point], float], ...]
    gradient_fn: Callable[[Point], TangentVector]
    mu: float
    lipschitz: float
    center: Point
    nash: Point | None = None
    joint: Manifold = field(init=False)

    def __post_init__(self):
        if not self.manifolds:
            raise ValueError("a game needs at least one player")
        if len(self.losses) != len(self.manifolds):
            raise ValueError("one loss per player required")
        if not (0.0 <= self.mu <= self.lipschitz) or self.lipschitz <= 0.0:
            raise ValueError(f"need 0 <= mu <= L with L > 0, got mu={self.mu}, L={self.lipschitz}")
        self.joint = self.manifolds[0] if len(self.manifolds) == 1 else Product(self.manifolds)

    @property
    def players(self) -> int:
        return len(self.manifolds)

    @property
    def kappa(self) -> float:
        return self.mu / self.lipschitz


def point_components(game: GameSpec, y: Point) -> tuple[Point, ...]:
    if game.players == 1:
        return (y,)
    return tuple(Point(m, v) for m, v in zip(game.manifolds, y.value))


def bundle_tangent(game: GameSpec, y: Point, parts: Sequence) -> TangentVector:
    """Assemble per-player tangent coordinates into a joint tangent at ``y``."""
    if game.players == 1:
        return TangentVector(y, parts[0])
    return TangentVector(y, tuple(parts))


def joint_gradient(game: GameSpec, y: Point) -> TangentVector:
    """Evaluate the concatenated gradient field F(y)."""
    try:
        g = game.gradient_fn(y)
    except RieGamesError:
        raise
    except Exception as e:  # evaluator bug or domain error
        raise EvaluationFailure(f"gradient evaluator raised: {e!r}") from e
    if g.base.manifold != y.manifold or not _coords_equal(g.base.value, y.value):
        raise EvaluationFailure("gradient field returned a tangent not anchored at the query point")
    return g


def gradient_norm(game: GameSpec, y: Point) -> float:
    """||F(y)||_y; zero exactly at Nash equilibria of monotone games."""
    g = joint_gradient(game, y)
    return tangent_norm(g)


def gap_bound(game: GameSpec, y: Point, radius: float) -> float:
    """Upper bound radius * ||F(y)||_y on the duality gap over B(y, radius)."""
    if radius <= 0.0:
        raise NonPositiveRadius(f"radius must be positive, got {radius}")
    return radius * gradient_norm(game, y)


def total_gap_bound(game: GameSpec, y: Point, radius: float) -> float:
    """Upper bound on the total gap: the duality-gap bound at radius sqrt(N) * radius."""
    if radius <= 0.0:
        raise NonPositiveRadius(f"radius must be positive, got {radius}")
    return gap_bound(game, y, math.sqrt(game.players) * radius)


@dataclass(frozen=True)
class MonotonicityReport:
    samples: int
    min_ratio: float
    max_lipschitz_ratio: float


def check_monotonicity(
    game: GameSpec,
    n_pairs: int,
    rng_seed: int,
    radius: float = DEFAULT_SAMPLING_RADIUS,
) -> MonotonicityReport:
    """Sample point pairs around ``game.center`` and bound the field's
    monotonicity quotient and Lipschitz ratio empirically."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(rng_seed)
    min_ratio = math.inf
    max_lip = 0.0
    for _ in range(n_pairs):
        for _attempt in range(64):
            y = random_point(game.joint, rng, center=game.center, radius=radius)
            y2 = random_point(game.joint, rng, center=game.center, radius=radius)
            d = dist(y, y2)
            if d >= MIN_PAIR_DISTANCE:
                break
        else:
            raise DegenerateSample("could not sample a pair with d >= 1e-6")
        fy = joint_gradient(game, y)
        fy2 = joint_gradient(game, y2)
        carried = transport(y2, y, fy2)
        quotient = inner(y, carried - fy, log_map(y, y2)) / (d * d)
        lip = tangent_norm(fy - carried) / d
        min_ratio = min(min_ratio, quotient)
        max_lip = max(max_lip, lip)
    return MonotonicityReport(n_pairs, min_ratio, max_lip)


def _flat_lengths(manifold: Manifold):
    """Coordinate lengths when the manifold is flat, else None."""
    if isinstance(manifold, Euclidean):
        return [manifold.n]
    if isinstance(manifold, Product):
        out = []
        for f in manifold.factors:
            sub = _flat_lengths(f)
            if sub is None or len(sub) != 1:
                return None
            out.extend(sub)
        return out
    return None


@dataclass
class StochasticOracle:
    """Unbiased gradient oracle with tangent-space Gaussian noise.

    Each single query returns F(y) plus a zero-mean tangent perturbation whose
    expected squared norm is exactly ``sigma2``; an m-sample batch averages m
    independent perturbations. Holds mutable RNG state, so a single oracle
    must not be shared across concurrent runs (see :meth:`spawn`).
    """

    game: GameSpec
    sigma2: float
    seed: int
    query_count: int = 0

    def __post_init__(self):
        if self.sigma2 < 0.0:
            raise ValueError("sigma2 must be nonnegative")
        self._rng = np.random.default_rng(self.seed)

    def spawn(self, seed: int) -> "StochasticOracle":
        """Fresh oracle on the same game with its own RNG stream."""
        return StochasticOracle(self.game, self.sigma2, seed)


def _noise_mean(manifold: Manifold, y_value, m: int, sigma: float, rng) -> object:
    """Mean of m draws of (unit-direction tangent) * Normal(0, sigma)."""
    lengths = _flat_lengths(manifold)
    if lengths is not None:
        total = sum(lengths)
        t = rng.standard_normal((m, total))
        norms = np.linalg.norm(t, axis=1)
        radii = sigma * rng.standard_normal(m)
        coeff = np.where(norms > 0.0, radii / np.maximum(norms, 1e-300), 0.0)
        flat = (coeff @ t) / m
        if isinstance(manifold, Euclidean):
            return flat
        parts = []
        start = 0
        for ln in lengths:
            parts.append(flat[start : start + ln])
            start += ln
        return tuple(parts)
    ip = manifold.metric_at(y_value)
    acc = manifold.zero(y_value)
    for _ in range(m):
        t = manifold.project(y_value, manifold.ambient_normal(y_value, rng))
        nrm = math.sqrt(max(ip(t, t), 0.0))
        r = sigma * rng.standard_normal()
        if nrm > 0.0:
            acc = coords_add(acc, coords_scale(t, r / nrm))
    return coords_scale(acc, 1.0 / m)


def sample_gradient(oracle: StochasticOracle, y: Point, m: int) -> TangentVector:
    """Average of m stochastic gradient queries at ``y``; counts m queries."""
    if m < 1:
        raise ValueError("batch size must be >= 1")
    f = joint_gradient(oracle.game, y)
    oracle.query_count += m
    if oracle.sigma2 == 0.0:
        return f
    noise = _noise_mean(y.manifold, y.value, m, math.sqrt(oracle.sigma2), oracle._rng)
    return TangentVector(y, coords_add(f.value, noise))


# ---------------------------------------------------------------------------
# example game factories
# ---------------------------------------------------------------------------


def _validated_anchor(a: Point) -> Point:
    try:
        a.manifold.check_point(a.value)
    except RieGamesError as e:
        raise InvalidAnchor(f"anchor rejected: {e}") from e
    return a


def _field_smoothness(manifolds: Sequence[Manifold], region_radius: float) -> float:
    """Upper bound on the squared-distance field's Lipschitz constant within
    a geodesic ball of the given radius around the anchors."""
    return max(curvature_distortion(region_radius, m.curvature_lower_bound) for m in manifolds)


def make_potential_distance_game(
    anchors: Sequence[Point], region_radius: float = DEFAULT_SAMPLING_RADIUS
) -> GameSpec:
    """Potential game with potential f(y) = sum_i d(y_i, a_i)^2 / 2.

    Every player's loss is the potential itself, so the joint field is
    F(y)_i = -log_{y_i}(a_i) and the Nash equilibrium sits at the anchors.
    The claimed modulus is 1; the smoothness claim inflates with curvature
    through the distortion factor over the sampling region.
    """
    anchors = tuple(_validated_anchor(a) for a in anchors)
    if not anchors:
        raise InvalidAnchor("need at least one anchor")
    manifolds = tuple(a.manifold for a in anchors)
    anchor_values = anchors[0].value if len(anchors) == 1 else tuple(a.value for a in anchors)
    joint = manifolds[0] if len(manifolds) == 1 else Product(manifolds)
    center = Point(joint, anchor_values)

    def potential(y: Point) -> float:
        total = 0.0
        comps = (y,) if len(manifolds) == 1 else tuple(Point(m, v) for m, v in zip(manifolds, y.value))
        for yi, ai in zip(comps, anchors):
            total += 0.5 * dist(yi, ai) ** 2
        return total

    def gradient(y: Point) -> TangentVector:
        comps = (y,) if len(manifolds) == 1 else tuple(Point(m, v) for m, v in zip(manifolds, y.value))
        parts = [coords_scale(log_map(yi, ai).value, -1.0) for yi, ai in zip(comps, anchors)]
        return TangentVector(y, parts[0] if len(parts) == 1 else tuple(parts))

    return GameSpec(
        name="potential_distance",
        manifolds=manifolds,
        losses=(potential,) * len(manifolds),
        gradient_fn=gradient,
        mu=1.0,
        lipschitz=_field_smoothness(manifolds, region_radius),
        center=center,
        nash=center,
    )


def _log_inner_gradient(anchor: Point, y: Point, w_value) -> object:
    """Riemannian gradient at ``y`` of h(y) = <log_anchor(y), w>_anchor.

    In flat space this is the constant w. On curved factors the derivative of
    the log map shrinks the component orthogonal to the connecting geodesic,
    so w is corrected before being carried to y.
    """
    m = anchor.manifold
    if isinstance(m, Euclidean):
        return np.array(w_value, dtype=float)
    u = log_map(anchor, y)
    r = tangent_norm(u)
    if isinstance(m, Hyperboloid):
        if r < 1e-12:
            return transport(anchor, y, TangentVector(anchor, w_value)).value
        u_hat = coords_scale(u.value, 1.0 / r)
        par = m.inner(anchor.value, w_value, u_hat)
        corrected = coords_add(
            coords_scale(u_hat, par),
            coords_scale(coords_add(w_value, coords_scale(u_hat, -par)), r / math.sinh(r)),
        )
        return transport(anchor, y, TangentVector(anchor, corrected)).value
    if isinstance(m, SPD):
        a = anchor.value
        dec_a = linalg.sym_eigen(a)
        q, vals = dec_a.eigenvectors, dec_a.eigenvalues
        isq = (q * (1.0 / np.sqrt(vals))) @ q.T
        mid = isq @ y.value @ isq
        mid = 0.5 * (mid + mid.T)
        dec = linalg.sym_eigen(mid)
        lam = dec.eigenvalues
        qm = dec.eigenvectors
        # divided differences of log on the spectrum (Loewner matrix)
        li, lj = np.meshgrid(lam, lam, indexing="ij")
        with np.errstate(divide="ignore", invalid="ignore"):
            loewner = (np.log(li) - np.log(lj)) / (li - lj)
        # near-coincident eigenvalues: the divided difference of log tends to
        # the reciprocal logarithmic mean, which the geometric mean matches to
        # second order, so switch before cancellation bites
        same = np.isclose(li, lj, rtol=1e-6, atol=0.0)
        geo = 1.0 / np.sqrt(np.outer(lam, lam))
        loewner[same] = geo[same]
        w_tilde = isq @ w_value @ isq
        dlog = qm @ (loewner * (qm.T @ w_tilde @ qm)) @ qm.T
        grad_flat = isq @ dlog @ isq
        out = y.value @ (0.5 * (grad_flat + grad_flat.T)) @ y.value
        return 0.5 * (out + out.T)
    raise ValueError(f"coupled gradients unsupported on {type(m).__name__}")


def make_min_max_distance_game(
    a: Point,
    b: Point,
    coupling: float,
    region_radius: float = DEFAULT_SAMPLING_RADIUS,
    certify_pairs: int = 200,
    certify_seed: int = 0,
) -> GameSpec:
    """Two-player distance game with a bilinear anchor-centered coupling.

    Player losses are l1 = d(y1, a)^2 / 2 + coupling * c(y1, y2) and
    l2 = d(y2, b)^2 / 2 + coupling * c(y1, y2), where on Euclidean factors
    c = (y1 - a) . (y2 - b) and on curved factors the log vectors are paired
    in the tangent space at ``a`` after transporting log_b(y2) over. The
    coupling vanishes at (a, b), so the Nash equilibrium stays at the anchors
    for every admissible coupling strength.
    """
    if abs(coupling) >= 1.0:
        raise CouplingTooLarge(f"|coupling| must be < 1, got {coupling}")
    a = _validated_anchor(a)
    b = _validated_anchor(b)
    if coupling != 0.0 and a.manifold != b.manifold:
        raise InvalidAnchor("coupled players must share one manifold type and size")
    manifolds = (a.manifold, b.manifold)
    joint = Product(manifolds)
    center = Point(joint, (a.value, b.value))
    euclidean = isinstance(a.manifold, Euclidean) and isinstance(b.manifold, Euclidean)

    def _comps(y: Point) -> tuple[Point, Point]:
        return Point(manifolds[0], y.value[0]), Point(manifolds[1], y.value[1])

    if euclidean or coupling == 0.0:

        def coupling_term(y1: Point, y2: Point) -> float:
            if coupling == 0.0:
                return 0.0
            return float(np.dot(y1.value - a.value, y2.value - b.value))

    else:

        def coupling_term(y1: Point, y2: Point) -> float:
            w = transport(b, a, log_map(b, y2))
            return inner(a, log_map(a, y1), w)

    def loss1(y: Point) -> float:
        y1, y2 = _comps(y)
        return 0.5 * dist(y1, a) ** 2 + coupling * coupling_term(y1, y2)

    def loss2(y: Point) -> float:
        y1, y2 = _comps(y)
        return 0.5 * dist(y2, b) ** 2 + coupling * coupling_term(y1, y2)

    def gradient(y: Point) -> TangentVector:
        y1, y2 = _comps(y)
        g1 = coords_scale(log_map(y1, a).value, -1.0)
        g2 = coords_scale(log_map(y2, b).value, -1.0)
        if coupling != 0.0:
            if euclidean:
                g1 = coords_add(g1, coords_scale(y2.value - b.value, coupling))
                g2 = coords_add(g2, coords_scale(y1.value - a.value, coupling))
            else:
                w2 = transport(b, a, log_map(b, y2)).value
                g1 = coords_add(g1, coords_scale(_log_inner_gradient(a, y1, w2), coupling))
                w1 = transport(a, b, log_map(a, y1)).value
                g2 = coords_add(g2, coords_scale(_log_inner_gradient(b, y2, w1), coupling))
        return TangentVector(y, (g1, g2))

    if euclidean:
        mu = 1.0 - abs(coupling)
        lipschitz = 1.0 + abs(coupling)
    elif coupling == 0.0:
        mu = 1.0
        lipschitz = _field_smoothness(manifolds, region_radius)
    else:
        mu, lipschitz = 0.0, 1.0  # provisional, replaced by certification below

    game = GameSpec(
        name="min_max_distance",
        manifolds=manifolds,
        losses=(loss1, loss2),
        gradient_fn=gradient,
        mu=mu,
        lipschitz=lipschitz,
        center=center,
        nash=center,
    )
    if not euclidean and coupling != 0.0:
        report = check_monotonicity(game, certify_pairs, certify_seed, radius=region_radius)
        if report.min_ratio <= 0.0:
            raise CouplingTooLarge(
                f"coupling {coupling} loses strong monotonicity on the sampled region "
                f"(min ratio {report.min_ratio:.3e})"
            )
        game.mu = 0.95 * report.min_ratio
        game.lipschitz = 1.05 * report.max_lipschitz_ratio
    return game


def make_robust_karcher_game(
    anchors: Sequence[Point],
    gamma: float,
    region_radius: float = 1.0,
    certify_pairs: int = 120,
    certify_seed: int = 0,
    mu: float | None = None,
    lipschitz: float | None = None,
) -> GameSpec:
    """Robust matrix-mean game: one minimizing player X against N maximizing
    players Y_i, with payoff sum_i d(X, Y_i)^2 - gamma * sum_i d(Y_i, A_i)^2.

    Requires gamma > 1 so that each maximizer's objective stays strongly
    concave near the anchors; the claimed (mu, L) are certified by
    monotonicity sampling at construction unless given explicitly.
    """
    if gamma <= 1.0:
        raise InvalidGamma(f"gamma must exceed 1, got {gamma}")
    anchors = tuple(_validated_anchor(a) for a in anchors)
    if not anchors:
        raise InvalidAnchor("need at least one anchor")
    spd = anchors[0].manifold
    if not isinstance(spd, SPD) or any(a.manifold != spd for a in anchors):
        raise InvalidAnchor("anchors must all live on one SPD manifold")
    n_players = 1 + len(anchors)
    manifolds = (spd,) * n_players
    joint = Product(manifolds)

    def payoff(y: Point) -> float:
        x = Point(spd, y.value[0])
        ys = [Point(spd, v) for v in y.value[1:]]
        total = 0.0
        for yi, ai in zip(ys, anchors):
            total += dist(x, yi) ** 2 - gamma * dist(yi, ai) ** 2
        return total

    def loss_min(y: Point) -> float:
        return payoff(y)

    def loss_max(y: Point) -> float:
        return -payoff(y)

    def gradient(y: Point) -> TangentVector:
        x = Point(spd, y.value[0])
        ys = [Point(spd, v) for v in y.value[1:]]
        gx = spd.zero(x.value)
        parts = []
        for yi, ai in zip(ys, anchors):
            gx = coords_add(gx, coords_scale(log_map(x, yi).value, -2.0))
            gi = coords_add(
                coords_scale(log_map(yi, x).value, 2.0),
                coords_scale(log_map(yi, ai).value, -2.0 * gamma),
            )
            parts.append(gi)
        return TangentVector(y, (gx, *parts))

    # short fixed-point run toward the anchors' mean, used as the sampling center
    x0 = anchors[0]
    for _ in range(30):
        step = spd.zero(x0.value)
        for ai in anchors:
            step = coords_add(step, log_map(x0, ai).value)
        step = coords_scale(step, 1.0 / len(anchors))
        x0 = exp_map(x0, TangentVector(x0, step))
    center = Point(joint, (x0.value, *(a.value for a in anchors)))

    game = GameSpec(
        name="robust_karcher",
        manifolds=manifolds,
        losses=(loss_min,) + (loss_max,) * len(anchors),
        gradient_fn=gradient,
        mu=0.0,
        lipschitz=1.0,
        center=center,
        nash=None,
    )
    if mu is not None and lipschitz is not None:
        game.mu, game.lipschitz = mu, lipschitz
        return game
    report = check_monotonicity(game, certify_pairs, certify_seed, radius=region_radius)
    if report.min_ratio <= 0.0:
        raise InvalidGamma(
            f"gamma={gamma} does not give strong monotonicity on the sampled region "
            f"(min ratio {report.min_ratio:.3e})"
        )
    game.mu = 0.95 * report.min_ratio
    game.lipschitz = 1.05 * report.max_lipschitz_ratio
    return game
