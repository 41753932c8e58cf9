import math

import numpy as np
import pytest

from riegames.errors import (
    CouplingTooLarge,
    EvaluationFailure,
    InvalidAnchor,
    InvalidGamma,
    NonPositiveRadius,
)
from riegames.games import (
    GameSpec,
    StochasticOracle,
    check_monotonicity,
    gap_bound,
    gradient_norm,
    joint_gradient,
    make_min_max_distance_game,
    make_potential_distance_game,
    make_robust_karcher_game,
    sample_gradient,
    total_gap_bound,
)
from riegames.manifolds import (
    SPD,
    Euclidean,
    Hyperboloid,
    Point,
    TangentVector,
    dist,
    exp_map,
    inner,
    log_map,
    point,
    random_point,
    random_tangent,
    tangent_norm,
)
from riegames.verify import finite_diff_directional, karcher_midpoint_oracle


def euclidean_quadratic(dim=2, anchor=None):
    e = Euclidean(dim)
    a = point(e, np.zeros(dim) if anchor is None else np.asarray(anchor, float))
    return make_potential_distance_game([a])


# --- joint gradient and proximity bounds -------------------------------------


def test_potential_gradient_at_anchors_is_zero():
    e = Euclidean(2)
    anchors = [point(e, np.array([1.0, -2.0])), point(e, np.array([0.5, 0.0]))]
    game = make_potential_distance_game(anchors)
    assert gradient_norm(game, game.nash) <= 1e-10


def test_euclidean_one_player_field():
    game = euclidean_quadratic()
    y = point(Euclidean(2), np.array([2.0, 0.0]))
    g = joint_gradient(game, y)
    assert np.allclose(g.value, [2.0, 0.0])
    y2 = point(Euclidean(2), np.array([3.0, 4.0]))
    assert abs(gradient_norm(game, y2) - 5.0) < 1e-12


def test_spd_one_player_gradient_matches_closed_form():
    spd = SPD(2)
    a = point(spd, np.diag([math.e, 1.0]))
    game = make_potential_distance_game([a])
    i2 = point(spd, np.eye(2))
    g = joint_gradient(game, i2)
    assert np.allclose(g.value, -np.diag([1.0, 0.0]), atol=1e-10)
    # gradient norm equals the distance for the -log field
    a2 = point(spd, np.diag([4.0, 1.0]))
    game2 = make_potential_distance_game([a2])
    assert abs(gradient_norm(game2, i2) - dist(i2, a2)) < 1e-10
    assert abs(gradient_norm(game2, i2) - math.log(4.0)) < 1e-10


def test_gap_bounds_arithmetic():
    game = euclidean_quadratic()
    y = point(Euclidean(2), np.array([3.0, 4.0]))  # ||F|| = 5
    assert abs(gap_bound(game, y, 2.0) - 10.0) < 1e-12
    assert gap_bound(game, game.nash, 1.0) <= 1e-10
    with pytest.raises(NonPositiveRadius):
        gap_bound(game, y, 0.0)
    with pytest.raises(NonPositiveRadius):
        total_gap_bound(game, y, -1.0)


def test_total_gap_bound_scaling():
    e = Euclidean(2)
    anchors = [point(e, np.zeros(2)) for _ in range(4)]
    game = make_potential_distance_game(anchors)
    y = Point(game.joint, tuple(np.array([3.0, 0.0]) / 2.0 for _ in range(4)))
    gn = gradient_norm(game, y)
    assert abs(total_gap_bound(game, y, 1.0) - math.sqrt(4.0) * gn) < 1e-12
    one = euclidean_quadratic()
    y1 = point(e, np.array([1.0, 1.0]))
    assert total_gap_bound(one, y1, 1.0) == gap_bound(one, y1, 1.0)


def brute_gap_euclidean(game, y, radius):
    """Analytic ball maximization of <F(y), -log_y y'> for flat games."""
    g = joint_gradient(game, y)
    gn = tangent_norm(g)
    if gn == 0.0:
        return 0.0
    best = exp_map(y, (-radius / gn) * g)
    return inner(y, g, -1.0 * log_map(y, best))


def test_brute_force_gap_matches_bound(rng):
    game = euclidean_quadratic(3)
    e = Euclidean(3)
    for _ in range(50):
        y = point(e, rng.uniform(-2.0, 2.0, size=3))
        assert abs(brute_gap_euclidean(game, y, 1.0) - gap_bound(game, y, 1.0)) <= 1e-8


def minmax_player_minimizers(game, y, a_val, b_val, lam, radius):
    """Per-player analytic minimization of the coupled quadratic losses over
    the radius ball; returns the two ball-constrained minimizers."""
    y1, y2 = y.value
    targets = [a_val - lam * (y2 - b_val), b_val - lam * (y1 - a_val)]
    out = []
    for yi, t in zip((y1, y2), targets):
        step = t - yi
        nrm = np.linalg.norm(step)
        out.append(t if nrm <= radius else yi + radius * step / nrm)
    return out


def test_total_gap_brute_force_ordering(rng):
    lam = 0.5
    e = Euclidean(2)
    a = point(e, np.array([0.3, -0.2]))
    b = point(e, np.array([-0.5, 0.1]))
    game = make_min_max_distance_game(a, b, lam)
    radius = 1.0
    for _ in range(50):
        y = Point(game.joint, (rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2)))
        m1, m2 = minmax_player_minimizers(game, y, a.value, b.value, lam, radius)
        tgap = (game.losses[0](y) - game.losses[0](Point(game.joint, (m1, y.value[1])))) + (
            game.losses[1](y) - game.losses[1](Point(game.joint, (y.value[0], m2)))
        )
        bound = total_gap_bound(game, y, radius)
        assert tgap <= bound + 1e-9


# --- monotonicity checks ------------------------------------------------------


def test_quadratic_monotonicity_is_exactly_one():
    game = euclidean_quadratic()
    report = check_monotonicity(game, 40, rng_seed=1)
    assert abs(report.min_ratio - 1.0) < 1e-9
    assert abs(report.max_lipschitz_ratio - 1.0) < 1e-9


def test_potential_distance_monotonicity_euclidean():
    e = Euclidean(2)
    game = make_potential_distance_game([point(e, np.ones(2)), point(e, -np.ones(2))])
    report = check_monotonicity(game, 40, rng_seed=2)
    assert report.min_ratio >= 1.0 - 1e-9
    assert report.max_lipschitz_ratio <= 1.0 + 1e-9


def test_minmax_hyperbolic_monotonicity_meets_claim():
    h = Hyperboloid(2)
    rng = np.random.default_rng(3)
    a = random_point(h, rng, radius=0.5)
    b = random_point(h, rng, radius=0.5)
    game = make_min_max_distance_game(a, b, 0.3, certify_seed=11)
    report = check_monotonicity(game, 80, rng_seed=99)
    assert report.min_ratio >= game.mu - 1e-6
    assert report.max_lipschitz_ratio <= game.lipschitz + 1e-6


def test_minmax_euclidean_symmetric_part_eigenvalues():
    lam = 0.5
    e = Euclidean(2)
    game = make_min_max_distance_game(point(e, np.zeros(2)), point(e, np.ones(2)), lam)
    report = check_monotonicity(game, 100, rng_seed=4)
    # the field Jacobian is symmetric with eigenvalues 1 - lam and 1 + lam
    assert report.min_ratio >= 1.0 - lam - 1e-6
    assert report.min_ratio <= 1.0 + 1e-9
    assert report.max_lipschitz_ratio <= 1.0 + lam + 1e-6


def test_check_monotonicity_rejects_bad_args():
    game = euclidean_quadratic()
    with pytest.raises(ValueError):
        check_monotonicity(game, 0, rng_seed=0)


# --- factories ----------------------------------------------------------------


def test_factory_validation_errors():
    e = Euclidean(2)
    h = Hyperboloid(2)
    with pytest.raises(InvalidAnchor):
        make_potential_distance_game([])
    with pytest.raises(InvalidAnchor):
        make_potential_distance_game([Point(h, np.array([0.5, 0.0, 0.0]))])
    a = point(e, np.zeros(2))
    b = point(e, np.ones(2))
    with pytest.raises(CouplingTooLarge):
        make_min_max_distance_game(a, b, 1.0)
    with pytest.raises(InvalidGamma):
        make_robust_karcher_game([point(SPD(2), np.eye(2))], gamma=1.0)
    with pytest.raises(InvalidAnchor):
        make_robust_karcher_game([a], gamma=4.0)
    with pytest.raises(InvalidAnchor):
        make_min_max_distance_game(a, point(h, np.array([1.0, 0.0, 0.0])), 0.5)


def test_minmax_decoupled_nash():
    e = Euclidean(2)
    a = point(e, np.array([2.0, 0.0]))
    b = point(e, np.array([0.0, -1.0]))
    game = make_min_max_distance_game(a, b, 0.0)
    assert gradient_norm(game, game.nash) == 0.0
    assert game.mu == 1.0


def test_minmax_coupled_nash_solves_linear_system():
    lam = 0.5
    e = Euclidean(2)
    a = point(e, np.array([1.0, 2.0]))
    b = point(e, np.array([-1.0, 0.5]))
    game = make_min_max_distance_game(a, b, lam)
    # F = 0 is the 2x2 block system [[I, lam I], [lam I, I]] (y - (a, b)) = 0
    block = np.block([[np.eye(2), lam * np.eye(2)], [lam * np.eye(2), np.eye(2)]])
    rhs = np.concatenate([a.value, b.value])
    sol = np.linalg.solve(block, block @ rhs)
    nash = game.nash
    assert np.allclose(np.concatenate([nash.value[0], nash.value[1]]), sol, atol=1e-12)
    assert gradient_norm(game, nash) <= 1e-12


def test_karcher_all_anchors_equal_gives_zero_field():
    spd = SPD(2)
    x = point(spd, np.diag([2.0, 0.5]))
    game = make_robust_karcher_game([x], gamma=4.0, mu=1.0, lipschitz=10.0)
    profile = Point(game.joint, (x.value, x.value))
    assert gradient_norm(game, profile) <= 1e-10


def test_karcher_x_gradient_vanishes_at_midpoint(rng):
    spd = SPD(3)
    from conftest import random_spd

    a_val = random_spd(rng, 3, 0.5, 2.0)
    b_val = random_spd(rng, 3, 0.5, 2.0)
    a = point(spd, a_val)
    b = point(spd, b_val)
    game = make_robust_karcher_game([a, b], gamma=4.0, mu=1.0, lipschitz=20.0)
    mid = karcher_midpoint_oracle(a_val, b_val)
    profile = Point(game.joint, (mid, a_val, b_val))
    g = joint_gradient(game, profile)
    x_part = TangentVector(point(spd, mid), g.value[0])
    assert tangent_norm(x_part) <= 1e-6


def test_karcher_certified_monotone():
    spd = SPD(2)
    rng = np.random.default_rng(7)
    anchors = [random_point(spd, rng, radius=0.4) for _ in range(2)]
    game = make_robust_karcher_game(anchors, gamma=4.0, certify_pairs=100, certify_seed=5)
    assert game.mu > 0.0
    report = check_monotonicity(game, 100, rng_seed=17, radius=1.0)
    assert report.min_ratio >= game.mu - 1e-6


def test_evaluation_failure_wrapping():
    e = Euclidean(2)

    def bad_gradient(y):
        raise RuntimeError("boom")

    game = GameSpec(
        name="broken",
        manifolds=(e,),
        losses=(lambda y: 0.0,),
        gradient_fn=bad_gradient,
        mu=0.0,
        lipschitz=1.0,
        center=point(e, np.zeros(2)),
    )
    with pytest.raises(EvaluationFailure):
        joint_gradient(game, point(e, np.zeros(2)))


# --- stochastic oracle --------------------------------------------------------


def test_oracle_exact_when_sigma_zero():
    game = euclidean_quadratic()
    oracle = StochasticOracle(game, 0.0, seed=0)
    y = point(Euclidean(2), np.array([1.0, 1.0]))
    g = sample_gradient(oracle, y, 5)
    assert np.array_equal(g.value, joint_gradient(game, y).value)
    assert oracle.query_count == 5


def test_oracle_query_counting_and_spawn():
    game = euclidean_quadratic()
    oracle = StochasticOracle(game, 1.0, seed=0)
    y = point(Euclidean(2), np.array([1.0, 1.0]))
    sample_gradient(oracle, y, 3)
    sample_gradient(oracle, y, 7)
    assert oracle.query_count == 10
    clone = oracle.spawn(123)
    assert clone.query_count == 0 and clone.sigma2 == 1.0


def test_oracle_unbiased_mean():
    game = euclidean_quadratic()
    y = point(Euclidean(2), np.array([3.0, 4.0]))
    f = joint_gradient(game, y).value
    oracle = StochasticOracle(game, 1.0, seed=42)
    m = 100_000
    g = sample_gradient(oracle, y, m)
    # mean of m draws has per-coordinate deviation ~ sigma/sqrt(m); allow 4x
    assert np.linalg.norm(g.value - f) <= 4.0 / math.sqrt(m) * 3.0


def test_oracle_variance_matches_sigma2():
    game = euclidean_quadratic()
    y = point(Euclidean(2), np.array([3.0, 4.0]))
    f = joint_gradient(game, y).value
    sigma2 = 0.7
    oracle = StochasticOracle(game, sigma2, seed=9)
    draws = 100_000
    sq = np.empty(draws)
    for i in range(draws):
        g = sample_gradient(oracle, y, 1)
        diff = g.value - f
        sq[i] = float(diff @ diff)
    mean_sq = float(sq.mean())
    assert abs(mean_sq - sigma2) <= 0.1 * sigma2


def test_oracle_noise_on_spd_is_tangent_and_unbiased():
    spd = SPD(2)
    a = point(spd, np.diag([2.0, 1.0]))
    game = make_potential_distance_game([a])
    y = point(spd, np.eye(2))
    f = joint_gradient(game, y).value
    oracle = StochasticOracle(game, 0.5, seed=3)
    acc = np.zeros((2, 2))
    n = 4000
    for _ in range(n):
        g = sample_gradient(oracle, y, 1)
        assert np.allclose(g.value, g.value.T)  # symmetric, hence tangent
        acc += g.value - f
    assert np.linalg.norm(acc / n) <= 5.0 * math.sqrt(0.5 / n)


def test_oracle_determinism():
    game = euclidean_quadratic()
    y = point(Euclidean(2), np.array([1.0, 2.0]))
    a = sample_gradient(StochasticOracle(game, 1.0, seed=5), y, 4).value
    b = sample_gradient(StochasticOracle(game, 1.0, seed=5), y, 4).value
    assert np.array_equal(a, b)


# --- finite-difference gradient correctness (spec invariant form) -------------


def directional_fd_tolerance(value: float) -> float:
    return max(1e-4, 1e-3 * abs(value))


def orthonormal_tangent_basis(y, rng):
    """Gram-Schmidt under the Riemannian metric over projected ambient draws."""
    m = y.manifold
    basis = []
    attempts = 0
    while len(basis) < m.dim and attempts < 20 * m.dim:
        attempts += 1
        v = random_tangent(y, rng, scale=1.0)
        for e in basis:
            v = v - inner(y, v, e) * e
        nrm = tangent_norm(v)
        if nrm > 1e-8:
            basis.append((1.0 / nrm) * v)
    assert len(basis) == m.dim
    return basis


def test_karcher_gradient_norm_matches_fd_oracle(rng):
    spd = SPD(2)
    anchors = [random_point(spd, rng, radius=0.4) for _ in range(2)]
    game = make_robust_karcher_game(anchors, gamma=4.0, mu=1.0, lipschitz=20.0)
    for _ in range(3):
        y = random_point(game.joint, rng, center=game.center, radius=0.8)
        basis = orthonormal_tangent_basis(y, rng)
        # reconstruct ||F|| from per-player directional derivatives: component i
        # of the field is the gradient of player i's own loss
        total = 0.0
        for e in basis:
            for i in range(game.players):
                masked = tuple(
                    part if j == i else np.zeros_like(np.asarray(part))
                    for j, part in enumerate(e.value)
                )
                comp = finite_diff_directional(
                    game.losses[i], y, TangentVector(y, masked), 1e-4
                )
                total += comp * comp
        fd_norm = math.sqrt(total)
        exact = gradient_norm(game, y)
        assert abs(fd_norm - exact) <= 1e-5 * max(exact, 1.0)


def test_gradient_one_sided_quotient_invariant(rng):
    spd = SPD(2)
    games = [
        euclidean_quadratic(),
        make_potential_distance_game([random_point(spd, rng, radius=0.5)]),
    ]
    t = 1e-5
    for game in games:
        for _ in range(20):
            y = random_point(game.joint, rng, center=game.center, radius=1.0)
            v = random_tangent(y, rng, scale=1.0)
            g = joint_gradient(game, y)
            quotient = (game.losses[0](exp_map(y, t * v)) - game.losses[0](y)) / t
            analytic = inner(y, g, v)
            assert abs(quotient - analytic) <= directional_fd_tolerance(analytic)


@pytest.mark.parametrize("factory", ["potential_spd", "potential_hyp", "minmax_spd", "karcher"])
def test_gradients_match_finite_differences(factory, rng):
    if factory == "potential_spd":
        spd = SPD(3)
        anchors = [random_point(spd, rng, radius=0.6) for _ in range(2)]
        game = make_potential_distance_game(anchors)
    elif factory == "potential_hyp":
        h = Hyperboloid(3)
        anchors = [random_point(h, rng, radius=0.6) for _ in range(2)]
        game = make_potential_distance_game(anchors)
    elif factory == "minmax_spd":
        spd = SPD(2)
        a = random_point(spd, rng, radius=0.5)
        b = random_point(spd, rng, radius=0.5)
        game = make_min_max_distance_game(a, b, 0.4, certify_seed=2)
    else:
        spd = SPD(2)
        anchors = [random_point(spd, rng, radius=0.4) for _ in range(2)]
        game = make_robust_karcher_game(anchors, gamma=4.0, mu=1.0, lipschitz=20.0)

    for _ in range(12):
        y = random_point(game.joint, rng, center=game.center, radius=1.0)
        g = joint_gradient(game, y)
        for i, loss in enumerate(game.losses):
            v = random_tangent(y, rng, scale=1.0)
            if game.players > 1:
                masked = tuple(
                    part if j == i else np.zeros_like(np.asarray(part))
                    for j, part in enumerate(v.value)
                )
                v = TangentVector(y, masked)
                nrm = tangent_norm(v)
                if nrm < 1e-9:
                    continue
                v = (1.0 / nrm) * v
            fd = finite_diff_directional(loss, y, v, 1e-5)
            analytic = inner(y, g, v)
            assert abs(fd - analytic) <= directional_fd_tolerance(analytic)
