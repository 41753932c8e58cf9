"""Geometry kernel: inner products, exp/log maps, distances, parallel transport.

Four geometries are implemented, all with nonpositive curvature and unique
geodesics: Euclidean space, symmetric positive definite matrices with the
affine-invariant metric, the hyperboloid model of hyperbolic space, and
finite products of these. Points and tangent vectors are stored in ambient
coordinates (a flat array, an ``(n, n)`` symmetric array, an ``(n+1)``-array,
or a tuple of factor coordinates respectively).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import linalg
from .errors import (
    BasePointMismatch,
    DimensionMismatch,
    InvalidTangent,
    NegativeDistance,
    NotPositiveDefinite,
)

# below this tangent norm exp_map returns the base point; below this distance
# log_map returns the zero vector (avoids 0/0 in the closed forms)
SMALL_NORM = 1e-14
POINT_TOL = 1e-9


def _coords_equal(a, b) -> bool:
    if isinstance(a, tuple) or isinstance(b, tuple):
        return (
            isinstance(a, tuple)
            and isinstance(b, tuple)
            and len(a) == len(b)
            and all(_coords_equal(x, y) for x, y in zip(a, b))
        )
    return np.array_equal(a, b)


def _coords_map(fn, *cs):
    if isinstance(cs[0], tuple):
        return tuple(_coords_map(fn, *parts) for parts in zip(*cs))
    return fn(*cs)


def coords_add(a, b):
    return _coords_map(lambda x, y: x + y, a, b)


def coords_sub(a, b):
    return _coords_map(lambda x, y: x - y, a, b)


def coords_scale(a, s: float):
    return _coords_map(lambda x: s * x, a)


def _coords_finite(a) -> bool:
    if isinstance(a, tuple):
        return all(_coords_finite(x) for x in a)
    return bool(np.all(np.isfinite(a)))


class Manifold:
    """Base interface; subclasses operate on raw ambient coordinates."""

    curvature_lower_bound: float = 0.0

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def origin(self):
        raise NotImplementedError

    def check_point(self, x) -> None:
        raise NotImplementedError

    def check_tangent(self, x, v) -> None:
        raise NotImplementedError

    def inner(self, x, u, v) -> float:
        raise NotImplementedError

    def exp(self, x, v):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def distance(self, x, y) -> float:
        raise NotImplementedError

    def transport(self, x, y, v):
        raise NotImplementedError

    def project(self, x, w):
        raise NotImplementedError

    def zero(self, x):
        return coords_scale(x, 0.0)

    def ambient_normal(self, x, rng):
        raise NotImplementedError

    def metric_at(self, x):
        """Inner product closure at ``x``; overridden where caching pays off."""
        return lambda u, v: self.inner(x, u, v)

    def norm(self, x, v) -> float:
        return math.sqrt(max(self.inner(x, v, v), 0.0))


@dataclass(frozen=True)
class Euclidean(Manifold):
    n: int

    curvature_lower_bound = 0.0

    @property
    def dim(self) -> int:
        return self.n

    def origin(self):
        return np.zeros(self.n)

    def _check_shape(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected shape ({self.n},), got {x.shape}")
        return x

    def check_point(self, x) -> None:
        self._check_shape(x)

    def check_tangent(self, x, v) -> None:
        self._check_shape(v)

    def inner(self, x, u, v) -> float:
        return float(np.dot(u, v))

    def exp(self, x, v):
        return x + v

    def log(self, x, y):
        return y - x

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(y - x))

    def transport(self, x, y, v):
        return np.array(v, dtype=float)

    def project(self, x, w):
        return self._check_shape(w)

    def ambient_normal(self, x, rng):
        return rng.standard_normal(self.n)


@dataclass(frozen=True)
class SPD(Manifold):
    """Symmetric positive definite matrices with the affine-invariant metric.

    exp_X(V) = X^(1/2) expm(X^(-1/2) V X^(-1/2)) X^(1/2)
    log_X(Y) = X^(1/2) logm(X^(-1/2) Y X^(-1/2)) X^(1/2)
    d(X, Y)  = ||logm(X^(-1/2) Y X^(-1/2))||_F
    transport X -> Y: V -> E V E^T with E = (Y X^(-1))^(1/2), computed
    spectrally as E = X^(1/2) (X^(-1/2) Y X^(-1/2))^(1/2) X^(-1/2).
    """

    n: int

    # metadata for reporting only; solvers never read it
    curvature_lower_bound = -0.5

    @property
    def dim(self) -> int:
        return self.n * (self.n + 1) // 2

    def origin(self):
        return np.eye(self.n)

    def _check_shape(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.n):
            raise DimensionMismatch(f"expected shape ({self.n}, {self.n}), got {x.shape}")
        return x

    def check_point(self, x) -> None:
        x = self._check_shape(x)
        dec = linalg.sym_eigen(x)
        if float(dec.eigenvalues.min()) <= linalg.EIGENVALUE_FLOOR:
            raise NotPositiveDefinite(f"eigenvalue {dec.eigenvalues.min():.3e} not positive")

    def check_tangent(self, x, v) -> None:
        v = self._check_shape(v)
        linalg.check_symmetric(v)

    def _roots(self, x):
        dec = linalg.sym_eigen(x)
        vals = dec.eigenvalues
        if float(vals.min()) <= linalg.EIGENVALUE_FLOOR:
            raise NotPositiveDefinite(f"base point eigenvalue {vals.min():.3e} not positive")
        q = dec.eigenvectors
        sq = (q * np.sqrt(vals)) @ q.T
        isq = (q * (1.0 / np.sqrt(vals))) @ q.T
        return sq, isq

    def inner(self, x, u, v) -> float:
        _, isq = self._roots(x)
        return linalg.frobenius_inner(isq @ u @ isq, isq @ v @ isq)

    def metric_at(self, x):
        _, isq = self._roots(x)

        def ip(u, v):
            return linalg.frobenius_inner(isq @ u @ isq, isq @ v @ isq)

        return ip

    def exp(self, x, v):
        sq, isq = self._roots(x)
        inner_mat = isq @ v @ isq
        if float(np.abs(inner_mat).max(initial=0.0)) < SMALL_NORM:
            return np.array(x, dtype=float)
        out = sq @ linalg.sym_func(0.5 * (inner_mat + inner_mat.T), "exp") @ sq
        return 0.5 * (out + out.T)

    def log(self, x, y):
        sq, isq = self._roots(x)
        mid = isq @ y @ isq
        out = sq @ linalg.sym_func(0.5 * (mid + mid.T), "log") @ sq
        return 0.5 * (out + out.T)

    def distance(self, x, y) -> float:
        _, isq = self._roots(x)
        mid = isq @ y @ isq
        dec = linalg.sym_eigen(0.5 * (mid + mid.T))
        if float(dec.eigenvalues.min()) <= linalg.EIGENVALUE_FLOOR:
            raise NotPositiveDefinite("second argument is not positive definite")
        return float(np.linalg.norm(np.log(dec.eigenvalues)))

    def transport(self, x, y, v):
        sq, isq = self._roots(x)
        mid = isq @ y @ isq
        e = sq @ linalg.sym_func(0.5 * (mid + mid.T), "power", exponent=0.5) @ isq
        out = e @ v @ e.T
        return 0.5 * (out + out.T)

    def project(self, x, w):
        w = self._check_shape(w)
        return 0.5 * (w + w.T)

    def ambient_normal(self, x, rng):
        return rng.standard_normal((self.n, self.n))


def _minkowski(u, v) -> float:
    return float(-u[0] * v[0] + np.dot(u[1:], v[1:]))


@dataclass(frozen=True)
class Hyperboloid(Manifold):
    """Upper sheet of the unit hyperboloid in Minkowski space (curvature -1).

    Points satisfy <x, x>_L = -1 with x0 > 0; tangents satisfy <x, v>_L = 0.
    exp_x(v) = cosh(|v|) x + sinh(|v|) v / |v|
    log_x(y) = (d / sinh d) (y - cosh(d) x) with d = arccosh(-<x, y>_L)
    transport x -> y: v -> v + <y, v>_L / (1 - <x, y>_L) * (x + y)
    """

    n: int

    curvature_lower_bound = -1.0

    @property
    def dim(self) -> int:
        return self.n

    def origin(self):
        x = np.zeros(self.n + 1)
        x[0] = 1.0
        return x

    def _check_shape(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n + 1,):
            raise DimensionMismatch(f"expected shape ({self.n + 1},), got {x.shape}")
        return x

    def check_point(self, x) -> None:
        x = self._check_shape(x)
        if abs(_minkowski(x, x) + 1.0) > POINT_TOL or x[0] <= 0.0:
            raise InvalidTangent(f"point off the hyperboloid: <x,x>_L = {_minkowski(x, x):.3e}")

    def check_tangent(self, x, v) -> None:
        v = self._check_shape(v)
        if abs(_minkowski(x, v)) > POINT_TOL:
            raise InvalidTangent(f"<x, v>_L = {_minkowski(x, v):.3e} not within {POINT_TOL:.0e}")

    def inner(self, x, u, v) -> float:
        return _minkowski(u, v)

    def _renormalize(self, x):
        return x / math.sqrt(max(-_minkowski(x, x), SMALL_NORM))

    def exp(self, x, v):
        nrm = math.sqrt(max(_minkowski(v, v), 0.0))
        if nrm < SMALL_NORM:
            return np.array(x, dtype=float)
        out = math.cosh(nrm) * x + (math.sinh(nrm) / nrm) * v
        return self._renormalize(out)

    def log(self, x, y):
        alpha = max(-_minkowski(x, y), 1.0)
        d = math.acosh(alpha)
        if d < SMALL_NORM:
            return np.zeros_like(x)
        v = (d / math.sinh(d)) * (y - alpha * x)
        return self.project(x, v)

    def distance(self, x, y) -> float:
        return math.acosh(max(-_minkowski(x, y), 1.0))

    def transport(self, x, y, v):
        alpha = -_minkowski(x, y)
        out = v + (_minkowski(y, v) / (1.0 + alpha)) * (x + y)
        return self.project(y, out)

    def project(self, x, w):
        w = self._check_shape(w)
        return w + _minkowski(x, w) * x

    def ambient_normal(self, x, rng):
        return rng.standard_normal(self.n + 1)


@dataclass(frozen=True)
class Product(Manifold):
    """Finite product manifold; coordinates are tuples of factor coordinates."""

    factors: tuple[Manifold, ...]

    def __post_init__(self):
        if not self.factors:
            raise DimensionMismatch("a product needs at least one factor")

    @property
    def curvature_lower_bound(self) -> float:  # type: ignore[override]
        return min(f.curvature_lower_bound for f in self.factors)

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    def origin(self):
        return tuple(f.origin() for f in self.factors)

    def _check_tuple(self, x):
        if not isinstance(x, tuple) or len(x) != len(self.factors):
            raise DimensionMismatch(f"expected a tuple of {len(self.factors)} factor coordinates")
        return x

    def check_point(self, x) -> None:
        x = self._check_tuple(x)
        for f, xi in zip(self.factors, x):
            f.check_point(xi)

    def check_tangent(self, x, v) -> None:
        v = self._check_tuple(v)
        for f, xi, vi in zip(self.factors, x, v):
            f.check_tangent(xi, vi)

    def inner(self, x, u, v) -> float:
        return sum(f.inner(xi, ui, vi) for f, xi, ui, vi in zip(self.factors, x, u, v))

    def metric_at(self, x):
        ips = tuple(f.metric_at(xi) for f, xi in zip(self.factors, x))

        def ip(u, v):
            return sum(m(ui, vi) for m, ui, vi in zip(ips, u, v))

        return ip

    def exp(self, x, v):
        return tuple(f.exp(xi, vi) for f, xi, vi in zip(self.factors, x, v))

    def log(self, x, y):
        return tuple(f.log(xi, yi) for f, xi, yi in zip(self.factors, x, y))

    def distance(self, x, y) -> float:
        return math.sqrt(
            sum(f.distance(xi, yi) ** 2 for f, xi, yi in zip(self.factors, x, y))
        )

    def transport(self, x, y, v):
        return tuple(
            f.transport(xi, yi, vi) for f, xi, yi, vi in zip(self.factors, x, y, v)
        )

    def project(self, x, w):
        w = self._check_tuple(w)
        return tuple(f.project(xi, wi) for f, xi, wi in zip(self.factors, x, w))

    def ambient_normal(self, x, rng):
        return tuple(f.ambient_normal(xi, rng) for f, xi in zip(self.factors, x))


@dataclass(frozen=True)
class Point:
    manifold: Manifold
    value: Any


@dataclass(frozen=True)
class TangentVector:
    base: Point
    value: Any

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _require_same_base(self, other)
        return TangentVector(self.base, coords_add(self.value, other.value))

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        _require_same_base(self, other)
        return TangentVector(self.base, coords_sub(self.value, other.value))

    def __mul__(self, s: float) -> "TangentVector":
        return TangentVector(self.base, coords_scale(self.value, float(s)))

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, coords_scale(self.value, -1.0))


def _require_same_base(u: TangentVector, v: TangentVector) -> None:
    if u.base.manifold != v.base.manifold or not _coords_equal(u.base.value, v.base.value):
        raise BasePointMismatch("tangent vectors anchored at different points")


def _require_base(p: Point, v: TangentVector) -> None:
    if v.base.manifold != p.manifold or not _coords_equal(v.base.value, p.value):
        raise BasePointMismatch("tangent vector not anchored at the given point")


def point(manifold: Manifold, value, check: bool = True) -> Point:
    if check:
        manifold.check_point(value)
    return Point(manifold, value)


def tangent(p: Point, value, check: bool = True) -> TangentVector:
    if check:
        p.manifold.check_tangent(p.value, value)
    return TangentVector(p, value)


def zero_tangent(p: Point) -> TangentVector:
    return TangentVector(p, p.manifold.zero(p.value))


def inner(p: Point, u: TangentVector, v: TangentVector) -> float:
    """Riemannian inner product of two tangent vectors at ``p``."""
    try:
        _require_base(p, u)
        _require_base(p, v)
    except BasePointMismatch:
        raise BasePointMismatch("inner() requires u.base == v.base == p") from None
    return p.manifold.inner(p.value, u.value, v.value)


def tangent_norm(v: TangentVector) -> float:
    return v.base.manifold.norm(v.base.value, v.value)


def exp_map(p: Point, v: TangentVector) -> Point:
    """Follow the geodesic from ``p`` with initial velocity ``v`` for unit time."""
    try:
        _require_base(p, v)
    except BasePointMismatch as e:
        raise InvalidTangent(str(e)) from None
    return Point(p.manifold, p.manifold.exp(p.value, v.value))


def log_map(p: Point, q: Point) -> TangentVector:
    """Tangent vector at ``p`` whose exponential is ``q``."""
    if p.manifold != q.manifold:
        raise DimensionMismatch("log_map arguments live on different manifolds")
    if _coords_equal(p.value, q.value):
        return zero_tangent(p)
    return TangentVector(p, p.manifold.log(p.value, q.value))


def dist(p: Point, q: Point) -> float:
    """Geodesic distance; equals the norm of ``log_map(p, q)``."""
    if p.manifold != q.manifold:
        raise DimensionMismatch("dist arguments live on different manifolds")
    return p.manifold.distance(p.value, q.value)


def transport(p: Point, q: Point, v: TangentVector) -> TangentVector:
    """Parallel transport of ``v`` along the geodesic from ``p`` to ``q``."""
    try:
        _require_base(p, v)
    except BasePointMismatch as e:
        raise InvalidTangent(str(e)) from None
    if p.manifold != q.manifold:
        raise DimensionMismatch("transport endpoints live on different manifolds")
    if _coords_equal(p.value, q.value):
        return TangentVector(q, v.value)
    return TangentVector(q, p.manifold.transport(p.value, q.value, v.value))


def project_tangent(p: Point, w) -> TangentVector:
    """Re-stabilize a raw ambient array into the tangent space at ``p``."""
    return TangentVector(p, p.manifold.project(p.value, w))


def curvature_distortion(d: float, c: float) -> float:
    """Distortion factor xi(d, c) = d * sqrt(-c) * coth(d * sqrt(-c)).

    Equals 1 in flat space (c = 0) and in the d -> 0 limit; always >= 1 for
    c < 0 and strictly increasing in d.
    """
    if d < 0.0:
        raise NegativeDistance(f"distance {d} is negative")
    if c > 0.0:
        raise ValueError("curvature bound must be nonpositive")
    x = d * math.sqrt(-c)
    if x < 1e-8:
        return 1.0
    return x / math.tanh(x)


def random_tangent(p: Point, rng, scale: float = 1.0) -> TangentVector:
    """Tangent vector with Riemannian norm ``scale`` in a random direction."""
    m = p.manifold
    raw = m.project(p.value, m.ambient_normal(p.value, rng))
    nrm = m.norm(p.value, raw)
    if nrm < SMALL_NORM:
        return zero_tangent(p)
    return TangentVector(p, coords_scale(raw, scale / nrm))


def random_point(manifold: Manifold, rng, center: Point | None = None, radius: float = 1.0) -> Point:
    """Point sampled in the geodesic ball of the given radius around ``center``."""
    if center is None:
        center = Point(manifold, manifold.origin())
    v = random_tangent(center, rng, scale=radius * float(rng.uniform()))
    return exp_map(center, v)


def coords_finite(p) -> bool:
    value = p.value if isinstance(p, (Point, TangentVector)) else p
    return _coords_finite(value)
