"""Dense symmetric-matrix kernels: Jacobi eigendecomposition and spectral functions.

Everything here operates on plain float64 ``(n, n)`` numpy arrays with
2 <= n <= 64. The eigensolver is a cyclic Jacobi sweep, which is robust and
dependency-free at these sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NonSymmetric, NotPositiveDefinite

# |A[i,j] - A[j,i]| <= SYMMETRY_RTOL * max(1, max|A|)
SYMMETRY_RTOL = 1e-12
# off-diagonal Frobenius norm <= OFFDIAG_RTOL * ||A||_F declares convergence
OFFDIAG_RTOL = 1e-13
# eigenvalues at or below this floor are treated as not positive definite
EIGENVALUE_FLOOR = 1e-12

_MIN_DIM = 2
_MAX_DIM = 64


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not (_MIN_DIM <= n <= _MAX_DIM):
        raise DimensionMismatch(f"kernel handles {_MIN_DIM} <= n <= {_MAX_DIM}, got n={n}")
    return a


def check_symmetric(a) -> np.ndarray:
    """Validate the symmetry invariant and return the matrix as float64."""
    a = _as_square(a)
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    skew = float(np.max(np.abs(a - a.T)))
    if skew > SYMMETRY_RTOL * scale:
        raise NonSymmetric(f"|A - A^T| = {skew:.3e} exceeds {SYMMETRY_RTOL:.0e} * {scale:.3e}")
    return a


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def sym_eigen(a, max_sweeps: int | None = None) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Convergence is declared once the off-diagonal Frobenius norm drops below
    ``OFFDIAG_RTOL * ||A||_F``; exceeding ``max_sweeps`` (default ``100 * n**2``)
    raises :class:`NoConvergence`.
    """
    a = check_symmetric(a)
    n = a.shape[0]
    w = 0.5 * (a + a.T)
    v = np.eye(n)
    anorm = float(np.linalg.norm(a))
    if max_sweeps is None:
        max_sweeps = 100 * n * n

    if anorm > 0.0:
        threshold = OFFDIAG_RTOL * anorm
        od = ~np.eye(n, dtype=bool)
        for _ in range(max_sweeps):
            off2 = float(np.sum(w[od] ** 2))
            if off2 <= threshold * threshold:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = w[p, q]
                    if apq == 0.0:
                        continue
                    app, aqq = w[p, p], w[q, q]
                    tau = (aqq - app) / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    # rotate rows/columns p and q of W, keeping W exactly symmetric
                    wp = w[:, p].copy()
                    wq = w[:, q].copy()
                    w[:, p] = c * wp - s * wq
                    w[:, q] = s * wp + c * wq
                    wp = w[p, :].copy()
                    wq = w[q, :].copy()
                    w[p, :] = c * wp - s * wq
                    w[q, :] = s * wp + c * wq
                    w[p, q] = 0.0
                    w[q, p] = 0.0
                    w[p, p] = app - t * apq
                    w[q, q] = aqq + t * apq
                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
        else:
            raise NoConvergence(f"Jacobi sweeps exhausted after {max_sweeps} sweeps (n={n})")

    vals = np.diag(w).copy()
    order = np.argsort(vals, kind="stable")
    return SpectralDecomposition(vals[order], v[:, order])


_PLAIN_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "inv_sqrt": lambda x: 1.0 / np.sqrt(x),
}


def sym_func(a, func: str, exponent: float | None = None) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its spectrum.

    ``func`` is one of ``exp``, ``log``, ``sqrt``, ``inv_sqrt`` or ``power``
    (the latter takes ``exponent``). All functions except ``exp`` require
    every eigenvalue to exceed ``EIGENVALUE_FLOOR``.
    """
    dec = sym_eigen(a)
    vals = dec.eigenvalues
    if func == "power":
        if exponent is None:
            raise ValueError("power requires an exponent")
        mapper = lambda x: np.power(x, exponent)  # noqa: E731
    elif func in _PLAIN_FUNCS:
        if exponent is not None:
            raise ValueError(f"{func} takes no exponent")
        mapper = _PLAIN_FUNCS[func]
    else:
        raise ValueError(f"unknown spectral function {func!r}")
    if func != "exp" and float(vals.min()) <= EIGENVALUE_FLOOR:
        raise NotPositiveDefinite(
            f"eigenvalue {vals.min():.3e} at or below floor {EIGENVALUE_FLOOR:.0e} for {func}"
        )
    q = dec.eigenvectors
    out = (q * mapper(vals)) @ q.T
    return 0.5 * (out + out.T)


def frobenius_inner(a, b) -> float:
    """Frobenius inner product sum_ij A[i,j] * B[i,j]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sum(a * b))
