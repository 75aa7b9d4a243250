"""Implicit Lyapunov function primitives for DelaySlide.

This module holds the weighted dilation of the integrator chain, the implicit
function

    Q(V, y) = y^T D_r(V^-1) P D_r(V^-1) y - 1

its bisection root solver and the norm bounds that tie the root V to |y|.

All helpers are pure functions of their inputs. Matrices are plain numpy
arrays; vectors are 1-D arrays of length n with the weights r = (n, ..., 1).

Example usage::

    P = np.array([[1.0]])
    V = solve_ilf(np.array([3.0]), P)   # -> 3.0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eigvalsh

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


class IlfError(Exception):
    """Base exception for all DelaySlide errors."""


class DomainError(IlfError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class SolverError(IlfError):
    """Raised when the ILF root cannot be bracketed (usually an invalid P)."""


@dataclass(frozen=True)
class DilationWeights:
    """Weights r = (n, n-1, ..., 1) of the dilation D_r(lambda)."""

    n: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"dimension must be an integer >= 1, got {self.n}")

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.n, 0, -1)

    def generator(self) -> np.ndarray:
        """G_r = diag(r)."""
        return np.diag(self.r.astype(float))

    def matrix(self, lam: float) -> np.ndarray:
        """D_r(lambda) as a dense diagonal matrix."""
        return np.diag(dilation_apply(lam, np.ones(self.n)))


@dataclass(frozen=True)
class IlfSolverSettings:
    rel_tol: float = 1e-12
    abs_q_tol: float = 1e-10
    max_iter: int = 200
    v_floor: float = 1e-300

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_q_tol > 0 and self.v_floor > 0):
            raise DomainError("rel_tol, abs_q_tol and v_floor must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")


DEFAULT_SETTINGS = IlfSolverSettings()


def shift_matrix(n: int) -> np.ndarray:
    """Integrator-chain matrix A (ones on the superdiagonal)."""
    return np.eye(n, k=1)


def control_vector(n: int) -> np.ndarray:
    """Input vector b = (0, ..., 0, 1)."""
    b = np.zeros(n)
    b[-1] = 1.0
    return b


def generator_matrix(n: int) -> np.ndarray:
    return DilationWeights(n).generator()


def _as_vector(y: ArrayLike) -> np.ndarray:
    return np.asarray(y, dtype=float).reshape(-1)


def dilation_apply(lam: float, y: ArrayLike) -> np.ndarray:
    """Return D_r(lam) y = (lam^n y_1, ..., lam y_n).

    Powers are accumulated by repeated multiplication so integer weights
    stay exact.
    """
    if not lam > 0:
        raise DomainError(f"dilation parameter must be positive, got {lam}")
    out = _as_vector(y).copy()
    n = out.size
    # after k passes coordinate i carries lam^(min(k, n - i))
    for k in range(n):
        out[: n - k] *= lam
    return out


def dilation_divide(v: float, y: ArrayLike) -> np.ndarray:
    """Return D_r(v^-1) y by repeated division.

    Equivalent to ``dilation_apply(1 / v, y)`` but free of overflow on the
    level set Q(v, y) = 0 even for extremely small v.
    """
    if not v > 0:
        raise DomainError(f"V must be positive, got {v}")
    out = _as_vector(y).copy()
    n = out.size
    for k in range(n):
        out[: n - k] /= v
    return out


def _check_dims(y: np.ndarray, P: np.ndarray) -> None:
    if P.shape != (y.size, y.size):
        raise DomainError(f"P has shape {P.shape}, expected {(y.size, y.size)}")


def eval_Q(V: float, y: ArrayLike, P: np.ndarray) -> float:
    """Evaluate Q(V, y); strictly decreasing in V for y != 0."""
    yv = _as_vector(y)
    P = np.asarray(P, dtype=float)
    _check_dims(yv, P)
    if not V > 0:
        raise DomainError(f"V must be positive, got {V}")
    if not np.any(yv):
        raise DomainError("Q is undefined at y = 0 (V(0) = 0 by convention)")
    z = dilation_divide(V, yv)
    return float(z @ P @ z - 1.0)


def _pow_bounds(value: float, n: int) -> Tuple[float, float]:
    """(min{v, v^n}, max{v, v^n})."""
    vn = value**n
    return min(value, vn), max(value, vn)


def ilf_bounds(V: float, X: np.ndarray) -> Tuple[float, float]:
    """Norm sandwich of the level set Q(V, y) = 0.

    Returns ``(sqrt(lmin(X)) min{V, V^n}, sqrt(lmax(X)) max{V, V^n})``.
    """
    X = np.asarray(X, dtype=float)
    if not V > 0:
        raise DomainError(f"V must be positive, got {V}")
    eig = eigvalsh(X)
    if eig[0] <= 0:
        raise DomainError("X must be positive definite")
    lo, hi = _pow_bounds(V, X.shape[0])
    return math.sqrt(eig[0]) * lo, math.sqrt(eig[-1]) * hi


def _initial_bracket(norm_y: float, p_eig: np.ndarray, n: int) -> Tuple[float, float]:
    # eigenvalues of X = P^-1 are the reciprocals of those of P
    r_lo = norm_y * math.sqrt(p_eig[0])
    r_hi = norm_y * math.sqrt(p_eig[-1])
    return min(r_lo, r_lo ** (1.0 / n)), max(r_hi, r_hi ** (1.0 / n))


def solve_ilf(y: ArrayLike, P: np.ndarray, settings: IlfSolverSettings = DEFAULT_SETTINGS) -> float:
    """Return the root V_y of Q(V, y) = 0, with V(0) = 0.

    The bracket comes from the inverted norm bounds and is widened
    geometrically until Q changes sign, then bisected until the bracket is
    narrower than ``rel_tol`` relative and |Q| <= ``abs_q_tol``.

    Raises
    - SolverError: if no sign change is found within ``settings.max_iter``
      doublings, |Q| is still above ``abs_q_tol`` after ``max_iter``
      bisections, or P is not positive definite
    """
    yv = _as_vector(y)
    P = np.asarray(P, dtype=float)
    _check_dims(yv, P)
    if not np.all(np.isfinite(yv)):
        raise DomainError("y must be finite")
    if not np.any(yv):
        return 0.0
    p_eig = eigvalsh(P)
    if p_eig[0] <= 0:
        raise SolverError("P is not positive definite")

    n = yv.size
    lo, hi = _initial_bracket(float(np.linalg.norm(yv)), p_eig, n)
    lo = max(lo, settings.v_floor)

    def q(v: float) -> float:
        z = dilation_divide(v, yv)
        return float(z @ P @ z) - 1.0

    expansions = 0
    while q(lo) < 0:
        if expansions >= settings.max_iter or lo <= settings.v_floor:
            raise SolverError(f"could not bracket the ILF root from below for y={yv}")
        lo = max(lo / 2.0, settings.v_floor)
        expansions += 1
    while q(hi) > 0:
        if expansions >= settings.max_iter:
            raise SolverError(f"could not bracket the ILF root from above for y={yv}")
        hi *= 2.0
        expansions += 1

    for it in range(settings.max_iter):
        mid = 0.5 * (lo + hi)
        qm = q(mid)
        if qm == 0.0 or (hi - lo <= settings.rel_tol * hi and abs(qm) <= settings.abs_q_tol):
            break
        if qm > 0:
            lo = mid
        else:
            hi = mid
    if abs(qm) > settings.abs_q_tol:
        raise SolverError(f"|Q|={abs(qm):.3g} exceeds abs_q_tol after {it + 1} bisections for y={yv}")
    logger.debug("solve_ilf: %d expansions, %d bisections, V=%.17g", expansions, it + 1, mid)
    return mid


def ilf_partials(V: float, y: ArrayLike, P: np.ndarray) -> Tuple[float, np.ndarray]:
    """Partial derivatives (dQ/dV, dQ/dy) at (V, y).

    dQ/dV = -V^-1 z^T (P G + G P) z and dQ/dy = 2 z^T P D_r(V^-1),
    with z = D_r(V^-1) y.
    """
    yv = _as_vector(y)
    P = np.asarray(P, dtype=float)
    _check_dims(yv, P)
    z = dilation_divide(V, yv)
    G = generator_matrix(yv.size)
    dq_dv = -float(z @ (P @ G + G @ P) @ z) / V
    dq_dy = dilation_divide(V, 2.0 * (P @ z))
    return dq_dv, dq_dy


def ilf_rate(y: ArrayLike, y_dot: ArrayLike, P: np.ndarray, V: Optional[float] = None) -> float:
    """Time derivative of V(y(t)) along y_dot by implicit differentiation."""
    yv = _as_vector(y)
    if not np.any(yv):
        return 0.0
    if V is None:
        V = solve_ilf(yv, P)
    dq_dv, dq_dy = ilf_partials(V, yv, P)
    return -float(dq_dy @ _as_vector(y_dot)) / dq_dv


__all__ = [
    "IlfError",
    "DomainError",
    "SolverError",
    "DilationWeights",
    "IlfSolverSettings",
    "DEFAULT_SETTINGS",
    "shift_matrix",
    "control_vector",
    "generator_matrix",
    "dilation_apply",
    "dilation_divide",
    "eval_Q",
    "solve_ilf",
    "ilf_bounds",
    "ilf_partials",
    "ilf_rate",
]
