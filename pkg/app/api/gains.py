"""LMI certificates and ISS constants for DelaySlide.

A ``GainSet`` carries the solution (X, Y, rho1, rho2) of the gain LMIs
together with the disturbance bound Delta. This module verifies the three
LMI blocks, searches the gamma multipliers that make the block matrix of
the robustness proof negative semidefinite, derives the ISS constants and
offers a best-effort gain synthesis.

Every semidefinite test uses the scaled threshold eig_tol * (1 + ||M||_2),
so results do not depend on the overall scale of the matrices.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eigh, eigvalsh, solve_continuous_lyapunov

from app.api.ilf_core import (
    DilationWeights,
    DomainError,
    IlfError,
    control_vector,
    generator_matrix,
    shift_matrix,
)

logger = logging.getLogger(__name__)

DEFAULT_EIG_TOL = 1e-8
GAMMA_CAP = 1e12


class StructuralError(IlfError, ValueError):
    """Raised when gain matrices have inconsistent shapes."""


class InfeasibleError(IlfError):
    """Raised when no gamma triple up to the cap makes the block matrix NSD."""


class SynthesisError(IlfError):
    """Raised when no candidate produced by the synthesis passes verify_lmi."""


@dataclass(frozen=True, eq=False)
class GainSet:
    """Certificate data (X, Y, rho1, rho2, Delta); P and K are derived."""

    X: np.ndarray
    Y: np.ndarray
    rho1: float
    rho2: float
    Delta: float = 0.0
    P: np.ndarray = field(init=False, repr=False)
    K: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise StructuralError(f"X must be square, got shape {X.shape}")
        if Y.size != X.shape[0]:
            raise StructuralError(f"Y has {Y.size} entries, expected {X.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise StructuralError("X and Y must be finite")
        if not np.allclose(X, X.T, rtol=1e-10, atol=1e-12):
            raise StructuralError("X must be symmetric")
        if not (self.rho1 > 0 and self.rho2 > 0 and self.Delta >= 0):
            raise DomainError("rho1 and rho2 must be positive and Delta nonnegative")
        if not self.rho1 > self.rho2 * self.Delta**2:
            raise DomainError(
                f"rho1={self.rho1} must exceed rho2*Delta^2={self.rho2 * self.Delta**2}"
            )
        X = 0.5 * (X + X.T)
        try:
            P = np.linalg.inv(X)
        except np.linalg.LinAlgError as exc:
            raise StructuralError("X is singular") from exc
        P = 0.5 * (P + P.T)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "K", Y @ P)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def decay_margin(self) -> float:
        """c = rho1 - rho2 * Delta^2."""
        return self.rho1 - self.rho2 * self.Delta**2

    @classmethod
    def from_pk(cls, P: Any, K: Any, rho1: float, rho2: float, Delta: float = 0.0) -> "GainSet":
        """Build from the Lyapunov matrix P and the gain row K (X = P^-1, Y = K X)."""
        P = np.asarray(P, dtype=float)
        try:
            X = np.linalg.inv(0.5 * (P + P.T))
        except np.linalg.LinAlgError as exc:
            raise StructuralError("P is singular") from exc
        X = 0.5 * (X + X.T)
        return cls(X=X, Y=np.asarray(K, dtype=float).reshape(-1) @ X, rho1=rho1, rho2=rho2, Delta=Delta)

    def with_rho2(self, rho2: float) -> "GainSet":
        return GainSet(X=self.X, Y=self.Y, rho1=self.rho1, rho2=rho2, Delta=self.Delta)

    def to_document(self) -> Dict[str, Any]:
        """JSON-serializable document with row-major arrays.

        Floats are written with ``repr`` semantics, which round-trips every
        double exactly (at most 17 significant digits).
        """
        return {
            "n": self.n,
            "X": [[float(v) for v in row] for row in self.X],
            "Y": [float(v) for v in self.Y],
            "rho1": float(self.rho1),
            "rho2": float(self.rho2),
            "Delta": float(self.Delta),
        }

    @classmethod
    def from_document(cls, doc: Dict[str, Any]) -> "GainSet":
        try:
            X = np.asarray(doc["X"], dtype=float)
            Y = np.asarray(doc["Y"], dtype=float).reshape(-1)
            g = cls(X=X, Y=Y, rho1=float(doc["rho1"]), rho2=float(doc["rho2"]), Delta=float(doc.get("Delta", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, IlfError):
                raise
            raise StructuralError(f"malformed gain document: {exc}") from exc
        if "n" in doc and int(doc["n"]) != g.n:
            raise StructuralError(f"document declares n={doc['n']} but X is {g.n}x{g.n}")
        return g


def save_gains(g: GainSet, path: Union[str, Path]) -> Path:
    p = Path(path)
    p.write_text(json.dumps(g.to_document(), indent=2), encoding="utf-8")
    return p


def load_gains(path: Union[str, Path]) -> GainSet:
    """Read a GainSet JSON document (fields n, X, Y, rho1, rho2, Delta)."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{p.name} is not valid JSON: {exc}") from exc
    return GainSet.from_document(doc)


# -- LMI verification -------------------------------------------------------


@dataclass
class LmiCondition:
    name: str
    passed: bool
    min_eig: float
    max_eig: float
    threshold: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition": self.name,
            "passed": bool(self.passed),
            "min_eig": float(self.min_eig),
            "max_eig": float(self.max_eig),
            "threshold": float(self.threshold),
        }


@dataclass
class LmiReport:
    conditions: List[LmiCondition]
    level_set_ratio: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def rate_certified(self) -> bool:
        """True when the finite-time decrease rate -(rho1 - rho2 Delta^2) holds on the level set."""
        return self.passed and self.level_set_ratio is not None and self.level_set_ratio >= 1.0

    def condition(self, name: str) -> LmiCondition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rule": "lmi_certificate",
            "passed": self.passed,
            "conditions": [c.to_dict() for c in self.conditions],
            "level_set_ratio": self.level_set_ratio,
            "rate_certified": self.rate_certified,
        }


def _spectral_norm(eig: np.ndarray) -> float:
    return float(max(abs(eig[0]), abs(eig[-1])))


def _blocks(X: np.ndarray, Y: np.ndarray, rho1: float, rho2: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = X.shape[0]
    A = shift_matrix(n)
    b = control_vector(n).reshape(n, 1)
    G = generator_matrix(n)
    Y = Y.reshape(1, n)
    XG = X @ G + G @ X
    upsilon = X @ A.T + A @ X + Y.T @ b.T + b @ Y + rho1 * XG
    block2 = np.block([[upsilon, b], [b.T, -rho2 * np.ones((1, 1))]])
    block3 = np.block([[XG, X], [X, np.eye(n)]])
    return X, 0.5 * (block2 + block2.T), 0.5 * (block3 + block3.T)


def lmi_blocks(g: GainSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three LMI matrices: X, [[Upsilon, b], [b^T, -rho2]], [[XG+GX, X], [X, I]]."""
    return _blocks(g.X, g.Y, g.rho1, g.rho2)


def level_set_ratio(P: np.ndarray) -> float:
    """lambda_min of (PG + GP) relative to P, i.e. min z^T(PG+GP)z over z^T P z = 1."""
    G = generator_matrix(P.shape[0])
    return float(eigvalsh(P @ G + G @ P, P)[0])


def verify_lmi(g: GainSet, eig_tol: float = DEFAULT_EIG_TOL) -> LmiReport:
    """Check X > 0, the block (ii) <= 0 and the block (iii) >= 0.

    Each block is decomposed with a symmetric eigensolver; the report keeps
    the extreme eigenvalues and the threshold used.
    """
    X, block2, block3 = lmi_blocks(g)
    conditions = []

    eig = eigvalsh(X)
    thr = eig_tol * (1.0 + _spectral_norm(eig))
    conditions.append(LmiCondition("X>0", bool(eig[0] > thr), eig[0], eig[-1], thr))

    eig = eigvalsh(block2)
    thr = eig_tol * (1.0 + _spectral_norm(eig))
    conditions.append(LmiCondition("decrease<=0", bool(eig[-1] <= thr), eig[0], eig[-1], thr))

    eig = eigvalsh(block3)
    thr = eig_tol * (1.0 + _spectral_norm(eig))
    conditions.append(LmiCondition("homogeneity>=0", bool(eig[0] >= -thr), eig[0], eig[-1], thr))

    ratio = level_set_ratio(g.P) if conditions[0].passed else None
    report = LmiReport(conditions=conditions, level_set_ratio=ratio)
    logger.debug("verify_lmi n=%d rho2=%g passed=%s", g.n, g.rho2, report.passed)
    return report


def lmi_margin(g: GainSet) -> float:
    """Smallest normalized slack over the three blocks (positive when strictly feasible)."""
    return _margin_of(g.X, g.Y, g.rho1, g.rho2)


def rho2_grid(rho1: float, Delta: float, points: int = 19) -> np.ndarray:
    """Evenly spaced rho2 values inside (0, rho1 / Delta^2)."""
    upper = rho1 / Delta**2 if Delta > 0 else rho1
    return upper * np.arange(1, points + 1) / (points + 1)


def scan_rho2(
    P: Any, K: Any, rho1: float, Delta: float, eig_tol: float = DEFAULT_EIG_TOL, points: int = 19
) -> List[Tuple[float, LmiReport]]:
    """Verify the P/K gains for every rho2 on the grid; returns (rho2, report) pairs."""
    results = []
    for rho2 in rho2_grid(rho1, Delta, points):
        g = GainSet.from_pk(P, K, rho1=rho1, rho2=float(rho2), Delta=Delta)
        results.append((float(rho2), verify_lmi(g, eig_tol)))
    passing = [r for r, rep in results if rep.passed]
    logger.info("rho2 scan: %d of %d grid values pass", len(passing), len(results))
    return results


def best_rho2(results: Sequence[Tuple[float, LmiReport]]) -> Tuple[float, bool]:
    """Pick the first passing rho2, else the one with the smallest block (ii) violation."""
    for rho2, rep in results:
        if rep.passed:
            return rho2, True
    rho2, _ = min(results, key=lambda item: item[1].condition("decrease<=0").max_eig)
    return rho2, False


# -- gamma search and ISS constants -----------------------------------------


def robustness_matrix(g: GainSet, gammas: Sequence[float]) -> np.ndarray:
    """The (3n+2)x(3n+2) block matrix of the ISS proof for the given gammas."""
    n = g.n
    P, K = g.P, g.K.reshape(1, n)
    A = shift_matrix(n)
    G = generator_matrix(n)
    b = control_vector(n).reshape(n, 1)
    Pb = P @ b
    PbK = Pb @ K
    pi = A.T @ P + P @ A + PbK + PbK.T + g.rho1 * (P @ G + G @ P)
    g1, g2, g3 = gammas
    Z = np.zeros
    m = np.block(
        [
            [pi, Pb, PbK, PbK, P],
            [Pb.T, -g.rho2 * np.ones((1, 1)), Z((1, n)), Z((1, n)), Z((1, n))],
            [PbK.T, Z((n, 1)), -g1 * np.eye(n), Z((n, n)), Z((n, n))],
            [PbK.T, Z((n, 1)), Z((n, n)), -g2 * np.eye(n), Z((n, n))],
            [P, Z((n, 1)), Z((n, n)), Z((n, n)), -g3 * np.eye(n)],
        ]
    )
    return 0.5 * (m + m.T)


def gammas_feasible(g: GainSet, gammas: Sequence[float], eig_tol: float = DEFAULT_EIG_TOL) -> bool:
    eig = eigvalsh(robustness_matrix(g, gammas))
    return bool(eig[-1] <= eig_tol * (1.0 + _spectral_norm(eig)))


def find_gammas(
    g: GainSet, eig_tol: float = DEFAULT_EIG_TOL, cap: float = GAMMA_CAP, rel_step: float = 0.01
) -> Tuple[float, float, float]:
    """Smallest (gamma1, gamma2, gamma3) making the robustness matrix NSD.

    A common value is scanned over powers of two first; each coordinate is
    then lowered while the others stay fixed and refined by bisection to
    ``rel_step`` relative accuracy.

    Raises
    - InfeasibleError: if no common value up to ``cap`` is feasible
    """
    start = None
    k = -4
    while 2.0**k <= cap:
        if gammas_feasible(g, (2.0**k,) * 3, eig_tol):
            start = 2.0**k
            break
        k += 1
    if start is None:
        raise InfeasibleError(f"no feasible gammas up to {cap:g}; the LMI margin is too thin")

    gammas = [start] * 3
    for i in range(3):

        def ok(value: float) -> bool:
            trial = list(gammas)
            trial[i] = value
            return gammas_feasible(g, trial, eig_tol)

        hi = gammas[i]
        lo = hi / 2.0
        while lo > 2.0**-60 and ok(lo):
            hi, lo = lo, lo / 2.0
        while hi - lo > rel_step * hi:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        gammas[i] = hi
    logger.info("find_gammas: gamma1=%.6g gamma2=%.6g gamma3=%.6g", *gammas)
    return gammas[0], gammas[1], gammas[2]


@dataclass(frozen=True)
class IssGains:
    gamma1: float
    gamma2: float
    gamma3: float
    alpha: float
    xi: float
    chi: float
    rhoV_coeff: float
    rho_delta_coeff: float

    @property
    def contraction(self) -> bool:
        return self.rhoV_coeff < 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "alpha": self.alpha,
            "xi": self.xi,
            "chi": self.chi,
            "rhoV_coeff": self.rhoV_coeff,
            "rho_delta_coeff": self.rho_delta_coeff,
            "contraction": self.contraction,
        }


def xi_bound(c: float, gamma2: float, n: int) -> float:
    a = c / (4.0 * gamma2)
    return 1.0 + min(math.sqrt(a), a ** (1.0 / (2 * n)))


def compute_iss_constants(g: GainSet, gammas: Sequence[float], chi: float) -> IssGains:
    """Closed-form ISS constants alpha, xi, rho_V and rho_delta coefficients."""
    if not chi > 1:
        raise DomainError(f"chi must be > 1, got {chi}")
    c = g.decay_margin
    if not c > 0:
        raise DomainError("rho1 - rho2*Delta^2 must be positive")
    g1, g2, g3 = (float(v) for v in gammas)
    if min(g1, g2, g3) <= 0:
        raise DomainError("gammas must be positive")
    G = generator_matrix(g.n)
    p_eig = eigvalsh(g.P)
    m_min = eigvalsh(g.P @ G + G @ g.P)[0]
    xi = xi_bound(c, g2, g.n)
    iss = IssGains(
        gamma1=g1,
        gamma2=g2,
        gamma3=g3,
        alpha=(c / (4.0 * g1)) * m_min / p_eig[-1],
        xi=xi,
        chi=float(chi),
        rhoV_coeff=math.exp(1.0 - chi) * xi ** (chi + 1.0),
        rho_delta_coeff=6.0 * g3 * p_eig[-1] / c,
    )
    if not iss.contraction:
        logger.warning("rho_V coefficient %.4f >= 1: no ISS contraction for chi=%g", iss.rhoV_coeff, chi)
    return iss


def inflate_gamma2(g: GainSet, gammas: Sequence[float], chi: float, max_doublings: int = 200) -> IssGains:
    """Double gamma2 until the rho_V coefficient drops below one."""
    g1, g2, g3 = gammas
    for _ in range(max_doublings):
        iss = compute_iss_constants(g, (g1, g2, g3), chi)
        if iss.contraction:
            return iss
        g2 *= 2.0
    raise InfeasibleError(f"no contraction for chi={chi} within {max_doublings} doublings of gamma2")


def rho_V(s: float, iss: IssGains) -> float:
    """rho_V(s) = e^(1-chi) xi^(chi+1) min(s, s^chi)."""
    return iss.rhoV_coeff * min(s, s**iss.chi)


def rho_delta(s: float, iss: IssGains, n: int) -> float:
    """rho_delta(s) = max(sqrt(c_d s^2), (c_d s^2)^(1/(2(n-1))))."""
    if n < 2:
        raise DomainError("rho_delta needs n >= 2 (no mismatched channel for n = 1)")
    q = iss.rho_delta_coeff * s * s
    return max(math.sqrt(q), q ** (1.0 / (2 * (n - 1))))


# -- synthesis --------------------------------------------------------------


def _pole_row(poles: Sequence[float]) -> np.ndarray:
    """Gain row K placing the closed-loop poles of the integrator chain."""
    coeffs = np.real(np.poly(poles))
    return -coeffs[1:][::-1]


def _symmetric_basis(n: int) -> List[np.ndarray]:
    basis = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
    return basis


def _margin_of(X: np.ndarray, Y: np.ndarray, rho1: float, rho2: float) -> float:
    X, block2, block3 = _blocks(X, Y, rho1, rho2)
    ex, e2, e3 = eigvalsh(X), eigvalsh(block2), eigvalsh(block3)
    return min(
        ex[0] / (1.0 + _spectral_norm(ex)),
        -e2[-1] / (1.0 + _spectral_norm(e2)),
        e3[0] / (1.0 + _spectral_norm(e3)),
    )


def _descent(n: int, rho1: float, rho2: float, Delta: float, eig_tol: float, iters: int) -> Optional[GainSet]:
    """Spectral subgradient descent on the worst block eigenvalue, from X = I."""
    sym = _symmetric_basis(n)
    dim = len(sym) + n

    def unpack(theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        X = sum(t * e for t, e in zip(theta[: len(sym)], sym))
        return X, theta[len(sym):]

    def blocks(theta: np.ndarray) -> Tuple[np.ndarray, ...]:
        X, Y = unpack(theta)
        return _blocks(X, Y, rho1, rho2)

    theta = np.zeros(dim)
    eye = np.eye(n)
    theta[: len(sym)] = [eye[i, j] for i in range(n) for j in range(i, n)]
    theta[len(sym):] = _pole_row([-1.0] * n)

    # blocks are affine in theta: B(theta) = B(0) + sum theta_j (B(e_j) - B(0))
    zero = blocks(np.zeros(dim))
    slopes = [[u - z for u, z in zip(blocks(np.eye(dim)[j]), zero)] for j in range(dim)]
    signs = (-1.0, 1.0, -1.0)

    def worst(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        best_val, grad = -np.inf, np.zeros(dim)
        for k, (m, s) in enumerate(zip(blocks(theta), signs)):
            w, v = eigh(m)
            idx = -1 if s > 0 else 0
            val = s * w[idx] / (1.0 + max(abs(w[0]), abs(w[-1])))
            if val > best_val:
                vec = v[:, idx]
                best_val = val
                grad = np.array([s * vec @ slopes[j][k] @ vec for j in range(dim)])
        return best_val, grad

    best_theta, best_val = theta.copy(), np.inf
    step0 = 0.5 * max(1.0, float(np.linalg.norm(theta)))
    for k in range(iters):
        val, grad = worst(theta)
        if val < best_val:
            best_theta, best_val = theta.copy(), val
        norm = np.linalg.norm(grad)
        if val < -1e-3 or norm == 0:
            break
        theta = theta - step0 / math.sqrt(k + 1.0) * grad / norm
    X, Y = unpack(best_theta)
    try:
        g = GainSet(X=X, Y=Y, rho1=rho1, rho2=rho2, Delta=Delta)
    except IlfError:
        return None
    return g if verify_lmi(g, eig_tol).passed else None


def _seeds(n: int) -> List[Tuple[str, np.ndarray, np.ndarray]]:
    """Lyapunov seeds (label, X0, Y0) from pole placement and weights I, G, G^-1."""
    G = generator_matrix(n)
    A = shift_matrix(n)
    b = control_vector(n).reshape(n, 1)
    seeds = []
    for poles in ([-1.0] * n, [-(i + 1.0) for i in range(n)]):
        K0 = _pole_row(poles)
        F = A + b @ K0.reshape(1, n)
        for label, W in (("I", np.eye(n)), ("G", G), ("Ginv", np.linalg.inv(G))):
            X0 = solve_continuous_lyapunov(F, -W)
            X0 = 0.5 * (X0 + X0.T)
            if eigvalsh(X0 @ G + G @ X0)[0] <= 0:
                continue
            seeds.append((f"poles={poles} W={label}", X0, K0 @ X0))
    return seeds


def _seeded_scan(n: int, rho1: float, rho2: float, Delta: float, eig_tol: float) -> Optional[GainSet]:
    """Scan X = c D(s) X0 D(s), Y = c Y0 D(s) over a log grid of (s, c) per seed."""
    dil = DilationWeights(n)
    candidates = []
    for label, X0, Y0 in _seeds(n):

        def scaled(ls: float, lc: float) -> Tuple[np.ndarray, np.ndarray]:
            D = dil.matrix(10.0**ls)
            return 10.0**lc * D @ X0 @ D, 10.0**lc * Y0 @ D

        best = (-np.inf, 0.0, 0.0)
        for ls in -6.0 + 0.25 * np.arange(33):
            for lc in -3.0 + 0.25 * np.arange(45):
                m = _margin_of(*scaled(ls, lc), rho1, rho2)
                if m > best[0]:
                    best = (m, ls, lc)
        _, ls0, lc0 = best
        for ls in ls0 + 0.05 * np.arange(-10, 11):
            for lc in lc0 + 0.05 * np.arange(-10, 11):
                m = _margin_of(*scaled(ls, lc), rho1, rho2)
                if m > best[0]:
                    best = (m, ls, lc)
        margin, ls, lc = best
        logger.debug("seed %s: margin %.3e at s=1e%.2f c=1e%.2f", label, margin, ls, lc)
        if margin <= 0:
            continue
        X, Y = scaled(ls, lc)
        try:
            g = GainSet(X=0.5 * (X + X.T), Y=Y, rho1=rho1, rho2=rho2, Delta=Delta)
        except IlfError:
            continue
        if verify_lmi(g, eig_tol).passed:
            candidates.append((margin, label, g))
    if not candidates:
        return None
    # ties go to the earlier seed
    margin, label, g = max(candidates, key=lambda item: item[0])
    logger.info("synthesis: seed %s wins with margin %.3e", label, margin)
    return g


def synthesize_gains(
    n: int,
    rho1: float,
    rho2: float,
    Delta: float,
    eig_tol: float = DEFAULT_EIG_TOL,
    method: str = "auto",
    descent_iters: int = 400,
) -> GainSet:
    """Best-effort gains passing verify_lmi.

    ``method="auto"`` runs the spectral subgradient descent from X = I and,
    when it stalls, scans dilation-scaled Lyapunov seeds built from pole
    placement. ``"descent"`` and ``"seeded"`` run one stage only.

    Raises
    - SynthesisError: if no candidate passes verify_lmi
    """
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be an integer >= 1, got {n}")
    if not (rho2 > 0 and rho1 > rho2 * Delta**2):
        raise DomainError("need rho1 > rho2*Delta^2 and rho2 > 0")
    if method not in {"auto", "descent", "seeded"}:
        raise DomainError(f"unknown synthesis method {method!r}")
    g = None
    if method in {"auto", "descent"}:
        g = _descent(n, rho1, rho2, Delta, eig_tol, descent_iters)
        if g is not None:
            logger.info("synthesis: subgradient descent converged for n=%d", n)
            return g
        if method == "auto":
            logger.warning("synthesis: subgradient descent stalled for n=%d, scanning Lyapunov seeds", n)
    if method in {"auto", "seeded"}:
        g = _seeded_scan(n, rho1, rho2, Delta, eig_tol)
    if g is None:
        raise SynthesisError(f"no gains passing the LMIs found for n={n}, rho1={rho1}, rho2={rho2}")
    return g


__all__ = [
    "DEFAULT_EIG_TOL",
    "StructuralError",
    "InfeasibleError",
    "SynthesisError",
    "GainSet",
    "save_gains",
    "load_gains",
    "LmiCondition",
    "LmiReport",
    "lmi_blocks",
    "level_set_ratio",
    "verify_lmi",
    "lmi_margin",
    "rho2_grid",
    "scan_rho2",
    "best_rho2",
    "robustness_matrix",
    "gammas_feasible",
    "find_gammas",
    "IssGains",
    "xi_bound",
    "compute_iss_constants",
    "inflate_gamma2",
    "rho_V",
    "rho_delta",
    "synthesize_gains",
]
