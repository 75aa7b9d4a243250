"""Post-processing of DelaySlide trajectories.

Metrics
- ``total_variation``: chattering of a control signal
- ``hyperexp_diagnostic``: slope of log(-log V) over a time window
- ``identification_error``: how closely u tracks -d after transients
- ``steady_state_bound``: tail sup of |x|

Monitors
- ``razumikhin_monitor``: the decrease -(rho1 - rho2 Delta^2)/2 on steps where
  the Lyapunov-Razumikhin frame holds
- ``decrease_monitor``: the finite-time rate -(rho1 - rho2 Delta^2) while V > V_min

Every function reads the recorded arrays and never mutates a Trajectory.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.api.gains import GainSet, IssGains, StructuralError, rho_delta
from app.api.ilf_core import DomainError, dilation_divide, solve_ilf
from app.api.sim import Trajectory

logger = logging.getLogger(__name__)

DEFAULT_T_START = 5.0


def total_variation(u: Sequence[float]) -> float:
    """Sum of |u[k+1] - u[k]|."""
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.size < 1:
        raise DomainError("total_variation needs at least one sample")
    return float(np.abs(np.diff(arr)).sum())


def hyperexp_diagnostic(times: Sequence[float], V: Sequence[float], window: Tuple[float, float]) -> float:
    """Least-squares slope of log(-log V) against t on ``window``.

    A positive slope indicates decay faster than any exponential; a plain
    exponential gives a slope near zero.

    Raises
    - DomainError: if V leaves (0, 1) inside the window or fewer than two
      samples fall in it
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(V, dtype=float)
    t_a, t_b = window
    mask = (t >= t_a) & (t <= t_b)
    if mask.sum() < 2:
        raise DomainError(f"window [{t_a}, {t_b}] holds fewer than two samples")
    vw = v[mask]
    if np.any(vw <= 0.0) or np.any(vw >= 1.0):
        raise DomainError("V must lie strictly inside (0, 1) on the window; shrink it")
    slope, _ = np.polyfit(t[mask], np.log(-np.log(vw)), 1)
    return float(slope)


def identification_error(
    times: Sequence[float], u: Sequence[float], d: Sequence[float], t_start: float = DEFAULT_T_START
) -> Tuple[float, float]:
    """(mean |u + d|, Pearson correlation of u and -d) over t >= t_start.

    The correlation is 0 when either signal is constant on the window.
    """
    t = np.asarray(times, dtype=float)
    mask = t >= t_start
    if not mask.any():
        raise DomainError(f"no samples at or after t_start={t_start}")
    uw = np.asarray(u, dtype=float)[mask]
    dw = -np.asarray(d, dtype=float)[mask]
    mean_abs = float(np.mean(np.abs(uw - dw)))
    if np.std(uw) == 0.0 or np.std(dw) == 0.0:
        return mean_abs, 0.0
    corr = float(np.corrcoef(uw, dw)[0, 1])
    return mean_abs, float(np.clip(corr, -1.0, 1.0))


def steady_state_bound(traj: Trajectory, t_start: float = DEFAULT_T_START) -> float:
    """sup |x(t)| over t >= t_start."""
    mask = traj.times >= t_start
    if not mask.any():
        raise DomainError(f"t_start={t_start} is beyond the horizon")
    return float(np.linalg.norm(traj.x[mask], axis=1).max())


def true_state_ilf(traj: Trajectory, P: np.ndarray) -> np.ndarray:
    """V(x_k) for every recorded state."""
    return np.array([solve_ilf(x, P) for x in traj.x])


def ilf_sandwich(V: float, V_y: float, xi: float) -> bool:
    """V / xi <= V_y <= xi V."""
    return V / xi <= V_y <= xi * V


def noise_gain_membership(x: np.ndarray, w: np.ndarray, V: float, g: GainSet, iss: IssGains) -> bool:
    """Check the conditions that define the noise gain implicitly.

    With y = x + w:

        y^T D(xi/V) P D(xi/V) y >= 1 >= y^T D(1/(xi V)) P D(1/(xi V)) y
        |w| <= sqrt(alpha) min(V/xi, (V/xi)^n)
    """
    if not V > 0:
        return False
    y = np.asarray(x, dtype=float) + np.asarray(w, dtype=float)
    xi = iss.xi
    z_hi = dilation_divide(V / xi, y)
    z_lo = dilation_divide(xi * V, y)
    if not float(z_hi @ g.P @ z_hi) >= 1.0 >= float(z_lo @ g.P @ z_lo):
        return False
    s = V / xi
    return float(np.linalg.norm(w)) <= math.sqrt(iss.alpha) * min(s, s**g.n)


@dataclass
class MonitorReport:
    checked_steps: int
    triggered_steps: int
    violations: List[Tuple[int, float, float]] = field(default_factory=list)
    max_violation: float = 0.0
    rule: str = "razumikhin_monitor"

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rule": self.rule,
            "checked_steps": self.checked_steps,
            "triggered_steps": self.triggered_steps,
            "violations": [
                {"step": k, "rate": float(rate), "bound": float(bound)} for k, rate, bound in self.violations
            ],
            "max_violation": float(self.max_violation),
        }


def _require_channels(traj: Trajectory) -> int:
    N = len(traj.times)
    channels = {
        "x": traj.x,
        "y": traj.y,
        "V_y": traj.V_y,
        "Psi": traj.Psi,
        "delta_norm": traj.delta_norm,
        "w_norm": traj.w_norm,
    }
    for name, arr in channels.items():
        if arr is None:
            raise StructuralError(f"trajectory has no {name} channel")
        if len(arr) != N:
            raise StructuralError(f"channel {name} has {len(arr)} samples, expected {N}")
    if N < 2:
        raise StructuralError("the monitor needs at least two samples")
    return N


def _step(traj: Trajectory) -> float:
    return float(traj.meta.get("h", traj.times[1] - traj.times[0]))


def _collect(
    rates: List[Tuple[int, float, float]], checked: int, triggered: int, rule: str
) -> MonitorReport:
    violations = [(k, r, b) for k, r, b in rates if r > b]
    worst = max((r - b for _, r, b in violations), default=0.0)
    report = MonitorReport(checked, triggered, violations, worst, rule)
    logger.info("%s: %d checked, %d triggered, %d violations", rule, checked, triggered, len(violations))
    return report


def razumikhin_monitor(
    traj: Trajectory,
    g: GainSet,
    iss: IssGains,
    chi: float,
    v_min: Optional[float] = None,
    tol: Optional[float] = None,
) -> MonitorReport:
    """Check (V_{k+1} - V_k)/h <= -(rho1 - rho2 Delta^2)/2 + tol where the frame holds.

    The frame at step k is: Psi_k = V_y,k; |w_k| within the noise amplitude
    bound; the noise-gain membership at (x_k, w_k); and rho_delta(|delta_k|) <= V_k.
    V is the ILF of the true state. Steps with V_k or V_y,k at or below the
    clamp V_min are skipped. ``chi`` is checked against ``iss.chi``.
    """
    N = _require_channels(traj)
    if not math.isclose(chi, iss.chi, rel_tol=1e-12):
        raise DomainError(f"chi={chi} does not match the ISS constants (chi={iss.chi})")
    if not iss.contraction:
        raise DomainError("the ISS constants carry no contraction; inflate gamma2 first")
    h = _step(traj)
    c = g.decay_margin
    v_min = float(traj.meta.get("v_min", 0.0)) if v_min is None else v_min
    tol = 2.0 * h * c if tol is None else tol
    bound = -0.5 * c + tol
    V = true_state_ilf(traj, g.P)
    w = traj.y - traj.x
    n = g.n

    triggered = 0
    rates = []
    for k in range(N - 1):
        Vk, Vyk = V[k], traj.V_y[k]
        if Vk <= v_min or Vyk <= v_min or Vk == 0.0:
            continue
        if traj.Psi[k] > Vyk:
            continue
        s = Vk / iss.xi
        if traj.w_norm[k] > math.sqrt(iss.alpha) * min(s, s**n):
            continue
        if not noise_gain_membership(traj.x[k], w[k], Vk, g, iss):
            continue
        if traj.delta_norm[k] > 0.0 and (n < 2 or rho_delta(traj.delta_norm[k], iss, n) > Vk):
            continue
        triggered += 1
        rates.append((k, (V[k + 1] - Vk) / h, bound))
    return _collect(rates, N, triggered, "razumikhin_monitor")


def decrease_monitor(
    traj: Trajectory, g: GainSet, v_min: Optional[float] = None, tol: Optional[float] = None
) -> MonitorReport:
    """Check (V_{k+1} - V_k)/h <= -(rho1 - rho2 Delta^2) + tol at every step with V_k > V_min."""
    N = len(traj.times)
    if N < 2:
        raise StructuralError("the monitor needs at least two samples")
    h = _step(traj)
    c = g.decay_margin
    v_min = float(traj.meta.get("v_min", 0.0)) if v_min is None else v_min
    tol = 2.0 * h * c if tol is None else tol
    V = true_state_ilf(traj, g.P)
    rates = [(k, (V[k + 1] - V[k]) / h, -c + tol) for k in range(N - 1) if V[k] > v_min]
    return _collect(rates, N, len(rates), "decrease_monitor")


def metric_bundle(traj: Trajectory, t_start: float = DEFAULT_T_START) -> Dict[str, float]:
    """Scalar metrics of one run, keyed by metric name."""
    mean_err, corr = identification_error(traj.times, traj.u, traj.d, t_start)
    return {
        "total_variation": total_variation(traj.u),
        "identification_mean_abs_error": mean_err,
        "identification_correlation": corr,
        "steady_state_bound": steady_state_bound(traj, t_start),
        "final_V_y": float(traj.V_y[-1]),
        "max_abs_u": float(np.abs(traj.u).max()),
    }


__all__ = [
    "DEFAULT_T_START",
    "total_variation",
    "hyperexp_diagnostic",
    "identification_error",
    "steady_state_bound",
    "true_state_ilf",
    "ilf_sandwich",
    "noise_gain_membership",
    "MonitorReport",
    "razumikhin_monitor",
    "decrease_monitor",
    "metric_bundle",
]
