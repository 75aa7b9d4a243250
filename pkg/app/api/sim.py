"""Fixed-step simulation of the perturbed integrator chain.

    x' = A x + b (u + d) + delta,   y = x + w

integrated with explicit Euler at step h, control held over each step. The
matched disturbance d and the mismatched perturbation delta are
deterministic functions of time; the measurement noise w is drawn once per
step from a counter-based generator so that every run is reproducible from
its seed.

Example usage::

    cfg = paper_scenario(seed=42)
    traj = run_scenario(cfg)
    frame = traj.to_frame()
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.api.controllers import ControllerConfig, ControllerKind, ControllerSession
from app.api.gains import GainSet, best_rho2, scan_rho2
from app.api.ilf_core import (
    DEFAULT_SETTINGS,
    IlfError,
    IlfSolverSettings,
    solve_ilf,
)

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12

# Gain matrices printed for the three-integrator study.
PAPER_K = [-310.4000, -91.7333, -12.0000]
PAPER_P = [
    [60.2035, 14.0373, 1.1637],
    [14.0373, 3.4227, 0.3023],
    [1.1637, 0.3023, 0.0302],
]


class ContractViolationError(IlfError, ValueError):
    """Raised when a mismatched perturbation enters the control channel."""


class DivergedRunError(IlfError):
    """Raised when the state leaves the finite range; carries the step index."""

    def __init__(self, step: int, time: float, norm: float) -> None:
        super().__init__(f"simulation diverged at step {step} (t={time:.6g}, |x|={norm:.3g})")
        self.step = step
        self.time = time
        self.norm = norm

    def __reduce__(self):
        return self.__class__, (self.step, self.time, self.norm)


class SignalPathError(IlfError):
    """Raised when runs that should share one signal realization did not."""


def prng_name() -> str:
    return f"numpy.random.Philox/numpy-{np.__version__}"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


class Waveform(BaseModel):
    """amp*sin(omega t), amp*cos(omega t), a constant amp, or zero."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["sin", "cos", "constant", "zero"] = "zero"
    amp: float = 0.0
    omega: float = 0.0

    def __call__(self, t: float) -> float:
        if self.kind == "sin":
            return self.amp * math.sin(self.omega * t)
        if self.kind == "cos":
            return self.amp * math.cos(self.omega * t)
        if self.kind == "constant":
            return self.amp
        return 0.0

    def sup_abs(self) -> float:
        return 0.0 if self.kind == "zero" else abs(self.amp)


class SignalSpec(BaseModel):
    """Matched disturbance d, mismatched perturbation delta and noise amplitudes."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    matched: Waveform = Field(default_factory=Waveform)
    Delta: float = Field(1.0, ge=0.0, description="Bound on |d(t)|")
    mismatched: List[Waveform] = Field(default_factory=list, description="Per-channel delta; empty means zero")
    noise: Union[float, List[float]] = Field(0.0, description="Uniform noise amplitude(s), w_i in [0, amp]")

    @field_validator("noise")
    @classmethod
    def _nonnegative_noise(cls, v: Union[float, List[float]]) -> Union[float, List[float]]:
        values = v if isinstance(v, list) else [v]
        if any(a < 0 for a in values):
            raise ValueError("noise amplitudes must be nonnegative")
        return v

    @model_validator(mode="after")
    def _check_bounds(self) -> "SignalSpec":
        if self.matched.sup_abs() > self.Delta:
            raise ValueError(f"sup|d| = {self.matched.sup_abs()} exceeds Delta = {self.Delta}")
        if self.mismatched and self.mismatched[-1].sup_abs() != 0.0:
            raise ValueError("the last mismatched channel must be identically zero")
        return self

    def noise_amplitudes(self, n: int) -> np.ndarray:
        if isinstance(self.noise, list):
            if len(self.noise) != n:
                raise ValueError(f"noise has {len(self.noise)} channels, expected {n}")
            return np.asarray(self.noise, dtype=float)
        return np.full(n, float(self.noise))


def paper_signals(noise: float = 0.1, mismatched: bool = True, matched: bool = True) -> SignalSpec:
    """d = sin(10t), delta = [0.03 sin 3t, 0.05 cos 5t, 0], w_i uniform on [0, noise]."""
    return SignalSpec(
        matched=Waveform(kind="sin", amp=1.0, omega=10.0) if matched else Waveform(),
        Delta=1.0,
        mismatched=(
            [Waveform(kind="sin", amp=0.03, omega=3.0), Waveform(kind="cos", amp=0.05, omega=5.0), Waveform()]
            if mismatched
            else []
        ),
        noise=noise,
    )


class GainDocument(BaseModel):
    """Gains given as (X, Y) or as (P, K); rho2 may be left to the grid scan for (P, K)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: Optional[int] = None
    X: Optional[List[List[float]]] = None
    Y: Optional[List[float]] = None
    P: Optional[List[List[float]]] = None
    K: Optional[List[float]] = None
    rho1: float = Field(1.0, gt=0.0)
    rho2: Optional[float] = Field(None, gt=0.0)
    Delta: Optional[float] = Field(None, ge=0.0)

    @field_validator("Y", "K", mode="before")
    @classmethod
    def _flatten_row(cls, v: Any) -> Any:
        if isinstance(v, list) and len(v) == 1 and isinstance(v[0], list):
            return v[0]
        return v

    @model_validator(mode="after")
    def _one_form(self) -> "GainDocument":
        xy = self.X is not None and self.Y is not None
        pk = self.P is not None and self.K is not None
        if xy == pk:
            raise ValueError("give exactly one of the pairs (X, Y) or (P, K)")
        if xy and self.rho2 is None:
            raise ValueError("rho2 is required with (X, Y)")
        return self

    def to_gain_set(self, default_delta: float = 0.0) -> GainSet:
        """Resolve to a GainSet; a missing rho2 is taken from the grid scan."""
        Delta = default_delta if self.Delta is None else self.Delta
        if self.X is not None:
            g = GainSet(X=np.asarray(self.X), Y=np.asarray(self.Y), rho1=self.rho1, rho2=self.rho2, Delta=Delta)
        elif self.rho2 is not None:
            g = GainSet.from_pk(self.P, self.K, rho1=self.rho1, rho2=self.rho2, Delta=Delta)
        else:
            rho2, passed = best_rho2(scan_rho2(self.P, self.K, self.rho1, Delta))
            if not passed:
                logger.warning("no rho2 on the grid certifies the given P, K; using rho2=%g", rho2)
            g = GainSet.from_pk(self.P, self.K, rho1=self.rho1, rho2=rho2, Delta=Delta)
        if self.n is not None and self.n != g.n:
            raise ValueError(f"gains declare n={self.n} but the matrices are {g.n}x{g.n}")
        return g


PAPER_GAIN_DOCUMENT = GainDocument(P=PAPER_P, K=PAPER_K, rho1=1.0)


@lru_cache(maxsize=8)
def paper_gain_set(Delta: float = 1.0) -> GainSet:
    """The printed P, K with rho1 = 1 and rho2 from the grid scan."""
    return PAPER_GAIN_DOCUMENT.to_gain_set(default_delta=Delta)


class ScenarioConfig(BaseModel):
    """Full experiment description."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "scenario"
    n: int = Field(3, ge=1)
    T: float = Field(10.0, gt=0.0)
    h: float = Field(5e-3, gt=0.0)
    x0: List[float] = Field(default_factory=lambda: [0.1, 1.0, 3.0])
    eta: float = Field(0.1, gt=0.0)
    chi: float = Field(1.1, gt=1.0)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    gains: Union[Literal["paper"], GainDocument] = "paper"
    signals: SignalSpec = Field(default_factory=paper_signals)
    seed: int = Field(42, ge=0, lt=2**64)
    require_certificate: bool = True

    @model_validator(mode="after")
    def _check_consistency(self) -> "ScenarioConfig":
        if self.T < self.h:
            raise ValueError("horizon T must be at least one step h")
        if self.eta < self.h:
            raise ValueError("delay eta must be at least one step h")
        ratio = self.eta / self.h
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError(f"eta={self.eta} is not a multiple of h={self.h}")
        if len(self.x0) != self.n:
            raise ValueError(f"x0 has {len(self.x0)} entries, expected n={self.n}")
        if self.signals.mismatched and len(self.signals.mismatched) != self.n:
            raise ValueError(f"mismatched has {len(self.signals.mismatched)} channels, expected n={self.n}")
        self.signals.noise_amplitudes(self.n)
        return self

    @property
    def steps(self) -> int:
        """Number of recorded samples, floor(T/h) + 1."""
        return int(math.floor(self.T / self.h + 1e-9)) + 1

    def controller_config(self) -> ControllerConfig:
        return self.controller.model_copy(update={"chi": self.chi, "eta": self.eta})

    def gain_set(self) -> GainSet:
        if self.gains == "paper":
            g = paper_gain_set(self.signals.Delta)
        else:
            g = self.gains.to_gain_set(default_delta=self.signals.Delta)
        if g.n != self.n:
            raise ValueError(f"gains are {g.n}-dimensional but the scenario has n={self.n}")
        return g


def paper_scenario(seed: int = 42, **overrides: Any) -> ScenarioConfig:
    """The three-integrator study: x0=[0.1, 1, 3], h=5e-3, eta=0.1, chi=1.1, V_min=0.1, T=10."""
    base: Dict[str, Any] = dict(name="paper", seed=seed, require_certificate=False)
    base.update(overrides)
    return ScenarioConfig(**base)


def plant_derivative(x: np.ndarray, u: float, d: float, delta: np.ndarray) -> np.ndarray:
    """(x2, ..., xn, u + d) + delta."""
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if delta[-1] != 0.0:
        raise ContractViolationError("mismatched perturbation must satisfy b^T delta = 0")
    dx = np.empty_like(x)
    dx[:-1] = x[1:]
    dx[-1] = u + d
    return dx + delta


def eval_signals(
    t: float, spec: SignalSpec, rng: np.random.Generator, n: int
) -> Tuple[float, np.ndarray, np.ndarray, np.random.Generator]:
    """Return (d, delta, w, rng); no draw is consumed when every noise amplitude is zero."""
    d = spec.matched(t)
    delta = np.array([wf(t) for wf in spec.mismatched]) if spec.mismatched else np.zeros(n)
    amps = spec.noise_amplitudes(n)
    if np.any(amps > 0):
        w = amps * rng.random(n)
    else:
        w = np.zeros(n)
    return d, delta, w, rng


@dataclass
class SignalPath:
    """One realization of (d, delta, w) on the simulation grid."""

    d: np.ndarray
    delta: np.ndarray
    w: np.ndarray

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.d, self.delta, self.w):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()


def realize_signals(cfg: ScenarioConfig) -> SignalPath:
    rng = make_rng(cfg.seed)
    N = cfg.steps
    d = np.empty(N)
    delta = np.empty((N, cfg.n))
    w = np.empty((N, cfg.n))
    for k in range(N):
        d[k], delta[k], w[k], rng = eval_signals(k * cfg.h, cfg.signals, rng, cfg.n)
    return SignalPath(d=d, delta=delta, w=w)


@dataclass
class Trajectory:
    """Time-indexed record of one run; every array has one row per step."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    V_y: np.ndarray
    Psi: np.ndarray
    d: np.ndarray
    delta_norm: np.ndarray
    w_norm: np.ndarray
    delta: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.times.size

    @property
    def w(self) -> np.ndarray:
        return self.y - self.x

    def columns(self) -> List[str]:
        n = self.n
        return (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"y{i + 1}" for i in range(n)]
            + ["u", "V", "Psi", "d", "delta_norm", "w_norm"]
        )

    def to_frame(self) -> pd.DataFrame:
        data = np.column_stack(
            [self.times, self.x, self.y, self.u, self.V_y, self.Psi, self.d, self.delta_norm, self.w_norm]
        )
        return pd.DataFrame(data, columns=self.columns())

    @classmethod
    def from_frame(cls, df: pd.DataFrame, meta: Optional[Dict[str, Any]] = None) -> "Trajectory":
        n = sum(1 for c in df.columns if c.startswith("x") and c[1:].isdigit())
        x = df[[f"x{i + 1}" for i in range(n)]].to_numpy(dtype=float)
        y = df[[f"y{i + 1}" for i in range(n)]].to_numpy(dtype=float)
        return cls(
            times=df["t"].to_numpy(dtype=float),
            x=x,
            y=y,
            u=df["u"].to_numpy(dtype=float),
            V_y=df["V"].to_numpy(dtype=float),
            Psi=df["Psi"].to_numpy(dtype=float),
            d=df["d"].to_numpy(dtype=float),
            delta_norm=df["delta_norm"].to_numpy(dtype=float),
            w_norm=df["w_norm"].to_numpy(dtype=float),
            meta=dict(meta or {}),
        )


def run_scenario(
    cfg: ScenarioConfig,
    gains: Optional[GainSet] = None,
    signals: Optional[SignalPath] = None,
    solver: IlfSolverSettings = DEFAULT_SETTINGS,
) -> Trajectory:
    """Simulate one scenario.

    The delay history starts as the constant V(x0). At each step the
    signals are read at t_k, y_k = x_k + w_k is formed, u_k is computed from
    the history before t_k and held for the Euler step, then V_y(y_k) is
    appended to the history.

    Raises
    - DivergedRunError: if the state becomes non-finite or exceeds 1e12
    """
    g = gains if gains is not None else cfg.gain_set()
    path = signals if signals is not None else realize_signals(cfg)
    n, N, h = cfg.n, cfg.steps, cfg.h
    ctrl = cfg.controller_config()

    x = np.asarray(cfg.x0, dtype=float)
    session = ControllerSession(ctrl, g, h, solve_ilf(x, g.P, solver), solver=solver)

    times = h * np.arange(N)
    xs = np.empty((N, n))
    ys = np.empty((N, n))
    us = np.empty(N)
    vys = np.empty(N)
    psis = np.empty(N)
    logger.info("run %s: controller=%s steps=%d seed=%d", cfg.name, ctrl.kind.value, N, cfg.seed)

    for k in range(N):
        y = x + path.w[k]
        u, V_y, Psi = session.control(y)
        xs[k], ys[k], us[k], vys[k], psis[k] = x, y, u, V_y, Psi
        session.advance(times[k], V_y)
        if k == N - 1:
            break
        x = x + h * plant_derivative(x, u, path.d[k], path.delta[k])
        norm = float(np.linalg.norm(x)) if np.all(np.isfinite(x)) else math.inf
        if norm > DIVERGENCE_LIMIT:
            raise DivergedRunError(k + 1, times[k + 1], norm)

    return Trajectory(
        times=times,
        x=xs,
        y=ys,
        u=us,
        V_y=vys,
        Psi=psis,
        d=path.d.copy(),
        delta_norm=np.linalg.norm(path.delta, axis=1),
        w_norm=np.linalg.norm(path.w, axis=1),
        delta=path.delta.copy(),
        meta={
            "scenario": cfg.name,
            "controller": ctrl.kind.value,
            "seed": cfg.seed,
            "prng": prng_name(),
            "h": h,
            "v_min": ctrl.v_min,
            "chi": ctrl.chi,
            "eta": ctrl.eta,
            "signal_digest": path.digest(),
        },
    )


def run_batch(
    configs: Sequence[ScenarioConfig],
    workers: int = 1,
    signals: Optional[SignalPath] = None,
) -> List[Trajectory]:
    """Run several scenarios, in worker processes when ``workers > 1``; results keep input order.

    A shared ``signals`` path is handed to every run, so the configs must
    agree on n, T and h.
    """
    run = partial(run_scenario, signals=signals)
    if workers <= 1 or len(configs) <= 1:
        return [run(cfg) for cfg in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def check_shared_path(trajectories: Sequence[Trajectory], path: SignalPath) -> None:
    """Raise SignalPathError unless every run recorded ``path``'s digest."""
    expected = path.digest()
    stray = sorted({t.meta["signal_digest"] for t in trajectories} - {expected})
    if stray:
        raise SignalPathError(f"runs saw signal paths {stray} instead of {expected}")



def with_controller(cfg: ScenarioConfig, kind: Union[str, ControllerKind]) -> ScenarioConfig:
    """Copy of ``cfg`` with another controller kind (same seed and signals)."""
    ctrl = cfg.controller.model_copy(update={"kind": ControllerKind(kind)})
    return cfg.model_copy(update={"controller": ctrl, "name": f"{cfg.name}-{ControllerKind(kind).value}"})


__all__ = [
    "PAPER_K",
    "PAPER_P",
    "ContractViolationError",
    "DivergedRunError",
    "SignalPathError",
    "prng_name",
    "make_rng",
    "Waveform",
    "SignalSpec",
    "paper_signals",
    "GainDocument",
    "PAPER_GAIN_DOCUMENT",
    "paper_gain_set",
    "ScenarioConfig",
    "paper_scenario",
    "plant_derivative",
    "eval_signals",
    "SignalPath",
    "realize_signals",
    "Trajectory",
    "run_scenario",
    "run_batch",
    "check_shared_path",
    "with_controller",
]
