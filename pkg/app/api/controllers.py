"""Control laws for DelaySlide.

- ``finite_time_control``: u = K D_r(V_y^-1) y with V_y the ILF of the
  measurement
- ``delayed_control``: the same law scheduled by the delayed functional
  Psi = max[V_y(t), e^(1-chi) min(M, M^chi)], M the history maximum
- ``smc_first_order`` and ``super_twisting_step``: the two-dimensional
  sliding-mode baselines, with sign(0) = 0

The laws are stateless. The delay history and the super-twisting integral
live in caller-owned objects (``DelayBuffer`` and ``ControllerSession``).
"""

from __future__ import annotations

import logging
import math
from collections import deque
from enum import Enum
from itertools import islice
from typing import Deque, Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.api.gains import GainSet
from app.api.ilf_core import (
    DEFAULT_SETTINGS,
    DomainError,
    IlfError,
    IlfSolverSettings,
    dilation_divide,
    solve_ilf,
)

logger = logging.getLogger(__name__)


class BufferStateError(IlfError):
    """Raised when the delay buffer is queried empty or fed out of order."""


class ControllerKind(str, Enum):
    finite_time = "finite_time"
    delayed = "delayed"
    smc1 = "smc1"
    super_twisting = "super_twisting"
    linear = "linear"


class ControllerConfig(BaseModel):
    """Controller selection and tuning."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ControllerKind = Field(ControllerKind.delayed, description="Control law")
    chi: float = Field(1.1, description="Delayed law exponent, > 1")
    eta: float = Field(0.1, description="Delay window length in seconds, > 0")
    v_min: float = Field(0.1, ge=0.0, description="Lower clamp on V inside the dilation")
    k: float = Field(5.0, gt=0.0, description="First-order SMC gain")
    a: float = Field(1.0, gt=0.0, description="Sliding surface slope, sigma = y2 + a*y1")
    l1: float = Field(1.5, gt=0.0, description="Super-twisting proportional gain")
    l2: float = Field(1.1, gt=0.0, description="Super-twisting integral gain")

    @model_validator(mode="after")
    def _delayed_parameters(self) -> "ControllerConfig":
        if self.kind == ControllerKind.delayed and not (self.chi > 1 and self.eta > 0):
            raise ValueError("the delayed controller needs chi > 1 and eta > 0")
        return self


class DelayBuffer:
    """Fixed-capacity ring of (time, V_y) samples over the delay window.

    A buffer built for a window of eta seconds at step h holds
    round(eta/h) + 1 samples, covering [t - eta, t] once the current value
    is appended. ``max`` is queried before that append and reads the
    newest ``capacity - 1`` samples, i.e. [t - eta, t - h].
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise BufferStateError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.span = max(1, self.capacity - 1)
        self._samples: Deque[Tuple[float, float]] = deque(maxlen=self.capacity)

    @classmethod
    def for_window(cls, eta: float, h: float) -> "DelayBuffer":
        return cls(int(round(eta / h)) + 1)

    @classmethod
    def constant(cls, value: float, capacity: int, h: float, t0: float = 0.0) -> "DelayBuffer":
        """Buffer holding a constant history on [t0 - span*h, t0 - h]."""
        buf = cls(capacity)
        for j in range(buf.span):
            buf.append(t0 - (buf.span - j) * h, value)
        return buf

    def append(self, t: float, value: float) -> None:
        if not value >= 0:
            raise BufferStateError(f"ILF samples must be nonnegative, got {value}")
        if self._samples and t <= self._samples[-1][0]:
            raise BufferStateError(f"timestamp {t} does not follow {self._samples[-1][0]}")
        self._samples.append((float(t), float(value)))

    def max(self) -> float:
        """Maximum over the newest ``span`` samples."""
        if not self._samples:
            raise BufferStateError("delay buffer is empty")
        return max(v for _, v in islice(reversed(self._samples), self.span))


    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self._samples])

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self._samples])

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(self._samples)


def ilf_feedback(y: np.ndarray, K: np.ndarray, scale: float, v_min: float) -> float:
    """u = K D_r(max(scale, v_min)^-1) y, and 0 when the clamped scale is 0."""
    v = max(scale, v_min)
    if v == 0.0:
        return 0.0
    return float(K @ dilation_divide(v, y))


def finite_time_control(
    y: np.ndarray, g: GainSet, v_min: float, solver: IlfSolverSettings = DEFAULT_SETTINGS
) -> Tuple[float, float]:
    """Return (u, V_y) for the finite-time ILF law."""
    if v_min < 0:
        raise DomainError("v_min must be nonnegative")
    y = np.asarray(y, dtype=float)
    V_y = solve_ilf(y, g.P, solver)
    if V_y == 0.0:
        return 0.0, 0.0
    return ilf_feedback(y, g.K, V_y, v_min), V_y


def psi(V_now: float, buffer: DelayBuffer, chi: float) -> float:
    """Psi = max[V_now, e^(1-chi) min(M, M^chi)] with M the buffer maximum."""
    if not chi > 1:
        raise DomainError(f"chi must be > 1, got {chi}")
    M = buffer.max()
    return max(V_now, math.exp(1.0 - chi) * min(M, M**chi))


def delayed_control(
    y: np.ndarray,
    buffer: DelayBuffer,
    g: GainSet,
    cfg: ControllerConfig,
    solver: IlfSolverSettings = DEFAULT_SETTINGS,
) -> Tuple[float, float, float]:
    """Return (u, V_y, Psi). The caller appends V_y to the buffer after the step."""
    y = np.asarray(y, dtype=float)
    V_y = solve_ilf(y, g.P, solver)
    Psi = psi(V_y, buffer, cfg.chi)
    return ilf_feedback(y, g.K, Psi, cfg.v_min), V_y, Psi


def _two_dimensional(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != 2:
        raise DomainError(f"sliding-mode baselines need a 2-vector, got {y.size} entries")
    return y


def smc_first_order(y: np.ndarray, k: float, a: float) -> float:
    """u = -k sign(y2 + a y1)."""
    y = _two_dimensional(y)
    return float(-k * np.sign(y[1] + a * y[0]))


def super_twisting_step(sigma: float, z: float, l1: float, l2: float, h: float) -> Tuple[float, float]:
    """One explicit-Euler step of u = -l1 sqrt|sigma| sign(sigma) + z, z' = -l2 sign(sigma)."""
    s = float(np.sign(sigma))
    u = -l1 * math.sqrt(abs(sigma)) * s + z
    return u, z - l2 * s * h


class ControllerSession:
    """Per-run controller state: the delay buffer or the super-twisting integral.

    ``control`` computes (u, V_y, Psi) from the history strictly before the
    current step; ``advance`` commits the step afterwards.
    """

    def __init__(
        self,
        cfg: ControllerConfig,
        gains: GainSet,
        h: float,
        initial_value: float,
        t0: float = 0.0,
        solver: IlfSolverSettings = DEFAULT_SETTINGS,
    ) -> None:
        self.cfg = cfg
        self.gains = gains
        self.h = h
        self.solver = solver
        self.buffer: Optional[DelayBuffer] = None
        self.z = 0.0
        self._sigma = 0.0
        if cfg.kind == ControllerKind.delayed:
            capacity = DelayBuffer.for_window(cfg.eta, h).capacity
            self.buffer = DelayBuffer.constant(initial_value, capacity, h, t0)
        if cfg.kind in (ControllerKind.smc1, ControllerKind.super_twisting) and gains.n != 2:
            raise DomainError(f"{cfg.kind.value} is defined for n = 2, got n = {gains.n}")

    def control(self, y: np.ndarray) -> Tuple[float, float, float]:
        kind = self.cfg.kind
        if kind == ControllerKind.delayed:
            return delayed_control(y, self.buffer, self.gains, self.cfg, self.solver)
        if kind == ControllerKind.finite_time:
            u, V_y = finite_time_control(y, self.gains, self.cfg.v_min, self.solver)
            return u, V_y, V_y
        V_y = solve_ilf(y, self.gains.P, self.solver)
        if kind == ControllerKind.linear:
            return float(self.gains.K @ np.asarray(y, dtype=float)), V_y, V_y
        if kind == ControllerKind.smc1:
            return smc_first_order(y, self.cfg.k, self.cfg.a), V_y, V_y
        self._sigma = float(y[1] + self.cfg.a * y[0])
        u, _ = super_twisting_step(self._sigma, self.z, self.cfg.l1, self.cfg.l2, self.h)
        return u, V_y, V_y

    def advance(self, t: float, V_y: float) -> None:
        if self.buffer is not None:
            self.buffer.append(t, V_y)
        elif self.cfg.kind == ControllerKind.super_twisting:
            _, self.z = super_twisting_step(self._sigma, self.z, self.cfg.l1, self.cfg.l2, self.h)


__all__ = [
    "BufferStateError",
    "ControllerKind",
    "ControllerConfig",
    "DelayBuffer",
    "ilf_feedback",
    "finite_time_control",
    "psi",
    "delayed_control",
    "smc_first_order",
    "super_twisting_step",
    "ControllerSession",
]
