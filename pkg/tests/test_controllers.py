import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.api.controllers import (
    BufferStateError,
    ControllerConfig,
    ControllerKind,
    ControllerSession,
    DelayBuffer,
    delayed_control,
    finite_time_control,
    psi,
    smc_first_order,
    super_twisting_step,
)
from app.api.gains import GainSet
from app.api.ilf_core import DomainError, solve_ilf

Y6 = np.array([0.1, 1.0, 3.0])


def test_buffer_window_and_constant_history():
    buf = DelayBuffer.for_window(0.1, 5e-3)
    assert buf.capacity == 21
    full = DelayBuffer.constant(2.0, 21, 5e-3)
    assert len(full) == 20
    assert full.max() == 2.0
    assert full.times()[0] == pytest.approx(-0.1)
    assert full.times()[-1] == pytest.approx(-5e-3)
    full.append(0.0, 1.0)
    assert len(full) == 21
    assert full.times()[-1] == 0.0


def test_buffer_rejects_bad_samples():
    buf = DelayBuffer(3)
    with pytest.raises(BufferStateError):
        buf.max()
    buf.append(0.0, 1.0)
    with pytest.raises(BufferStateError):
        buf.append(0.0, 1.0)
    with pytest.raises(BufferStateError):
        buf.append(1.0, -1.0)
    with pytest.raises(BufferStateError):
        DelayBuffer(0)


def test_buffer_max_skips_the_oldest_sample():
    buf = DelayBuffer(3)
    for t, v in ((0.0, 9.0), (1.0, 1.0), (2.0, 2.0)):
        buf.append(t, v)
    assert len(buf) == 3
    assert buf.max() == 2.0
    assert DelayBuffer(1).span == 1


def test_psi_examples():
    ones = DelayBuffer.constant(1.0, 5, 0.01)
    assert psi(1.0, ones, 1.1) == 1.0
    e_hist = DelayBuffer.constant(math.e, 5, 0.01)
    assert psi(0.0, e_hist, 2.0) == pytest.approx(1.0)
    half = DelayBuffer.constant(0.5, 5, 0.01)
    assert psi(0.05, half, 2.0) == pytest.approx(0.25 / math.e)
    with pytest.raises(DomainError):
        psi(0.05, half, 1.0)


def test_finite_time_zero_and_scalar_relay():
    g = GainSet(X=np.array([[1.0]]), Y=np.array([-5.0]), rho1=1.0, rho2=1.0)
    assert finite_time_control(np.zeros(1), g, 0.1) == (0.0, 0.0)
    for y in (0.7, -2.0, 13.0):
        u, V = finite_time_control(np.array([y]), g, 0.0)
        assert V == pytest.approx(abs(y), rel=1e-11)
        assert u == pytest.approx(-5.0 * math.copysign(1.0, y), rel=1e-10)


def test_finite_time_matches_reevaluation(paper_gains):
    u, V = finite_time_control(Y6, paper_gains, 0.1)
    assert V == solve_ilf(Y6, paper_gains.P)
    r = np.array([3, 2, 1])
    expected = float(paper_gains.K @ (Y6 / max(V, 0.1) ** r))
    assert u == pytest.approx(expected, rel=1e-12)


def test_delayed_zero_state():
    g = GainSet(X=np.eye(2), Y=np.array([-1.0, -2.0]), rho1=1.0, rho2=0.5)
    cfg = ControllerConfig(kind="delayed", v_min=0.0)
    buf = DelayBuffer.constant(0.0, 5, 0.01)
    assert delayed_control(np.zeros(2), buf, g, cfg) == (0.0, 0.0, 0.0)


def test_delayed_equals_finite_time_when_current_value_dominates(paper_gains):
    cfg = ControllerConfig(kind="delayed", v_min=0.1)
    V = solve_ilf(Y6, paper_gains.P)
    buf = DelayBuffer.constant(0.5 * V, 21, 5e-3)
    u_d, V_y, Psi = delayed_control(Y6, buf, paper_gains, cfg)
    u_f, _ = finite_time_control(Y6, paper_gains, 0.1)
    assert Psi == V_y
    assert u_d == u_f


def test_delayed_uses_history_maximum(paper_gains):
    cfg = ControllerConfig(kind="delayed", v_min=0.1)
    buf = DelayBuffer.constant(1.0e4, 21, 5e-3)
    u, V_y, Psi = delayed_control(Y6, buf, paper_gains, cfg)
    assert Psi == pytest.approx(math.exp(-0.1) * 1.0e4)
    assert Psi > V_y
    r = np.array([3, 2, 1])
    assert u == pytest.approx(float(paper_gains.K @ (Y6 / Psi**r)), rel=1e-12)


def test_smc_examples():
    assert smc_first_order([1.0, 0.0], k=5.0, a=1.0) == -5.0
    assert smc_first_order([1.0, -1.0], k=5.0, a=1.0) == 0.0
    assert smc_first_order([-2.0, 1.0], k=3.0, a=0.5) == 0.0
    with pytest.raises(DomainError):
        smc_first_order([1.0, 2.0, 3.0], k=1.0, a=1.0)


def test_super_twisting_examples():
    assert super_twisting_step(0.0, 0.0, 1.0, 2.0, 0.01) == (0.0, 0.0)
    u, z = super_twisting_step(4.0, 1.0, 1.0, 2.0, 0.01)
    assert u == pytest.approx(-1.0) and z == pytest.approx(0.98)
    u, z = super_twisting_step(-4.0, 0.0, 1.0, 2.0, 0.01)
    assert u == pytest.approx(2.0) and z == pytest.approx(0.02)


def test_config_validation():
    with pytest.raises(ValidationError):
        ControllerConfig(kind="delayed", chi=1.0)
    with pytest.raises(ValidationError):
        ControllerConfig(kind="delayed", eta=0.0)
    assert ControllerConfig(kind="finite_time", chi=1.0).kind is ControllerKind.finite_time
    with pytest.raises(ValidationError):
        ControllerConfig(kind="quasi_continuous")


def test_session_buffer_covers_last_window(paper_gains):
    h = 5e-3
    session = ControllerSession(ControllerConfig(kind="delayed"), paper_gains, h, initial_value=1.0)
    assert session.buffer.times()[0] == pytest.approx(-0.1)
    for k in range(40):
        _, V_y, _ = session.control(Y6 * 0.9**k)
        session.advance(k * h, V_y)
    times = session.buffer.times()
    assert len(times) == 21
    assert times[0] == pytest.approx(19 * h) and times[-1] == pytest.approx(39 * h)


def test_session_baselines_need_two_states(paper_gains):
    with pytest.raises(DomainError):
        ControllerSession(ControllerConfig(kind="smc1"), paper_gains, 5e-3, initial_value=0.0)


def test_session_super_twisting_integrates():
    g = GainSet(X=np.eye(2), Y=np.array([-1.0, -2.0]), rho1=1.0, rho2=0.5)
    cfg = ControllerConfig(kind="super_twisting", l1=1.0, l2=2.0, a=1.0)
    session = ControllerSession(cfg, g, 0.01, initial_value=0.0)
    u, _, _ = session.control(np.array([3.0, 1.0]))
    assert u == pytest.approx(-2.0)
    session.advance(0.0, 0.0)
    assert session.z == pytest.approx(-0.02)
