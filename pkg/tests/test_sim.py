import math
import pickle

import numpy as np
import pytest
from pydantic import ValidationError

from app.api.controllers import ControllerConfig
from app.api.ilf_core import dilation_divide, solve_ilf
from app.api.sim import (
    ContractViolationError,
    DivergedRunError,
    GainDocument,
    ScenarioConfig,
    SignalPathError,
    SignalSpec,
    Waveform,
    check_shared_path,
    eval_signals,
    make_rng,
    paper_scenario,
    paper_signals,
    plant_derivative,
    realize_signals,
    run_batch,
    run_scenario,
    with_controller,
)

ZERO_SIGNALS = SignalSpec(matched=Waveform(), Delta=0.0, noise=0.0)
SCALAR_GAINS = GainDocument(X=[[1.0]], Y=[-2.0], rho1=1.0, rho2=1.0, Delta=0.0)


def test_plant_derivative_examples():
    dx = plant_derivative([1.0, 2.0, 3.0], 0.5, 0.25, [0.0, 0.0, 0.0])
    assert np.array_equal(dx, [2.0, 3.0, 0.75])
    dx = plant_derivative([0.0, 0.0], -1.0, 0.0, [0.1, 0.0])
    assert np.allclose(dx, [0.1, -1.0])
    with pytest.raises(ContractViolationError):
        plant_derivative([0.0, 0.0], 0.0, 0.0, [0.0, 0.1])


def test_eval_signals_paper_profile():
    spec = paper_signals(noise=0.0)
    d, delta, w, _ = eval_signals(0.0, spec, make_rng(1), 3)
    assert d == 0.0
    assert np.allclose(delta, [0.0, 0.05, 0.0])
    assert np.array_equal(w, np.zeros(3))
    d, delta, _, _ = eval_signals(math.pi / 20, spec, make_rng(1), 3)
    assert d == pytest.approx(1.0)
    assert delta == pytest.approx([0.03 * math.sin(3 * math.pi / 20), 0.05 * math.cos(math.pi / 4), 0.0])


def test_zero_noise_consumes_no_draws():
    rng = make_rng(5)
    _, _, _, rng = eval_signals(0.3, paper_signals(noise=0.0), rng, 3)
    assert np.array_equal(rng.random(4), make_rng(5).random(4))


def test_noise_stays_in_range():
    rng = make_rng(5)
    for k in range(200):
        _, _, w, rng = eval_signals(k * 0.01, paper_signals(noise=0.2), rng, 3)
        assert np.all(w >= 0.0) and np.all(w <= 0.2)


def test_signal_spec_validation():
    with pytest.raises(ValidationError):
        SignalSpec(matched=Waveform(kind="sin", amp=2.0, omega=1.0), Delta=1.0)
    with pytest.raises(ValidationError):
        SignalSpec(mismatched=[Waveform(), Waveform(kind="constant", amp=0.1)])
    with pytest.raises(ValidationError):
        SignalSpec(noise=-0.1)


def test_scenario_validation():
    assert paper_scenario().steps == 2001
    with pytest.raises(ValidationError):
        paper_scenario(eta=0.0123)
    with pytest.raises(ValidationError):
        paper_scenario(x0=[1.0, 2.0])
    with pytest.raises(ValidationError):
        paper_scenario(chi=1.0)
    with pytest.raises(ValidationError):
        paper_scenario(T=1e-3)
    with pytest.raises(ValidationError):
        paper_scenario(seed=-1)


def test_gain_document_forms():
    with pytest.raises(ValidationError):
        GainDocument(X=[[1.0]], Y=[1.0])
    with pytest.raises(ValidationError):
        GainDocument(X=[[1.0]], Y=[1.0], P=[[1.0]], K=[1.0], rho2=1.0)
    doc = GainDocument(X=[[1.0]], Y=[[-2.0]], rho2=1.0)
    assert doc.Y == [-2.0]
    with pytest.raises(ValueError):
        GainDocument(n=2, X=[[1.0]], Y=[-2.0], rho2=1.0).to_gain_set()


def _zero_scenario(**overrides):
    base = dict(name="zero", n=1, T=0.1, x0=[0.0], gains=SCALAR_GAINS, signals=ZERO_SIGNALS)
    base.update(overrides)
    return ScenarioConfig(**base)


def test_zero_scenario_stays_at_rest():
    traj = run_scenario(_zero_scenario())
    assert len(traj) == 21
    for arr in (traj.x, traj.y, traj.u, traj.V_y, traj.Psi):
        assert not np.any(arr)


def test_runs_are_deterministic_and_measure_with_noise():
    cfg = paper_scenario(seed=7, T=0.5)
    a = run_scenario(cfg)
    b = run_scenario(cfg)
    assert a.to_frame().equals(b.to_frame())
    assert a.meta["signal_digest"] == b.meta["signal_digest"]
    assert np.array_equal(a.y, a.x + realize_signals(cfg).w)
    assert np.all(a.w_norm > 0)
    other = run_scenario(paper_scenario(seed=8, T=0.5))
    assert other.meta["signal_digest"] != a.meta["signal_digest"]


def test_controllers_share_the_signal_path():
    cfg = paper_scenario(seed=3, T=0.2)
    digests = {run_scenario(with_controller(cfg, kind)).meta["signal_digest"] for kind in ("delayed", "finite_time")}
    assert len(digests) == 1


def test_recorded_control_matches_law(paper_gains):
    traj = run_scenario(paper_scenario(seed=11, T=1.0))
    v_min = traj.meta["v_min"]
    for k in range(0, len(traj), 17):
        scale = max(traj.Psi[k], v_min)
        expected = float(paper_gains.K @ dilation_divide(scale, traj.y[k]))
        assert traj.u[k] == pytest.approx(expected, rel=1e-12, abs=1e-12)
        assert traj.Psi[k] >= traj.V_y[k]


def test_delayed_psi_uses_the_window(paper_gains):
    cfg = paper_scenario(seed=2, T=1.0)
    traj = run_scenario(cfg)
    chi = traj.meta["chi"]
    V0 = solve_ilf(np.asarray(cfg.x0), paper_gains.P)
    # history before t = 0 is the constant V(x0)
    assert traj.Psi[0] == pytest.approx(max(traj.V_y[0], math.exp(1 - chi) * min(V0, V0**chi)), rel=1e-12)
    k = 100
    M = traj.V_y[k - 20 : k].max()
    expected = max(traj.V_y[k], math.exp(1 - chi) * min(M, M**chi))
    assert traj.Psi[k] == pytest.approx(expected, rel=1e-12)


def test_undisturbed_run_converges():
    signals = paper_signals(noise=0.0, mismatched=False, matched=False)
    traj = run_scenario(paper_scenario(signals=signals, T=3.0))
    assert traj.V_y[-1] < 1e-3 * traj.V_y[0]


def test_batch_in_workers_matches_sequential():
    cfgs = [paper_scenario(seed=s, T=0.2) for s in (1, 2)]
    seq = run_batch(cfgs)
    par = run_batch(cfgs, workers=2)
    for a, b in zip(seq, par):
        assert a.to_frame().equals(b.to_frame())


def test_batch_shares_a_given_signal_path():
    cfg = paper_scenario(seed=3, T=0.2)
    path = realize_signals(cfg)
    cfgs = [with_controller(cfg, kind) for kind in ("delayed", "finite_time")]
    trajs = run_batch(cfgs, workers=2, signals=path)
    assert {t.meta["signal_digest"] for t in trajs} == {path.digest()}
    check_shared_path(trajs, path)
    other = realize_signals(paper_scenario(seed=4, T=0.2))
    with pytest.raises(SignalPathError):
        check_shared_path(trajs, other)


def test_divergence_is_reported():
    unstable = GainDocument(X=[[1.0]], Y=[10.0], rho1=1.0, rho2=1.0, Delta=0.0)
    cfg = _zero_scenario(T=5.0, x0=[1.0], gains=unstable, controller=ControllerConfig(kind="linear"))
    with pytest.raises(DivergedRunError) as info:
        run_scenario(cfg)
    err = info.value
    assert 0 < err.step < cfg.steps
    assert err.time == pytest.approx(err.step * cfg.h)
    clone = pickle.loads(pickle.dumps(err))
    assert clone.step == err.step


def test_frame_roundtrip_columns():
    gains = GainDocument(X=[[1.0, 0.0], [0.0, 1.0]], Y=[-1.0, -2.0], rho2=0.5)
    traj = run_scenario(_zero_scenario(n=2, x0=[0.0, 0.0], gains=gains))
    frame = traj.to_frame()
    assert list(frame.columns) == ["t", "x1", "x2", "y1", "y2", "u", "V", "Psi", "d", "delta_norm", "w_norm"]
    back = type(traj).from_frame(frame)
    assert back.n == 2 and np.array_equal(back.times, traj.times)
