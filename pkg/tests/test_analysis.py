import math

import numpy as np
import pytest

from app.api.analysis import (
    hyperexp_diagnostic,
    identification_error,
    ilf_sandwich,
    metric_bundle,
    noise_gain_membership,
    steady_state_bound,
    total_variation,
)
from app.api.ilf_core import DomainError, dilation_apply, dilation_divide, solve_ilf
from app.api.sim import Trajectory, paper_scenario, paper_signals, run_scenario, with_controller
from app.validation import decrease_monitor, razumikhin_monitor


def _trajectory(times, x, V_y=None, Psi=None, w=None, meta=None):
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    N = times.size
    w = np.zeros_like(x) if w is None else np.asarray(w, dtype=float)
    V_y = np.zeros(N) if V_y is None else np.asarray(V_y, dtype=float)
    return Trajectory(
        times=times,
        x=x,
        y=x + w,
        u=np.zeros(N),
        V_y=V_y,
        Psi=V_y.copy() if Psi is None else np.asarray(Psi, dtype=float),
        d=np.zeros(N),
        delta_norm=np.zeros(N),
        w_norm=np.linalg.norm(w, axis=1),
        meta=dict(meta or {}),
    )


def test_total_variation_examples():
    assert total_variation([1.0, -1.0, 1.0]) == 4.0
    assert total_variation([2.5]) == 0.0
    assert total_variation(np.linspace(0, 3, 31)) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        total_variation([])


def test_hyperexp_slope_of_exact_profile():
    t = np.linspace(0.0, 1.0, 201)
    assert hyperexp_diagnostic(t, np.exp(-np.exp(t)), (0.0, 1.0)) == pytest.approx(1.0, abs=1e-6)


def test_hyperexp_separates_plain_exponential():
    t = np.linspace(0.0, 4.0, 401)
    slope = hyperexp_diagnostic(t, np.exp(-3.0 * t), (1.0, 3.0))
    assert 0.0 < slope < 0.6


def test_hyperexp_rejects_bad_windows():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(DomainError):
        hyperexp_diagnostic(t, np.full(11, 1.5), (0.0, 1.0))
    with pytest.raises(DomainError):
        hyperexp_diagnostic(t, np.full(11, 0.5), (0.95, 0.99))


def test_identification_examples():
    t = np.linspace(0, 10, 1001)
    d = np.sin(10 * t)
    err, corr = identification_error(t, -d, d, 5.0)
    assert err == 0.0 and corr == pytest.approx(1.0)
    err, corr = identification_error(t, np.zeros_like(t), d, 5.0)
    assert corr == 0.0
    assert err == pytest.approx(np.mean(np.abs(d[t >= 5.0])))
    with pytest.raises(DomainError):
        identification_error(t, d, d, 20.0)


def test_steady_state_bound_examples():
    t = np.linspace(0, 10, 11)
    assert steady_state_bound(_trajectory(t, np.zeros((11, 2)))) == 0.0
    assert steady_state_bound(_trajectory(t, np.tile([3.0, 4.0], (11, 1)))) == 5.0
    with pytest.raises(DomainError):
        steady_state_bound(_trajectory(t, np.zeros((11, 2))), t_start=11.0)


def test_sandwich_and_membership(n2_gains, n2_iss):
    assert ilf_sandwich(1.0, 1.0, 1.1)
    assert not ilf_sandwich(1.0, 2.0, 1.1)
    x = np.array([0.4, -0.7])
    V = solve_ilf(x, n2_gains.P)
    assert noise_gain_membership(x, np.zeros(2), V, n2_gains, n2_iss)
    assert not noise_gain_membership(x, np.zeros(2), 0.0, n2_gains, n2_iss)
    assert not noise_gain_membership(x, np.array([50.0, 50.0]), V, n2_gains, n2_iss)


def test_monitor_on_resting_trajectory(n2_gains, n2_iss):
    traj = _trajectory(np.arange(50) * 0.01, np.zeros((50, 2)), meta={"h": 0.01, "v_min": 0.0})
    report = razumikhin_monitor(traj, n2_gains, n2_iss, chi=1.1)
    assert report.passed
    assert report.checked_steps == 50 and report.triggered_steps == 0
    with pytest.raises(DomainError):
        razumikhin_monitor(traj, n2_gains, n2_iss, chi=1.5)


def test_monitor_flags_growing_ilf(n2_gains, n2_iss):
    y = np.array([0.3, -1.2])
    x_unit = dilation_divide(solve_ilf(y, n2_gains.P), y)
    lams = np.linspace(1.0, 2.0, 30)
    x = np.array([dilation_apply(lam, x_unit) for lam in lams])
    traj = _trajectory(np.arange(30) * 0.01, x, V_y=lams, meta={"h": 0.01, "v_min": 0.0})
    report = razumikhin_monitor(traj, n2_gains, n2_iss, chi=1.1)
    assert report.triggered_steps == 29
    assert len(report.violations) == 29
    assert report.max_violation > 0
    assert report.to_dict()["violations"][0]["step"] == 0


@pytest.fixture(scope="module")
def n2_runs(n2_scenario):
    return {kind: run_scenario(with_controller(n2_scenario, kind)) for kind in ("delayed", "finite_time")}


def test_delayed_run_satisfies_razumikhin_decrease(n2_runs, n2_gains, n2_iss):
    report = razumikhin_monitor(n2_runs["delayed"], n2_gains, n2_iss, chi=1.1)
    assert report.triggered_steps > 0
    assert report.passed, report.violations[:5]


def test_finite_time_run_satisfies_decrease(n2_runs, n2_gains):
    report = decrease_monitor(n2_runs["finite_time"], n2_gains)
    assert report.triggered_steps > 0
    assert report.passed, report.violations[:5]


@pytest.fixture(scope="module")
def paper_runs():
    cfg = paper_scenario(seed=42)
    return {kind: run_scenario(with_controller(cfg, kind)) for kind in ("delayed", "finite_time")}


def test_delayed_law_chatters_less(paper_runs):
    delayed, finite = paper_runs["delayed"], paper_runs["finite_time"]
    assert delayed.meta["signal_digest"] == finite.meta["signal_digest"]
    assert total_variation(delayed.u) < total_variation(finite.u)


def test_metric_bundle_keys(paper_runs):
    metrics = metric_bundle(paper_runs["delayed"])
    assert set(metrics) == {
        "total_variation",
        "identification_mean_abs_error",
        "identification_correlation",
        "steady_state_bound",
        "final_V_y",
        "max_abs_u",
    }
    assert all(math.isfinite(v) for v in metrics.values())


def test_noise_free_run_identifies_disturbance():
    traj = run_scenario(paper_scenario(signals=paper_signals(noise=0.0, mismatched=False)))
    _, corr = identification_error(traj.times, traj.u, traj.d, 5.0)
    assert corr >= 0.9
    assert traj.V_y.min() <= 0.2


def test_undisturbed_decay_is_faster_than_exponential():
    signals = paper_signals(noise=0.0, mismatched=False, matched=False)
    traj = run_scenario(paper_scenario(signals=signals, T=3.0))
    assert hyperexp_diagnostic(traj.times, traj.V_y, (1.0, 3.0)) > 0.0


def test_steady_state_grows_with_noise():
    bounds = {}
    for noise in (0.0, 0.05, 0.1, 0.2):
        traj = run_scenario(paper_scenario(seed=42, signals=paper_signals(noise=noise)))
        bounds[noise] = steady_state_bound(traj)
    assert all(math.isfinite(b) for b in bounds.values())
    assert bounds[0.0] < bounds[0.05] <= bounds[0.1] <= bounds[0.2]
