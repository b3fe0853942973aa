import numpy as np
import pytest

from balanced_flow import (FalseConvergenceError, FlowConfig, QuadSettings, StepFailure,
                           converged_sequence, initial_step, integrate, make_reference,
                           s_sweep, step)
from balanced_flow.balance import energy, residual
from balanced_flow.flow import FlowTrajectory


def test_initial_step(ref40):
    assert initial_step(ref40, 0.25, 0.9) == pytest.approx(1 / 100.75, rel=1e-9)
    assert initial_step(ref40, 0.0, 0.9) == pytest.approx(1 / 100, rel=1e-9)
    # doubling G_s: scaling every coefficient of the window up doubles I_0
    lam = ref40.values.copy()
    lam[0] += np.log(2.0)
    assert initial_step(lam, 0.0, 0.9) < 1 / 100


def test_step_stationary(ref40):
    res = step(ref40, 0.5, FlowConfig(beta=0.0))
    np.testing.assert_allclose(res.lam_next, ref40.values, atol=1e-9)


def test_step_matches_euler(ref40):
    h = 1e-3
    res = step(ref40, h, FlowConfig(beta=0.25, s=0.9))
    assert res.h_used == h
    assert res.lam_next[0] == pytest.approx(-0.25 * h, rel=1e-2)
    np.testing.assert_array_equal(res.lam_next[21:], ref40.values[21:])


def test_step_energy_not_increasing(ref40):
    cfg = FlowConfig(beta=0.4, s=0.95)
    lam = ref40.values
    F = residual(lam, cfg.beta, cfg.M)
    for _ in range(5):
        res = step(lam, 0.5, cfg, F)
        assert energy(res.residual, cfg.s).E_s <= energy(F, cfg.s).E_s + 1e-8
        lam, F = res.lam_next, res.residual


def test_step_underflow(ref40):
    with pytest.raises(StepFailure):
        step(ref40, 1e-13, FlowConfig(beta=0.3))


def test_beta_zero_converges_immediately(ref40):
    traj = integrate(FlowConfig(beta=0.0, s=0.5))
    assert traj.status == "converged"
    assert len(traj.samples) == 1 and traj.final.t == 0.0
    lam, F = converged_sequence(traj)
    np.testing.assert_array_equal(lam.values, ref40.values)
    assert F.linf() < 1e-9


def test_fixture_run(run03):
    assert run03.status == "converged"
    assert run03.final.linf_F < 1e-6
    t = run03.times
    assert np.all(np.diff(t) > 0)


def test_fixture_invariants(run03):
    beta, s = 0.3, 0.95
    ref = make_reference(40).values
    Es = [smp.energy.E_s for smp in run03.samples]
    for a, b in zip(Es, Es[1:]):
        assert b <= a + 10 * 1e-8 * (1 + a)
    slack = 1e-6
    idx = np.arange(21)
    for smp in run03.samples:
        assert smp.energy.E_s <= beta ** 2 + slack
        assert np.all(np.abs(smp.F) <= beta * s ** (-idx / 2) + slack)
        assert np.linalg.norm(smp.lam - ref) <= beta * smp.t + slack


def test_converged_sequence_fixture(run03):
    lam, F = converged_sequence(run03)
    assert lam.values[0] == 0.0
    assert F.integrals[0] == pytest.approx(0.7, abs=1e-5)
    np.testing.assert_allclose(F.integrals[1:], 1.0, atol=1e-5)


def test_converged_sequence_rejects_time_out():
    traj = integrate(FlowConfig(beta=0.3, t_max=0.05))
    assert traj.status == "time_out"
    with pytest.raises(ValueError):
        converged_sequence(traj)


def test_false_convergence_detected():
    # a run that claims convergence while its final state is far from balanced
    early = integrate(FlowConfig(beta=0.3, t_max=0.01))
    faked = FlowTrajectory(early.config, early.samples, status="converged")
    with pytest.raises(FalseConvergenceError) as info:
        converged_sequence(faked)
    assert info.value.residual_linf > 0.2


def test_deterministic():
    cfg = FlowConfig(beta=0.3, t_max=2.0)
    a, b = integrate(cfg), integrate(cfg)
    assert np.array_equal(a.lam_matrix(), b.lam_matrix())
    assert a.step_log == b.step_log


def test_sweep_trivial_cases():
    res = s_sweep(FlowConfig(beta=0.0), [0.9, 0.99], horizon=1.0, n_grid=5)
    assert np.all(np.asarray(res.distances) == 0)
    single = s_sweep(FlowConfig(beta=0.3), [0.9], horizon=0.5, n_grid=3)
    assert single.distances == []
    with pytest.raises(ValueError):
        s_sweep(FlowConfig(beta=0.3), [0.99, 0.9])


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(beta=1.0)
    with pytest.raises(ValueError):
        FlowConfig(beta=0.3, s=0.0)
    with pytest.raises(ValueError):
        FlowConfig(beta=0.3, N=40, M=39)
    with pytest.raises(ValueError):
        FlowConfig(beta=0.3, N=40, initial=make_reference(20))
    assert FlowConfig(beta=0.3, N=40, quad=QuadSettings()).M == 20
