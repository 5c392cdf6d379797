import numpy as np
import pytest

from ftflow.flow import FlowParams, FlowState, conservative_params
from ftflow.integrate import (
    IntegrationError,
    IntegratorConfig,
    detect_settling,
    dopri5_step,
    integrate,
    integrate_field,
)
from ftflow.objectives import p_power, quadratic, rosenbrock

PP_CFG = IntegratorConfig(
    rel_tol=1e-10, abs_tol=1e-13, t_max=50.0, settle_tol=1e-9, record_stride=0.02
)


def ppower_traj(alpha, t_max=50.0):
    state = FlowState(theta=np.array([1.0, 0.0]), v=np.zeros(2))
    params = FlowParams(alpha=alpha, beta=0.5, gamma=0.5, kappa=1.0)
    cfg = PP_CFG if t_max == 50.0 else IntegratorConfig(
        rel_tol=1e-10, abs_tol=1e-13, t_max=t_max, settle_tol=1e-9, record_stride=0.02
    )
    return integrate(state, params, p_power(2.0), cfg)


class TestConfig:
    def test_defaults_valid(self):
        IntegratorConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(min_step=0.0),
            dict(initial_step=2.0, max_step=1.0),
            dict(settle_tol=1e-14),  # below the singular tolerance
            dict(t_max=0.0),
            dict(record_stride=0.0),
            dict(rel_tol=0.0),
            dict(abs_tol=-1.0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorConfig(**kwargs)


class TestStepper:
    def test_single_step_is_fifth_order(self):
        f = lambda t, y: y
        y0 = np.array([1.0])
        errors = []
        for h in (0.1, 0.05):
            y1, _, _ = dopri5_step(f, 0.0, y0, h, f(0.0, y0))
            errors.append(abs(float(y1[0]) - np.exp(h)))
        # halving h must shrink the local error by about 2^6
        assert errors[0] / errors[1] > 40.0

    def test_embedded_error_estimate_bounds_true_error(self):
        # the estimate tracks the 4th-order member, so it is a conservative
        # bound on the 5th-order solution's error and shrinks like h^5
        f = lambda t, y: y
        y0 = np.array([1.0])
        estimates = []
        for h in (0.1, 0.05):
            y1, err, _ = dopri5_step(f, 0.0, y0, h, f(0.0, y0))
            true = abs(float(y1[0]) - np.exp(h))
            assert abs(float(err[0])) > true
            estimates.append(abs(float(err[0])))
        assert 20.0 < estimates[0] / estimates[1] < 50.0

    def test_generic_driver_exponential_decay(self):
        t1, y1 = integrate_field(lambda t, y: -y, np.array([1.0]), 0.0, 1.0)
        assert t1 == pytest.approx(1.0)
        assert float(y1[0]) == pytest.approx(np.exp(-1.0), rel=1e-8)

    def test_generic_driver_harmonic_oscillator(self):
        f = lambda t, y: np.array([y[1], -y[0]])
        _, y1 = integrate_field(f, np.array([1.0, 0.0]), 0.0, 2.0 * np.pi)
        np.testing.assert_allclose(y1, [1.0, 0.0], atol=1e-6)


class TestIntegrateFlow:
    def test_unscaled_linear_flow_matches_closed_form(self):
        # alpha = 0, beta = gamma = 0.5, kappa = 1 on f = ||theta||^2/2 is a
        # linear system whose stacked norm decays exactly like e^(-t/2)
        traj = ppower_traj(0.0, t_max=10.0)
        expected = np.exp(-0.5 * traj.times)
        np.testing.assert_allclose(traj.z_norm, expected, rtol=1e-6)

    def test_settles_with_bisection_refinement(self):
        traj = ppower_traj(-0.8)
        assert traj.terminated_reason == "settled"
        assert traj.settled_at == pytest.approx(2.5, abs=1e-5)
        assert traj.times[-1] == traj.settled_at
        assert traj.z_norm[-1] <= PP_CFG.settle_tol

    def test_stiff_finish_on_smooth_minimum(self):
        # the Rosenbrock minimum is stiff for the explicit pair; the run
        # must still settle (implicit finish) at the cross-checked time
        state = FlowState(theta=np.array([-1.5, 2.0]), v=np.zeros(2))
        params = FlowParams(alpha=-0.5, beta=0.5, gamma=0.5, kappa=1.0)
        cfg = IntegratorConfig(
            rel_tol=1e-8, abs_tol=1e-12, t_max=50.0, settle_tol=1e-9, record_stride=0.02
        )
        traj = integrate(state, params, rosenbrock(), cfg)
        assert traj.terminated_reason == "settled"
        assert traj.settled_at == pytest.approx(8.167812, abs=1e-3)

    def test_start_at_equilibrium(self):
        state = FlowState(theta=np.array([1.0, 1.0]), v=np.zeros(2))
        params = FlowParams(alpha=-0.5, beta=0.5, gamma=0.5, kappa=1.0)
        traj = integrate(state, params, rosenbrock())
        assert traj.settled_at == 0.0
        assert traj.terminated_reason == "settled"
        assert len(traj) == 1

    def test_dimension_mismatch(self):
        state = FlowState(theta=np.zeros(3), v=np.zeros(3))
        params = FlowParams(alpha=-0.5, beta=0.5, gamma=0.5, kappa=1.0)
        with pytest.raises(IntegrationError):
            integrate(state, params, rosenbrock())

    def test_recording_grid(self):
        traj = ppower_traj(-0.8)
        dt = np.diff(traj.times)
        assert np.all(dt > 0.0)
        assert np.max(dt) <= PP_CFG.record_stride + 1e-12

    def test_energy_channel_only_for_conservative(self):
        dissipative = ppower_traj(-0.8)
        assert dissipative.energy is None
        state = FlowState(theta=np.array([1.0, 0.0]), v=np.zeros(2))
        cfg = IntegratorConfig(t_max=1.0)
        traj = integrate(
            state, conservative_params(alpha=0.0, kappa=1.0), quadratic([1.0, 1.0]), cfg
        )
        assert traj.energy is not None
        assert traj.settled_at is None

    def test_trajectory_views(self):
        traj = ppower_traj(-0.8)
        assert traj.thetas.shape == (len(traj), 2)
        assert traj.vs.shape == (len(traj), 2)
        s = traj.state_at(0)
        np.testing.assert_allclose(s.theta, [1.0, 0.0])
        np.testing.assert_allclose(s.v, [0.0, 0.0])


class TestDetectSettling:
    def test_agrees_with_integrator(self):
        traj = ppower_traj(-0.8)
        t = detect_settling(traj, PP_CFG.settle_tol)
        assert t is not None
        assert t == pytest.approx(traj.settled_at, abs=0.02)

    def test_none_when_not_settled(self):
        traj = ppower_traj(0.0, t_max=5.0)
        assert detect_settling(traj, 1e-9) is None

    def test_threshold_dependence(self):
        # a looser threshold must be crossed earlier
        traj = ppower_traj(0.0, t_max=20.0)
        t_loose = detect_settling(traj, 1e-3)
        assert t_loose is not None
        # closed form: e^(-t/2) = 1e-3 at t = 6 ln 10
        assert t_loose == pytest.approx(6.0 * np.log(10.0), abs=0.05)

    def test_needs_two_samples(self):
        traj = ppower_traj(-0.8)
        short = type(traj)(
            times=traj.times[:1],
            states=traj.states[:1],
            dim=traj.dim,
            f=traj.f[:1],
            V=traj.V[:1],
            Vdot=traj.Vdot[:1],
            z_norm=traj.z_norm[:1],
            energy=None,
            settled_at=None,
            terminated_reason="horizon",
        )
        with pytest.raises(ValueError):
            detect_settling(short, 1e-9)
