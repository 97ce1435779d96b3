"""Continuous-flow layer: right-hand side, integrator order, discretization gap."""

import numpy as np
import pytest

from innaprop.errors import ContractViolation
from innaprop.numerics import ParamVector, RngStream
from innaprop.ode import (
    DinFlowSpec,
    discretization_gap,
    din_rhs,
    richardson_ratio,
    rk4_integrate,
)
from innaprop.problems import Problem, make_problem

QUAD = make_problem("quadratic", spectrum=(1.0, 10.0))


def flat_problem(dim=2):
    return Problem(
        name="flat",
        dim=dim,
        loss=lambda theta, batch=None: 0.0,
        grad=lambda theta, batch=None: np.zeros(dim),
        init_theta=lambda rng: np.ones(dim),
    )


class TestRhs:
    def test_equilibrium_at_critical_pairing(self):
        spec = DinFlowSpec(0.5, 0.9, QUAD, t_end=1.0, dt=1e-2)
        theta = ParamVector([0.0, 0.0])
        psi = ParamVector((1 - 0.5 * 0.9) * theta.data)
        dth, dps = din_rhs(theta, psi, spec)
        assert np.linalg.norm(dth.data) < 1e-14
        assert np.linalg.norm(dps.data) < 1e-14

    def test_literal_scalar_substitution(self):
        # alpha=1, beta=1, psi=0 on J(t)=t^2/2 at theta=1: dtheta = -1.
        prob = make_problem("quadratic", spectrum=(1.0,))
        spec = DinFlowSpec(1.0, 1.0, prob, t_end=1.0, dt=1e-2)
        dth, dps = din_rhs(ParamVector([1.0]), ParamVector([0.0]), spec)
        assert dth.data[0] == pytest.approx(-1.0, abs=1e-15)

    def test_dpsi_independent_of_gradient(self):
        theta, psi = ParamVector([0.7, -1.3]), ParamVector([0.2, 0.4])
        spec_a = DinFlowSpec(0.5, 0.9, QUAD, t_end=1.0, dt=1e-2)
        spec_b = DinFlowSpec(0.5, 0.9, make_problem("rosenbrock"), t_end=1.0, dt=1e-2)
        _, dps_a = din_rhs(theta, psi, spec_a)
        _, dps_b = din_rhs(theta, psi, spec_b)
        np.testing.assert_array_equal(dps_a.data, dps_b.data)

    def test_nonzero_away_from_equilibrium(self):
        spec = DinFlowSpec(0.5, 0.9, QUAD, t_end=1.0, dt=1e-2)
        rng = RngStream(9, 0).generator()
        for _ in range(20):
            dth, dps = din_rhs(ParamVector(rng.standard_normal(2)),
                               ParamVector(rng.standard_normal(2)), spec)
            assert np.linalg.norm(np.concatenate([dth.data, dps.data])) > 1e-6


class TestRk4:
    def test_constant_on_flat_problem(self):
        spec = DinFlowSpec(0.5, 0.9, flat_problem(), t_end=1.0, dt=0.1)
        traj = rk4_integrate(spec, ParamVector([1.0, 1.0]))
        np.testing.assert_array_equal(traj.theta[0], traj.theta[-1])
        np.testing.assert_array_equal(traj.psi[0], traj.psi[-1])

    def test_richardson_ratio_fourth_order(self):
        spec = DinFlowSpec(1.0, 1.0, QUAD, t_end=2.0, dt=0.05)
        ratio = richardson_ratio(spec, ParamVector([1.2, -0.8]))
        assert 8.0 <= ratio <= 32.0

    def test_dissipation_on_quadratic(self):
        spec = DinFlowSpec(1.0, 1.0, QUAD, t_end=10.0, dt=0.01)
        traj = rk4_integrate(spec, ParamVector([1.2, -0.8]))
        assert QUAD.loss(traj.theta[-1]) < QUAD.loss(traj.theta[0])

    def test_dt_must_divide_horizon(self):
        spec = DinFlowSpec(1.0, 1.0, QUAD, t_end=1.0, dt=0.3)
        with pytest.raises(ContractViolation):
            rk4_integrate(spec, ParamVector([1.0, 1.0]))

    def test_trajectory_losses_export(self):
        spec = DinFlowSpec(1.0, 1.0, QUAD, t_end=0.5, dt=0.1)
        traj = rk4_integrate(spec, ParamVector([1.0, 1.0]))
        losses = traj.losses(QUAD)
        assert losses.shape == traj.t.shape
        assert losses[0] == pytest.approx(5.5)


class TestDiscretizationGap:
    SPEC = DinFlowSpec(0.5, 0.9, QUAD, t_end=1.0, dt=1e-3)
    THETA0 = ParamVector([1.2, -0.8])

    def test_halving_ratio_first_order(self):
        g1 = discretization_gap(self.SPEC, 0.01, self.THETA0)
        g2 = discretization_gap(self.SPEC, 0.005, self.THETA0)
        g3 = discretization_gap(self.SPEC, 0.0025, self.THETA0)
        assert 1.5 <= g1 / g2 <= 3.0
        assert 1.5 <= g2 / g3 <= 3.0

    def test_small_step_regression_bound(self):
        assert discretization_gap(self.SPEC, 1e-4, self.THETA0) < 1e-3

    def test_zero_gradient_gap_is_exactly_zero(self):
        spec = DinFlowSpec(0.5, 0.9, flat_problem(), t_end=1.0, dt=1e-2)
        assert discretization_gap(spec, 0.05, ParamVector([1.0, -1.0])) == 0.0

    def test_gamma_must_stay_below_beta(self):
        with pytest.raises(ContractViolation):
            discretization_gap(self.SPEC, 0.9, self.THETA0)

    def test_spec_validation(self):
        with pytest.raises(ContractViolation):
            DinFlowSpec(-0.1, 0.9, QUAD, t_end=1.0, dt=1e-2)
        with pytest.raises(ContractViolation):
            DinFlowSpec(0.1, 0.0, QUAD, t_end=1.0, dt=1e-2)
        with pytest.raises(ContractViolation):
            DinFlowSpec(0.1, 0.9, QUAD, t_end=0.0, dt=1e-2)
        with pytest.raises(ContractViolation):
            DinFlowSpec(0.1, 0.9, QUAD, t_end=1.0, dt=2.0)
