import math

import numpy as np
import pytest
from scipy.integrate import quad

from toruslab.core import OperatorCoefficients, Radii
from toruslab.dynamics import h_residual, h_residual_series
from toruslab.pulse import (
    ConstantPulse,
    GaussianPulse,
    attractor,
    constant_perturbation,
    gaussian_pulse_integral,
    perturbed_moduli,
    perturbed_norm,
    pulse_source_term,
    relaxation_check,
)

EINSTEIN = OperatorCoefficients.einstein()
DIAGONAL = OperatorCoefficients.einstein_diagonal()


def quad_pulse_integral(A, theta, t):
    """Adaptive-quadrature oracle for the running pulse integral.

    Split at the end of the bump so the adaptive rule never has to resolve
    a sharp peak inside one long panel.
    """
    f = lambda tau: A * math.exp(-(tau**2) / (2.0 * theta**2))
    cut = min(t, 8.0 * theta)
    total, err_total = 0.0, 0.0
    for lo, hi in ((0.0, cut), (cut, t)):
        if hi > lo:
            val, err = quad(f, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-13)
            total += val
            err_total += err
    assert err_total < 5e-12
    return total


class TestPulseIntegral:
    def test_zero_amplitude(self):
        for t in (0.0, 0.5, 3.0):
            assert gaussian_pulse_integral(0.0, 0.3, t) == 0.0

    def test_unit_pulse_saturates(self):
        value = gaussian_pulse_integral(1.0, 1.0, 10.0)
        assert value == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-12)
        assert value == pytest.approx(quad_pulse_integral(1.0, 1.0, 10.0), abs=1e-10)

    def test_narrow_pulse_against_quadrature(self):
        value = gaussian_pulse_integral(2.0, 0.1, 1.0)
        assert value == pytest.approx(quad_pulse_integral(2.0, 0.1, 1.0), abs=1e-10)

    @pytest.mark.parametrize("A", [-1.0, 0.5, 1.0, 2.0, 4.0])
    @pytest.mark.parametrize("theta", [0.01, 0.05, 0.1, 0.5, 1.0])
    @pytest.mark.parametrize("t", [0.05, 0.2, 1.0, 3.0, 10.0])
    def test_closed_form_equals_quadrature_on_grid(self, A, theta, t):
        assert gaussian_pulse_integral(A, theta, t) == pytest.approx(
            quad_pulse_integral(A, theta, t), abs=1e-10
        )

    def test_nonpositive_width_rejected(self):
        with pytest.raises(ValueError):
            gaussian_pulse_integral(1.0, 0.0, 1.0)


class TestPerturbedModuli:
    def test_initial_time_unperturbed(self):
        psiE = np.array([0.2, -0.3])
        pulse = GaussianPulse.isotropic(1.0, 0.1, 2)
        state = perturbed_moduli(psiE, pulse, 0.0)
        assert np.allclose(state.psi, psiE)
        assert np.allclose(state.dpsi, 1.0)

    def test_attractor_value_reached(self):
        pulse = GaussianPulse(np.array([1.0, -0.5]), np.array([0.05, 0.02]))
        psiE = np.zeros(2)
        state = perturbed_moduli(psiE, pulse, 1.0)
        target = pulse.A * pulse.theta * math.sqrt(math.pi / 2.0)
        assert np.allclose(state.psi, target, rtol=1e-12)

    def test_velocity_dies_off(self):
        pulse = GaussianPulse.isotropic(1.0, 0.05, 2)
        state = perturbed_moduli(np.zeros(2), pulse, 1.0)
        assert np.all(np.abs(state.dpsi) < 1e-80)

    def test_second_derivative_matches_finite_difference(self):
        pulse = GaussianPulse.isotropic(0.7, 0.3, 1)
        t, h = 0.25, 1e-6
        up = perturbed_moduli(np.zeros(1), pulse, t + h).dpsi[0]
        dn = perturbed_moduli(np.zeros(1), pulse, t - h).dpsi[0]
        state = perturbed_moduli(np.zeros(1), pulse, t)
        assert state.ddpsi[0] == pytest.approx((up - dn) / (2 * h), rel=1e-7)


class TestAttractor:
    def test_zero_amplitude_fixed(self):
        aE = Radii(np.array([1.0, 2.0]))
        pulse = GaussianPulse.isotropic(0.0, 0.1, 2)
        assert np.allclose(attractor(aE, pulse).a, aE.a)

    def test_unit_pulse_value(self):
        aE = Radii(np.array([1.0]))
        pulse = GaussianPulse.isotropic(1.0, 1.0, 1)
        expected = math.exp(math.sqrt(math.pi / 2.0))
        att = attractor(aE, pulse)
        assert att.a[0] == pytest.approx(expected, rel=1e-12)
        # cross-check by following the trajectory far past the pulse
        state = perturbed_moduli(np.zeros(1), pulse, 100.0)
        assert math.exp(state.psi[0]) == pytest.approx(att.a[0], rel=1e-12)

    def test_negative_amplitude_contracts(self):
        aE = Radii(np.array([1.0, 1.0]))
        pulse = GaussianPulse.isotropic(-0.4, 0.1, 2)
        assert np.all(attractor(aE, pulse).a < aE.a)

    def test_convergence_by_eight_widths(self):
        theta = 0.05
        pulse = GaussianPulse.isotropic(1.3, theta, 3)
        aE = Radii(np.ones(3))
        att = attractor(aE, pulse)
        a_at = np.exp(perturbed_moduli(np.zeros(3), pulse, 8.0 * theta).psi)
        assert np.max(np.abs(a_at - att.a) / att.a) < 1e-6


class TestSourceTerm:
    def test_zero_amplitude(self):
        pulse = GaussianPulse.isotropic(0.0, 0.1, 3)
        assert pulse_source_term(pulse, 0.3, EINSTEIN) == 0.0

    def test_peak_value_full_preset(self):
        # at t = 0 the derivative term vanishes, leaving (n/2 + n^2/2) A^2
        n, A = 3, 0.8
        pulse = GaussianPulse.isotropic(A, 0.1, n)
        expected = 0.5 * n * A**2 + 0.5 * n**2 * A**2
        assert pulse_source_term(pulse, 0.0, EINSTEIN) == pytest.approx(expected, rel=1e-14)

    def test_decays_past_pulse(self):
        pulse = GaussianPulse.isotropic(1.0, 0.05, 2)
        assert abs(pulse_source_term(pulse, 1.0, EINSTEIN)) < 1e-60

    def test_equals_residual_of_trajectory(self):
        pulse = GaussianPulse(np.array([1.0, -0.7]), np.array([0.2, 0.4]))
        for coeffs in (EINSTEIN, DIAGONAL):
            for t in np.linspace(0.0, 2.0, 21):
                state = perturbed_moduli(np.zeros(2), pulse, t)
                assert pulse_source_term(pulse, t, coeffs) == pytest.approx(
                    h_residual(state, coeffs), rel=1e-12, abs=1e-12
                )

    def test_matches_finite_difference_residual(self):
        # finite-difference oracle applied to the sampled trajectory
        pulse = GaussianPulse.isotropic(0.9, 0.5, 2)
        dt = 1e-3
        t = np.arange(0.0, 3.0, dt)
        psi = np.stack([perturbed_moduli(np.zeros(2), pulse, tk).psi for tk in t], axis=-1)
        series = h_residual_series(psi, dt, EINSTEIN)
        k = len(t) // 3
        assert series[k] == pytest.approx(
            pulse_source_term(pulse, t[k], EINSTEIN), abs=5e-5
        )


class TestConstantPerturbation:
    def test_zero_amplitude_static(self):
        state, residual = constant_perturbation(np.zeros(3), ConstantPulse(0.0), 4.0)
        assert residual == 0.0
        assert np.allclose(state.psi, 0.0)

    @pytest.mark.parametrize("A,n", [(1.0, 3), (-0.5, 4), (0.25, 1), (2.0, 2)])
    def test_residual_is_n_a_squared(self, A, n):
        state, residual = constant_perturbation(np.zeros(n), ConstantPulse(A), 1.0)
        assert residual == pytest.approx(n * A * A, rel=1e-14)
        assert np.allclose(state.dpsi, A)

    def test_norm_grows_without_bound(self):
        aE = Radii(np.ones(2))
        pulse = ConstantPulse(0.5)
        values = [perturbed_norm(aE, pulse, t) for t in (1.0, 5.0, 20.0)]
        assert values[0] < values[1] < values[2]
        assert values[2] > 1e4

    def test_log_slope_approaches_amplitude(self):
        A = 0.5
        aE = Radii(np.ones(3))
        pulse = ConstantPulse(A)
        times = np.linspace(15.0, 20.0, 60)
        ratios = np.array([perturbed_norm(aE, pulse, t) for t in times]) / math.sqrt(3.0)
        slope = np.polyfit(times, np.log(ratios), 1)[0]
        assert slope == pytest.approx(A, rel=0.01)


class TestPerturbedNorm:
    def test_zero_at_start(self):
        pulse = GaussianPulse.isotropic(1.0, 0.1, 2)
        assert perturbed_norm(Radii(np.ones(2)), pulse, 0.0) == 0.0

    def test_isotropic_asymptote(self):
        A, theta = 1.0, 0.1
        pulse = GaussianPulse.isotropic(A, theta, 2)
        value = perturbed_norm(Radii(np.ones(2)), pulse, 50.0)
        expected = math.sqrt(2.0) * (math.exp(A * theta * math.sqrt(math.pi / 2.0)) - 1.0)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_bounded_for_all_time(self):
        # Lyapunov stability: the deviation never escapes a finite ball
        pulse = GaussianPulse.isotropic(2.0, 0.2, 3)
        bound = math.sqrt(3.0) * (math.exp(2.0 * 0.2 * math.sqrt(math.pi / 2.0)) - 1.0)
        for t in np.linspace(0.0, 100.0, 101):
            assert perturbed_norm(Radii(np.ones(3)), pulse, t) <= bound + 1e-12


class TestRelaxation:
    def test_zero_amplitude_no_deviation(self):
        pulse = GaussianPulse.isotropic(0.0, 0.01, 3)
        report = relaxation_check(
            np.array([-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]), pulse, np.linspace(0.05, 1.0, 40)
        )
        assert report.max_dev_after_settle == 0.0

    def test_settles_below_tolerance(self):
        pulse = GaussianPulse.isotropic(1.0, 0.01, 3)
        report = relaxation_check(
            np.array([-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]), pulse, np.linspace(0.05, 1.0, 96)
        )
        assert report.settled(1e-8)
        assert report.settle_time == pytest.approx(0.1)
        crossings = report.crossing_times(1e-8)
        assert all(t <= report.settle_time for t in crossings.values())

    def test_visible_deviation_at_peak(self):
        theta = 0.1
        pulse = GaussianPulse.isotropic(1.0, theta, 3)
        report = relaxation_check(
            np.array([0.0, 0.0, 1.0]), pulse, np.array([theta, 5 * theta, 20 * theta])
        )
        assert report.dev_expansion[0] > 0.01
        assert report.dev_expansion[-1] < 1e-8
