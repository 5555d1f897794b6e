import math

import numpy as np
import pytest

from toruslab.core import (
    KasnerExponents,
    ModuliState,
    OperatorCoefficients,
    Radii,
    TimeGrid,
    metric_norms,
    observables,
    radii_from_moduli,
    spatial_volume,
)

TWO_PI_SQ = (2.0 * math.pi) ** 2


def series_exp(x, terms=60):
    """Library-independent exponential: plain Taylor summation."""
    total = 0.0
    term = 1.0
    for k in range(1, terms + 1):
        total += term
        term *= x / k
    return total


class TestTimeGrid:
    def test_times_exactly_reproducible(self):
        grid = TimeGrid(0.5, 0.25, 5)
        t = grid.times()
        assert np.array_equal(t, 0.5 + 0.25 * np.arange(5))
        assert np.all(np.diff(t) > 0)
        assert grid.t_end == pytest.approx(1.5)

    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.1, 0)


class TestRadiiFromModuli:
    def test_zero_moduli(self):
        assert np.allclose(radii_from_moduli(np.zeros(3)).a, 1.0)

    def test_log_identity(self):
        assert radii_from_moduli([math.log(2.0)]).a[0] == pytest.approx(2.0, rel=1e-14)

    def test_against_series_oracle(self):
        psi = np.array([0.3, -0.7])
        expected = [series_exp(0.3), series_exp(-0.7)]
        assert np.allclose(radii_from_moduli(psi).a, expected, rtol=1e-13)

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            psi = rng.uniform(-20, 20, size=4)
            back = radii_from_moduli(psi).log()
            assert np.max(np.abs(back - psi)) < 1e-12 * max(1.0, np.max(np.abs(psi)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            radii_from_moduli([0.0, np.nan])

    def test_radii_must_be_positive(self):
        with pytest.raises(ValueError):
            Radii(np.array([1.0, -2.0]))


class TestSpatialVolume:
    def test_zero(self):
        assert spatial_volume(np.zeros(2)) == 1.0

    def test_product_of_radii(self):
        assert spatial_volume([math.log(2.0), math.log(3.0)]) == pytest.approx(6.0)

    def test_e_cubed(self):
        # product oracle: prod(exp(psi_i))
        psi = np.ones(3)
        oracle = np.prod(np.exp(psi))
        assert spatial_volume(psi) == pytest.approx(oracle, rel=1e-14)

    def test_multiplicative(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.uniform(-2, 2, 5)
            b = rng.uniform(-2, 2, 5)
            lhs = spatial_volume(a + b)
            rhs = spatial_volume(a) * spatial_volume(b)
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_overflow(self):
        with pytest.raises(OverflowError):
            spatial_volume(np.full(10, 100.0))


class TestMetricNorms:
    def test_single_component(self):
        norm21, frob = metric_norms([0.0])
        assert norm21 == pytest.approx(TWO_PI_SQ)
        assert frob == pytest.approx(TWO_PI_SQ)

    def test_two_flat_components(self):
        _, frob = metric_norms([0.0, 0.0])
        assert frob == pytest.approx(math.sqrt(2.0) * TWO_PI_SQ)

    def test_mixed_components(self):
        # g11 = 4*(2pi)^2, g22 = (2pi)^2 -> frobenius = (2pi)^2 sqrt(17)
        _, frob = metric_norms([math.log(2.0), 0.0])
        assert frob == pytest.approx(TWO_PI_SQ * math.sqrt(17.0), rel=1e-12)

    def test_both_readings(self):
        psi = np.array([0.1, -0.2, 0.4])
        g = TWO_PI_SQ * np.exp(2 * psi)
        columns, frob = metric_norms(psi, reading="columns")
        repeated, _ = metric_norms(psi, reading="repeated")
        assert columns == pytest.approx(np.sum(np.abs(g)))
        assert repeated == pytest.approx(3 * frob)
        with pytest.raises(ValueError):
            metric_norms(psi, reading="rows")

    def test_frobenius_below_norm21(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            psi = rng.uniform(-1, 1, 4)
            norm21, frob = metric_norms(psi)
            assert frob <= norm21 + 1e-12


class TestObservables:
    def test_static_state(self):
        obs = observables(ModuliState.static(np.array([0.1, 0.2])))
        assert obs.kretschmann == 0.0
        assert obs.expansion == 0.0
        assert obs.shear_sq == 0.0
        assert obs.volume == pytest.approx(math.exp(0.3))

    def test_kasner_expansion_is_exponent_square_sum(self):
        # at t = 1 the expansion equals sum p_i^2 = 1 for a unit-sum triplet
        p = np.array([-1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0])
        state = ModuliState(np.zeros(3), p, -p)
        obs = observables(state)
        assert obs.expansion == pytest.approx(1.0, abs=1e-14)

    def test_isotropic_velocities_have_no_shear(self):
        state = ModuliState(np.zeros(4), np.full(4, 0.37), np.zeros(4))
        assert observables(state).shear_sq == 0.0

    def test_unequal_velocities_have_shear(self):
        # the converse: any pair of distinct velocities produces shear
        state = ModuliState(np.zeros(2), np.array([0.37, 0.36]), np.zeros(2))
        assert observables(state).shear_sq > 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        psi, dpsi, ddpsi = rng.normal(size=(3, 5))
        perm = rng.permutation(5)
        a = observables(ModuliState(psi, dpsi, ddpsi))
        b = observables(ModuliState(psi[perm], dpsi[perm], ddpsi[perm]))
        for name in ("volume", "norm21", "frobenius", "kretschmann", "expansion", "shear_sq"):
            assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12)

    def test_kretschmann_matches_direct_sum(self):
        dpsi = np.array([0.3, -0.5])
        ddpsi = np.array([0.1, 0.2])
        state = ModuliState(np.zeros(2), dpsi, ddpsi)
        direct = (
            4 * ddpsi.sum()
            + 4 * np.sum(dpsi**2)
            + 2 * sum((dpsi[i] * dpsi[j]) ** 2 for i in range(2) for j in range(2))
        )
        assert observables(state).kretschmann == pytest.approx(direct, rel=1e-14)


class TestStateInvariants:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ModuliState(np.zeros(3), np.zeros(2), np.zeros(3))

    def test_arrays_read_only(self):
        state = ModuliState.static(np.zeros(2))
        with pytest.raises(ValueError):
            state.psi[0] = 1.0

    def test_kasner_exponents_residual(self):
        p = KasnerExponents(np.array([1.0, 1.0]))
        assert p.constraint_residual() == pytest.approx(0.0, abs=1e-15)
        assert p.is_valid()

    def test_coefficient_presets(self):
        e = OperatorCoefficients.einstein()
        assert (e.c1, e.c2, e.c3) == (1.0, 0.5, 0.5)
        d = OperatorCoefficients.einstein_diagonal()
        assert (d.c1, d.c2, d.c3) == (1.0, 1.0, 0.0)
        g = OperatorCoefficients.general(0.25)
        assert (g.c1, g.c2, g.c3) == (1.0, 0.25, 0.0)
