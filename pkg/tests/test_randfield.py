import io
import math

import numpy as np
import pytest
from scipy.integrate import quad

from toruslab.core import TimeGrid
from toruslab.randfield import (
    CHOLESKY_CAP,
    CovarianceKernel,
    Ensemble,
    NoisePath,
    WhiteNoiseDivergenceError,
    check_psd,
    check_psd_gram,
    cumulative_integral,
    ensemble_to_csv,
    estimate_covariance,
    gram_matrix,
    kernel_eval,
    load_ensemble,
    path_derivative,
    path_integral,
    sample_gaussian_kernel,
    sample_ou,
    save_ensemble,
)


class TestKernelEval:
    def test_ou_equal_time(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        assert kernel_eval(kern, 0.0) == pytest.approx(2.0)
        assert kern.j0() == pytest.approx(2.0)

    def test_squared_exp_equal_time(self):
        kern = CovarianceKernel.squared_exp(1.0, 0.5)
        assert kernel_eval(kern, 0.0) == pytest.approx(4.0)

    def test_ou_one_correlation_time(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        assert kernel_eval(kern, 0.5) == pytest.approx(2.0 * math.exp(-1.0))

    def test_symmetry(self):
        for kern in (CovarianceKernel.ou(2.0, 0.3), CovarianceKernel.squared_exp(2.0, 0.3)):
            deltas = np.linspace(0.0, 2.0, 17)
            assert np.array_equal(kernel_eval(kern, deltas), kernel_eval(kern, -deltas))

    def test_white_limit_rejected(self):
        kern = CovarianceKernel.white_limit(1.0)
        with pytest.raises(WhiteNoiseDivergenceError):
            kernel_eval(kern, 0.0)
        with pytest.raises(WhiteNoiseDivergenceError):
            kern.j0()

    def test_kernel_mass(self):
        # one-sided integral against quadrature
        for kern in (CovarianceKernel.ou(1.3, 0.4), CovarianceKernel.squared_exp(1.3, 0.4)):
            oracle, err = quad(lambda d: kernel_eval(kern, d), 0.0, 50.0 * kern.varsigma)
            assert kern.integral() == pytest.approx(oracle, rel=1e-10)


class TestOuSampler:
    def test_single_tiny_step_continuity(self):
        grid = TimeGrid(0.0, 1e-9, 2)
        path = sample_ou(grid, CovarianceKernel.ou(1.0, 1.0), seed=1)
        u = path.component(0)
        assert abs(u[1] - u[0]) < 1e-3

    def test_stationary_variance(self):
        grid = TimeGrid(0.0, 0.05, 64)
        ens = Ensemble(
            kernel=CovarianceKernel.ou(1.0, 0.5), grid=grid, mode="iid",
            n_components=1, n_paths=10_000, seed=99,
        )
        est, se = estimate_covariance(ens, 0)
        assert abs(est - 2.0) <= 3.0 * se

    def test_lag_autocorrelation(self):
        vs = 0.5
        grid = TimeGrid(0.0, vs / 10.0, 64)
        ens = Ensemble(
            kernel=CovarianceKernel.ou(1.0, vs), grid=grid, mode="iid",
            n_components=1, n_paths=10_000, seed=100,
        )
        est, se = estimate_covariance(ens, 10)  # lag = varsigma
        assert abs(est - 2.0 * math.exp(-1.0)) <= 3.0 * se

    def test_white_limit_proxy_decorrelates(self):
        grid = TimeGrid(0.0, 0.01, 32)
        ens = Ensemble(
            kernel=CovarianceKernel.white_limit(1.0), grid=grid, mode="iid",
            n_components=1, n_paths=4000, seed=5,
        )
        est, se = estimate_covariance(ens, 1)
        assert abs(est) <= 3.0 * se


class TestCholeskySampler:
    def test_single_point_variance(self):
        grid = TimeGrid(0.0, 1.0, 1)
        kern = CovarianceKernel.squared_exp(1.0, 0.5)
        draws = [
            sample_gaussian_kernel(grid, kern, seed=3, path_index=r).component(0)[0]
            for r in range(4000)
        ]
        var = np.var(draws)
        se = kern.j0() * math.sqrt(2.0 / 4000)
        assert abs(var - kern.j0()) <= 3.0 * se

    def test_far_points_uncorrelated(self):
        kern = CovarianceKernel.squared_exp(1.0, 0.1)
        grid = TimeGrid(0.0, 2.0, 2)  # separation = 20 varsigma
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=4000, seed=8)
        vals = ens.values()[:, 0, :]
        corr = np.corrcoef(vals[:, 0], vals[:, 1])[0, 1]
        assert abs(corr) <= 3.0 / math.sqrt(4000)

    def test_equal_time_variance(self):
        kern = CovarianceKernel.squared_exp(1.0, 0.5)
        grid = TimeGrid(0.0, 0.1, 16)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=8000, seed=12)
        est, se = estimate_covariance(ens, 0)
        assert abs(est - kern.j0()) <= 3.0 * se

    def test_grid_cap(self):
        kern = CovarianceKernel.squared_exp(1.0, 0.5)
        grid = TimeGrid(0.0, 0.001, CHOLESKY_CAP + 1)
        with pytest.raises(ValueError):
            sample_gaussian_kernel(grid, kern, seed=1)

    def test_agrees_with_ou_sampler(self):
        # same kernel, two independent sampling routes, joint standard error
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.05, 32)
        ens_ar = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=8000, seed=21)
        est_ar, se_ar = estimate_covariance(ens_ar, 4)
        per_path = []
        chol_paths = np.stack(
            [
                sample_gaussian_kernel(grid, kern, seed=22, path_index=r).component(0)
                for r in range(4000)
            ]
        )
        prod = chol_paths[:, :-4] * chol_paths[:, 4:]
        per_path = prod.mean(axis=1)
        est_ch = per_path.mean()
        se_ch = per_path.std(ddof=1) / math.sqrt(len(per_path))
        assert abs(est_ar - est_ch) <= 3.0 * math.hypot(se_ar, se_ch)


class TestPSD:
    def test_ou_gram_psd(self):
        grid = TimeGrid(0.0, 0.2, 48)
        _, ok = check_psd(CovarianceKernel.ou(1.0, 0.5), grid)
        assert ok

    def test_squared_exp_gram_psd(self):
        grid = TimeGrid(0.0, 0.1, 64)
        min_eig, ok = check_psd(CovarianceKernel.squared_exp(1.0, 0.5), grid)
        assert ok
        # eigen-solve oracle: all eigenvalues of the Gram must clear the floor
        gram = gram_matrix(CovarianceKernel.squared_exp(1.0, 0.5), grid.times())
        assert min_eig == pytest.approx(float(np.linalg.eigvalsh(gram)[0]), abs=1e-10)

    def test_hand_built_non_psd_detected(self):
        # constant off-diagonal -0.6: eigenvalues are 1.6, 1.6, -0.2
        bad = np.full((3, 3), -0.6) + 1.6 * np.eye(3)
        min_eig, ok = check_psd_gram(bad, scale=1.0)
        assert not ok
        assert min_eig == pytest.approx(-0.2, abs=1e-12)

    def test_positive_combination_accepted(self):
        good = np.full((3, 3), 0.9) + 0.1 * np.eye(3)
        _, ok = check_psd_gram(good, scale=1.0)
        assert ok


class TestReproducibility:
    def test_bit_identical_ensembles(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.05, 16)
        a = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=2, n_paths=50, seed=77)
        b = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=2, n_paths=50, seed=77)
        assert np.array_equal(a.values(), b.values())

    def test_chunking_does_not_change_paths(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.05, 16)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=64, seed=7)
        whole = ens.values()
        pieces = np.empty_like(whole)
        for idx, vals in ens.iter_chunks(chunk_size=5):
            pieces[idx] = vals
        assert np.array_equal(whole, pieces)

    def test_single_path_addressable(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.05, 16)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=2, n_paths=20, seed=3)
        assert np.array_equal(ens.path(13).values, ens.values()[13])

    def test_different_seeds_differ(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.05, 16)
        a = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=10, seed=1)
        b = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=10, seed=2)
        assert not np.array_equal(a.values(), b.values())


class TestStationarityAndGaussianity:
    def test_covariance_depends_on_lag_only(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        lag = 5
        first = TimeGrid(0.0, 0.05, 32)
        shifted = TimeGrid(13.7, 0.05, 32)
        e1 = Ensemble(kernel=kern, grid=first, mode="iid", n_components=1, n_paths=8000, seed=41)
        e2 = Ensemble(kernel=kern, grid=shifted, mode="iid", n_components=1, n_paths=8000, seed=42)
        est1, se1 = estimate_covariance(e1, lag)
        est2, se2 = estimate_covariance(e2, lag)
        assert abs(est1 - est2) <= 3.0 * math.hypot(se1, se2)

    def test_third_moment_vanishes(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.05, 128)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=10_000, seed=51)
        vals = ens.values().ravel() / math.sqrt(kern.j0())
        skew = float(np.mean(vals**3))
        assert abs(skew) < 0.05  # 1.28e6 samples


class TestPathCalculus:
    def test_integral_of_zero_path(self):
        grid = TimeGrid(0.0, 0.1, 11)
        path = NoisePath(grid, np.zeros((1, 11)), 1, "shared", CovarianceKernel.ou(1.0, 1.0))
        assert path_integral(path, 1.0)[0] == 0.0

    def test_integral_of_constant_path_exact(self):
        grid = TimeGrid(0.0, 0.1, 11)
        c = 0.7
        path = NoisePath(grid, np.full((1, 11), c), 1, "shared", CovarianceKernel.ou(1.0, 1.0))
        assert path_integral(path, 1.0)[0] == pytest.approx(c * 1.0, rel=1e-14)

    def test_integral_beyond_grid_rejected(self):
        grid = TimeGrid(0.0, 0.1, 11)
        path = NoisePath(grid, np.zeros((1, 11)), 1, "shared", CovarianceKernel.ou(1.0, 1.0))
        with pytest.raises(ValueError):
            path_integral(path, 1.5)

    def test_integral_mean_and_variance(self):
        # Var(int_0^t U) = 2 int_0^t (t - s) J(s) ds, checked by quadrature
        kern = CovarianceKernel.ou(1.0, 0.5)
        t_end = 1.0
        grid = TimeGrid(0.0, 0.002, 501)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=10_000, seed=60)
        finals = np.empty(ens.n_paths)
        for idx, vals in ens.iter_chunks():
            finals[idx] = cumulative_integral(vals[:, 0, :], grid.dt)[:, -1]
        target, _ = quad(lambda s: 2.0 * (t_end - s) * kernel_eval(kern, s), 0.0, t_end)
        mean_se = finals.std(ddof=1) / math.sqrt(len(finals))
        assert abs(finals.mean()) <= 3.0 * mean_se
        var = finals.var(ddof=1)
        var_se = var * math.sqrt(2.0 / (len(finals) - 1))
        assert abs(var - target) <= max(4.0 * var_se, 0.05 * target)

    def test_derivative_requires_smooth_kernel(self):
        grid = TimeGrid(0.0, 0.01, 64)
        ou_path = sample_ou(grid, CovarianceKernel.ou(1.0, 0.5), seed=2)
        with pytest.raises(ValueError):
            path_derivative(ou_path)

    def test_derivative_of_constant_path(self):
        grid = TimeGrid(0.0, 0.1, 11)
        path = NoisePath(
            grid, np.full((1, 11), 2.0), 1, "shared", CovarianceKernel.squared_exp(1.0, 1.0)
        )
        assert np.allclose(path_derivative(path), 0.0)

    def test_derivative_ensemble_mean_vanishes(self):
        kern = CovarianceKernel.squared_exp(1.0, 1.0)
        grid = TimeGrid(0.0, 0.05, 64)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=1, n_paths=4000, seed=61)
        per_path = np.empty(ens.n_paths)
        for idx, vals in ens.iter_chunks():
            per_path[idx] = np.gradient(vals, grid.dt, axis=-1, edge_order=2)[:, 0, :].mean(axis=-1)
        se = per_path.std(ddof=1) / math.sqrt(len(per_path))
        assert abs(per_path.mean()) <= 3.0 * se


class TestSerialization:
    def test_csv_round_numbers(self):
        kern = CovarianceKernel.ou(1.0, 0.5)
        grid = TimeGrid(0.0, 0.1, 4)
        ens = Ensemble(kernel=kern, grid=grid, mode="iid", n_components=2, n_paths=3, seed=9)
        buf = io.StringIO()
        ensemble_to_csv(ens, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "t,component,path_id,value"
        assert len(lines) == 1 + 3 * 2 * 4
        values = ens.values()
        t, comp, pid, val = lines[1].split(",")
        assert float(val) == values[0, 0, 0]

    def test_binary_cache_round_trip(self, tmp_path):
        kern = CovarianceKernel.squared_exp(2.0, 0.7)
        grid = TimeGrid(0.5, 0.1, 8)
        ens = Ensemble(kernel=kern, grid=grid, mode="shared", n_components=3, n_paths=5, seed=123)
        fn = tmp_path / "cache.npz"
        save_ensemble(ens, fn)
        loaded, values = load_ensemble(fn)
        assert loaded == ens
        assert np.array_equal(values, ens.values())
