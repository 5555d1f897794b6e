"""Colored Gaussian noise on a time grid: kernels, samplers, path calculus.

Two regulated covariance kernels are provided, an exponentially correlated
("ou") kernel J(d) = (C/s) exp(-|d|/s) and a squared-exponential
("squared_exp") kernel J(d) = (C/s^2) exp(-d^2/s^2), plus a white-noise
limit object that only exists as an ou kernel with correlation time shrunk
to a fraction of the grid step.  Equal-time evaluation of the white limit
is an error: its variance diverges and must never be silently fabricated.

Sampling is reproducible and splittable: the stream for path r, component i
is keyed by (seed, r, i) through a counter-based generator, so ensembles
can be produced in any chunking or in parallel with identical output.

Path calculus follows ordinary (Stratonovich-style) rules: integrals are
trapezoid sums, derivatives are central differences and exist only for the
squared-exponential kernel, whose paths are mean-square differentiable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from toruslab.core import TimeGrid

#: Grid sizes above this are refused by the dense-covariance sampler.
CHOLESKY_CAP = 4096

#: Relative jitter added to the covariance diagonal before factorization.
JITTER_REL = 1e-10

#: Correlation time of the white-limit proxy, as a fraction of the step.
WHITE_LIMIT_VARSIGMA_FRACTION = 0.01

_SAMPLER_CHUNK = 4096


class WhiteNoiseDivergenceError(ValueError):
    """Raised when an operation needs the equal-time value of white noise."""


class KernelNotPSDError(ValueError):
    """Raised when a covariance matrix cannot be factorized even jittered."""


@dataclass(frozen=True)
class CovarianceKernel:
    """Regulated two-point function J(d; varsigma) with amplitude C.

    kind is one of "ou", "squared_exp", "white_limit".  The white limit
    carries the delta-function weight ``alpha`` instead of (C, varsigma).
    """

    kind: str
    C: float = 1.0
    varsigma: float = 1.0
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("ou", "squared_exp", "white_limit"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "white_limit":
            if self.alpha is None or self.alpha <= 0.0:
                raise ValueError("white_limit kernel requires alpha > 0")
        else:
            if not (self.C > 0.0 and self.varsigma > 0.0):
                raise ValueError("require amplitude C > 0 and varsigma > 0")

    @staticmethod
    def ou(C: float, varsigma: float) -> "CovarianceKernel":
        return CovarianceKernel("ou", C=C, varsigma=varsigma)

    @staticmethod
    def squared_exp(C: float, varsigma: float) -> "CovarianceKernel":
        return CovarianceKernel("squared_exp", C=C, varsigma=varsigma)

    @staticmethod
    def white_limit(alpha: float) -> "CovarianceKernel":
        return CovarianceKernel("white_limit", alpha=alpha)

    @property
    def is_regulated(self) -> bool:
        return self.kind != "white_limit"

    def j0(self) -> float:
        """Equal-time variance J(0)."""
        if self.kind == "ou":
            return self.C / self.varsigma
        if self.kind == "squared_exp":
            return self.C / self.varsigma**2
        raise WhiteNoiseDivergenceError(
            "equal-time correlation of the white limit diverges"
        )

    def integral(self) -> float:
        """One-sided integral of the kernel, int_0^inf J(d) dd."""
        if self.kind == "ou":
            return self.C
        if self.kind == "squared_exp":
            return self.C * math.sqrt(math.pi) / (2.0 * self.varsigma)
        return self.alpha / 2.0

    def proxy_for_grid(self, grid: TimeGrid) -> "CovarianceKernel":
        """Resolve a white limit into its short-correlation ou proxy.

        The proxy matches the delta weight: 2 * int_0^inf J = alpha.
        """
        if self.kind != "white_limit":
            return self
        return CovarianceKernel.ou(
            C=self.alpha / 2.0, varsigma=WHITE_LIMIT_VARSIGMA_FRACTION * grid.dt
        )


def kernel_eval(kernel: CovarianceKernel, delta):
    """Evaluate J(delta) for a regulated kernel (vectorized in delta)."""
    if not kernel.is_regulated:
        raise WhiteNoiseDivergenceError(
            "white-limit kernel has no pointwise values; use a regulated proxy"
        )
    d = np.abs(np.asarray(delta, dtype=float))
    if kernel.kind == "ou":
        out = (kernel.C / kernel.varsigma) * np.exp(-d / kernel.varsigma)
    else:
        out = (kernel.C / kernel.varsigma**2) * np.exp(-((d / kernel.varsigma) ** 2))
    return float(out) if np.isscalar(delta) else out


def gram_matrix(kernel: CovarianceKernel, times: np.ndarray) -> np.ndarray:
    """Covariance matrix J(t_k - t_l) on a set of times."""
    times = np.asarray(times, dtype=float)
    return kernel_eval(kernel, times[:, None] - times[None, :])


@dataclass(frozen=True)
class NoisePath:
    """One realization of the field on a grid.

    In "shared" mode a single stored path is reused for every component;
    in "iid" mode there are n_components independent rows.
    """

    grid: TimeGrid
    values: np.ndarray
    n_components: int
    mode: str
    kernel: CovarianceKernel

    def __post_init__(self):
        if self.mode not in ("shared", "iid"):
            raise ValueError(f"mode must be 'shared' or 'iid', got {self.mode!r}")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        expected_rows = 1 if self.mode == "shared" else self.n_components
        if vals.shape != (expected_rows, self.grid.n_steps):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"({expected_rows}, {self.grid.n_steps})"
            )
        object.__setattr__(self, "values", vals)

    def component(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_components:
            raise IndexError(f"component {i} out of range")
        return self.values[0] if self.mode == "shared" else self.values[i]

    def stacked(self) -> np.ndarray:
        """All n_components rows, expanding a shared path."""
        if self.mode == "shared":
            return np.broadcast_to(self.values, (self.n_components, self.grid.n_steps))
        return self.values


def path_rng(seed: int, path_index: int = 0, component_index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, path, component).

    Any subset of paths can be regenerated independently and in parallel;
    the same triple always yields the same stream.
    """
    ss = np.random.SeedSequence((int(seed), int(path_index), int(component_index)))
    return np.random.Generator(np.random.Philox(seed=ss))


def _draw_normals(seed, path_indices, n_rows, n_steps):
    """Standard normals of shape (len(paths), n_rows, n_steps), one stream per row."""
    out = np.empty((len(path_indices), n_rows, n_steps))
    for a, r in enumerate(path_indices):
        for i in range(n_rows):
            out[a, i] = path_rng(seed, r, i).standard_normal(n_steps)
    return out


def _ou_from_normals(normals, dt, kernel):
    """Exact stationary AR(1) recursion applied to innovation normals.

    U_0 ~ N(0, J(0)); U_{k+1} = rho*U_k + sqrt(J(0)*(1-rho^2)) * xi_k with
    rho = exp(-dt/varsigma), which reproduces the ou kernel exactly at the
    grid nodes for every step size.
    """
    rho = math.exp(-dt / kernel.varsigma)
    sig = math.sqrt(kernel.j0())
    innov_scale = sig * math.sqrt(1.0 - rho * rho)
    u = np.empty_like(normals)
    u[..., 0] = sig * normals[..., 0]
    for k in range(1, normals.shape[-1]):
        u[..., k] = rho * u[..., k - 1] + innov_scale * normals[..., k]
    return u


def _cholesky_factor(kernel: CovarianceKernel, times: np.ndarray) -> np.ndarray:
    gram = gram_matrix(kernel, times)
    gram = 0.5 * (gram + gram.T)
    jitter = JITTER_REL * kernel.j0()
    for _ in range(6):
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(len(times)))
        except np.linalg.LinAlgError:
            jitter *= 100.0
    raise KernelNotPSDError(
        "covariance matrix is not positive semi-definite even after jittering"
    )


def sample_ou(
    grid: TimeGrid,
    kernel: CovarianceKernel,
    seed: int,
    mode: str = "iid",
    n_components: int = 1,
    path_index: int = 0,
) -> NoisePath:
    """Draw one ou path (exact at the nodes) for each stored component."""
    kernel = kernel.proxy_for_grid(grid)
    if kernel.kind != "ou":
        raise ValueError("sample_ou requires an ou (or white-limit) kernel")
    rows = 1 if mode == "shared" else n_components
    normals = _draw_normals(seed, [path_index], rows, grid.n_steps)[0]
    values = _ou_from_normals(normals, grid.dt, kernel)
    return NoisePath(grid, values, n_components, mode, kernel)


def sample_gaussian_kernel(
    grid: TimeGrid,
    kernel: CovarianceKernel,
    seed: int,
    mode: str = "iid",
    n_components: int = 1,
    path_index: int = 0,
) -> NoisePath:
    """Draw one path of any regulated kernel via dense Cholesky factorization."""
    if not kernel.is_regulated:
        raise WhiteNoiseDivergenceError("cannot factorize the white-limit kernel")
    if grid.n_steps > CHOLESKY_CAP:
        raise ValueError(f"grid length {grid.n_steps} exceeds cap {CHOLESKY_CAP}")
    rows = 1 if mode == "shared" else n_components
    chol = _cholesky_factor(kernel, grid.times())
    normals = _draw_normals(seed, [path_index], rows, grid.n_steps)[0]
    values = normals @ chol.T
    return NoisePath(grid, values, n_components, mode, kernel)


@dataclass(frozen=True)
class Ensemble:
    """Lazy, reproducible collection of noise paths.

    Identical (seed, kernel, grid, mode, n_components, n_paths) always
    yield bit-identical realizations, independent of chunking.
    """

    kernel: CovarianceKernel
    grid: TimeGrid
    mode: str
    n_components: int
    n_paths: int
    seed: int

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("an ensemble needs at least 2 paths")
        if self.mode not in ("shared", "iid"):
            raise ValueError(f"mode must be 'shared' or 'iid', got {self.mode!r}")

    @property
    def sampling_kernel(self) -> CovarianceKernel:
        return self.kernel.proxy_for_grid(self.grid)

    @property
    def rows_per_path(self) -> int:
        return 1 if self.mode == "shared" else self.n_components

    def iter_chunks(self, chunk_size: int = _SAMPLER_CHUNK):
        """Yield (path_indices, values) with values (k, rows, n_steps)."""
        kern = self.sampling_kernel
        use_chol = kern.kind == "squared_exp"
        if use_chol and self.grid.n_steps > CHOLESKY_CAP:
            raise ValueError(f"grid length {self.grid.n_steps} exceeds cap {CHOLESKY_CAP}")
        chol = _cholesky_factor(kern, self.grid.times()) if use_chol else None
        for start in range(0, self.n_paths, chunk_size):
            idx = np.arange(start, min(start + chunk_size, self.n_paths))
            normals = _draw_normals(self.seed, idx, self.rows_per_path, self.grid.n_steps)
            if use_chol:
                values = normals @ chol.T
            else:
                values = _ou_from_normals(normals, self.grid.dt, kern)
            yield idx, values

    def values(self, max_elements: int = 200_000_000) -> np.ndarray:
        """Materialize the full (n_paths, rows, n_steps) array."""
        total = self.n_paths * self.rows_per_path * self.grid.n_steps
        if total > max_elements:
            raise MemoryError(f"ensemble of {total} elements exceeds cap; iterate chunks")
        out = np.empty((self.n_paths, self.rows_per_path, self.grid.n_steps))
        for idx, vals in self.iter_chunks():
            out[idx] = vals
        return out

    def path(self, r: int) -> NoisePath:
        if not 0 <= r < self.n_paths:
            raise IndexError(f"path {r} out of range")
        kern = self.sampling_kernel
        if kern.kind == "squared_exp":
            return sample_gaussian_kernel(
                self.grid, kern, self.seed, self.mode, self.n_components, path_index=r
            )
        return sample_ou(
            self.grid, kern, self.seed, self.mode, self.n_components, path_index=r
        )


def check_psd_gram(gram: np.ndarray, scale: float | None = None) -> tuple[float, bool]:
    """Minimum eigenvalue of a symmetric matrix and a PSD verdict.

    ok iff min eigenvalue >= -1e-8 * scale, with scale defaulting to the
    largest diagonal entry.
    """
    gram = np.asarray(gram, dtype=float)
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    if scale is None:
        scale = float(np.max(np.abs(np.diag(gram))))
    return float(eigs[0]), bool(eigs[0] >= -1e-8 * scale)


def check_psd(kernel: CovarianceKernel, grid: TimeGrid) -> tuple[float, bool]:
    """PSD check of a regulated kernel's covariance on a grid."""
    if not kernel.is_regulated:
        raise WhiteNoiseDivergenceError("white-limit kernel has no Gram matrix")
    return check_psd_gram(gram_matrix(kernel, grid.times()), scale=kernel.j0())


def estimate_covariance(ensemble: Ensemble, lag_steps: int) -> tuple[float, float]:
    """Cross-ensemble estimate of E{U(t) U(t+lag)} and its standard error.

    Each path contributes the average of U(t_k) U(t_(k+lag)) over all valid
    k (and over components); the estimate is the mean of the per-path
    values and the standard error their spread over sqrt(n_paths).
    """
    m = ensemble.grid.n_steps
    if not 0 <= lag_steps < m:
        raise ValueError(f"lag {lag_steps} outside the grid of {m} steps")
    per_path = np.empty(ensemble.n_paths)
    for idx, vals in ensemble.iter_chunks():
        prod = vals[..., : m - lag_steps] * vals[..., lag_steps:]
        per_path[idx] = prod.mean(axis=(1, 2))
    est = float(per_path.mean())
    se = float(per_path.std(ddof=1) / math.sqrt(len(per_path)))
    return est, se


def cumulative_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid cumulative integral along the last axis, starting at 0."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    np.cumsum(0.5 * dt * (values[..., 1:] + values[..., :-1]), axis=-1, out=out[..., 1:])
    return out


def path_integral(path: NoisePath, upto: float) -> np.ndarray:
    """Trapezoid integral of each component from the grid start to ``upto``."""
    times = path.grid.times()
    k = int(round((upto - path.grid.t_start) / path.grid.dt))
    if k < 0 or k >= path.grid.n_steps or abs(times[k] - upto) > 0.5 * path.grid.dt:
        raise ValueError(f"time {upto} is outside the grid")
    cum = cumulative_integral(path.stacked(), path.grid.dt)
    return cum[:, k]


def path_derivative(path: NoisePath) -> np.ndarray:
    """Central-difference derivative of each stored row.

    Only squared-exponential paths are mean-square differentiable; ou and
    white-limit paths are rejected because their difference quotients do
    not converge at the diagonal.
    """
    if path.kernel.kind != "squared_exp":
        raise ValueError(
            f"paths of kind {path.kernel.kind!r} are not mean-square differentiable"
        )
    return np.gradient(path.values, path.grid.dt, axis=-1, edge_order=2)


def ensemble_to_csv(ensemble: Ensemble, fileobj) -> None:
    """Write the realizations as columnar CSV (t, component, path_id, value)."""
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["t", "component", "path_id", "value"])
    times = ensemble.grid.times()
    for idx, vals in ensemble.iter_chunks():
        for a, r in enumerate(idx):
            for i in range(ensemble.rows_per_path):
                for k, t in enumerate(times):
                    writer.writerow([repr(float(t)), i, int(r), repr(float(vals[a, i, k]))])


def save_ensemble(ensemble: Ensemble, filename) -> None:
    """Binary cache with a header identifying the generating parameters."""
    np.savez_compressed(
        filename,
        values=ensemble.values(),
        seed=ensemble.seed,
        kind=ensemble.kernel.kind,
        C=ensemble.kernel.C,
        varsigma=ensemble.kernel.varsigma,
        alpha=-1.0 if ensemble.kernel.alpha is None else ensemble.kernel.alpha,
        t_start=ensemble.grid.t_start,
        dt=ensemble.grid.dt,
        n_steps=ensemble.grid.n_steps,
        mode=ensemble.mode,
        n_components=ensemble.n_components,
        n_paths=ensemble.n_paths,
    )


def load_ensemble(filename) -> tuple[Ensemble, np.ndarray]:
    """Load a cached ensemble; returns the descriptor and the values."""
    with np.load(filename, allow_pickle=False) as data:
        alpha = float(data["alpha"])
        kernel = CovarianceKernel(
            str(data["kind"]),
            C=float(data["C"]),
            varsigma=float(data["varsigma"]),
            alpha=None if alpha < 0 else alpha,
        )
        grid = TimeGrid(float(data["t_start"]), float(data["dt"]), int(data["n_steps"]))
        ens = Ensemble(
            kernel=kernel,
            grid=grid,
            mode=str(data["mode"]),
            n_components=int(data["n_components"]),
            n_paths=int(data["n_paths"]),
            seed=int(data["seed"]),
        )
        return ens, data["values"]
