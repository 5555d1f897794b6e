"""Monte-Carlo averaging of the randomly perturbed nonlinear operators.

Trajectories are perturbed as psi_i(t) = base_i(t) + zeta * int_0^t U_i,
with U a stationary Gaussian field of regulated covariance J.  Because the
operators are quadratic in the velocities, averaging does not return the
unperturbed equations: the quadratic noise terms survive with mean

    iid components:    lambda = zeta^2 * J(0) * (c2*n + c3*n)
    shared component:  lambda = zeta^2 * J(0) * (c2*n + c3*n^2)

(the linear noise terms have zero mean).  For the trace preset
(c2 = c3 = 1/2) these are zeta^2*n*J(0) and zeta^2*(n+n^2)*J(0)/2; both
normalizations are computed and the ensemble itself arbitrates.

Derivative terms: ou paths are not mean-square differentiable, so for ou
noise the residual is taken in weak form - the analytically-zero-mean
derivative term is dropped.  Squared-exponential paths are differentiable
and the full pathwise finite-difference residual is averaged.  Both routes
must agree on lambda; reports record which was used.

Everything quadratic in the noise is ordinary (Stratonovich-style)
calculus; the Ito correction appears only in the exact geometric-Brownian
solutions used for the white-noise stabilization checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from toruslab.core import ModuliState, OperatorCoefficients, TimeGrid
from toruslab.dynamics import LambdaTerm, h_residual, lambda_solution
from toruslab.randfield import (
    CovarianceKernel,
    Ensemble,
    WhiteNoiseDivergenceError,
    path_rng,
)

MIN_ENSEMBLE = 100


# ---------------------------------------------------------------------------
# Unperturbed base trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaticBase:
    """Constant moduli; all base derivatives vanish."""

    psi0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi0", np.atleast_1d(np.asarray(self.psi0, float)))

    @property
    def n(self) -> int:
        return len(self.psi0)

    def dpsi(self, t):
        return np.zeros(self.n)

    def ddpsi(self, t):
        return np.zeros(self.n)


@dataclass(frozen=True)
class KasnerBase:
    """Power-law base psi_i = psi0_i + p_i ln t."""

    psi0: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi0", np.atleast_1d(np.asarray(self.psi0, float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, float)))
        if len(self.psi0) != len(self.p):
            raise ValueError("psi0 and p must have the same length")

    @property
    def n(self) -> int:
        return len(self.psi0)

    def dpsi(self, t):
        return self.p / t

    def ddpsi(self, t):
        return -self.p / t**2


@dataclass(frozen=True)
class LinearBase:
    """Exponential-radii base psi_i = psi0_i + q*t."""

    psi0: np.ndarray
    q: float

    def __post_init__(self):
        object.__setattr__(self, "psi0", np.atleast_1d(np.asarray(self.psi0, float)))

    @property
    def n(self) -> int:
        return len(self.psi0)

    def dpsi(self, t):
        return np.full(self.n, self.q)

    def ddpsi(self, t):
        return np.zeros(self.n)

    @staticmethod
    def for_forcing(lam: float, n: int, coeffs: OperatorCoefficients, sign: int = +1) -> "LinearBase":
        """Base whose operator value equals lam exactly under ``coeffs``."""
        state = lambda_solution(np.zeros(n), LambdaTerm(lam), n, sign=sign, coeffs=coeffs)
        return LinearBase(np.zeros(n), float(state.dpsi[0]))


@dataclass(frozen=True)
class PerturbedTrajectory:
    """A base trajectory plus coupling zeta times an integrated noise ensemble."""

    base: object
    zeta: float
    ensemble: Ensemble

    def __post_init__(self):
        if self.ensemble.n_components != self.base.n:
            raise ValueError("ensemble components must match the base dimension")


# ---------------------------------------------------------------------------
# Induced constants
# ---------------------------------------------------------------------------


def induced_lambda_analytic(
    kernel: CovarianceKernel,
    zeta: float,
    n: int,
    mode: str,
    coeffs: OperatorCoefficients | None = None,
) -> float:
    """Closed-form constant left in the averaged operator.

    iid:    zeta^2 * J(0) * (c2*n + c3*n)     [cross terms average out]
    shared: zeta^2 * J(0) * (c2*n + c3*n^2)   [cross terms coherent]
    """
    if coeffs is None:
        coeffs = OperatorCoefficients.einstein()
    if not kernel.is_regulated:
        raise WhiteNoiseDivergenceError(
            "white-noise perturbations make the averaged operator diverge"
        )
    j0 = kernel.j0()
    if mode == "iid":
        return zeta * zeta * j0 * (coeffs.c2 * n + coeffs.c3 * n)
    if mode == "shared":
        return zeta * zeta * j0 * (coeffs.c2 * n + coeffs.c3 * n * n)
    raise ValueError(f"mode must be 'shared' or 'iid', got {mode!r}")


@dataclass(frozen=True)
class AveragingReport:
    """Monte-Carlo mean of an averaged operator against its closed form.

    ``mc_mean`` is the ensemble mean of the residual shift relative to the
    unperturbed base (for a static base this is the plain averaged
    residual); ``base_residual`` is the deterministic operator value of the
    base itself, averaged over the evaluation window.
    """

    mc_mean: float
    mc_se: float
    analytic: float
    mode: str
    n_paths: int
    zeta: float
    n: int
    seed: int
    kernel_kind: str
    base_residual: float = 0.0
    derivative_handling: str = "weak"
    linear_term_mean: float = 0.0
    linear_term_se: float = 0.0
    cross_term_mean: float = 0.0
    cross_term_se: float = 0.0

    @property
    def z_score(self) -> float:
        if self.mc_se == 0.0:
            return 0.0 if self.mc_mean == self.analytic else math.inf
        return (self.mc_mean - self.analytic) / self.mc_se

    def within(self, k_sigma: float = 3.0) -> bool:
        return abs(self.z_score) <= k_sigma

    def to_dict(self) -> dict:
        return {
            "analytic": self.analytic,
            "mc_mean": self.mc_mean,
            "mc_se": self.mc_se,
            "z_score": self.z_score,
            "N": self.n_paths,
            "mode": self.mode,
            "kernel": self.kernel_kind,
            "zeta": self.zeta,
            "n": self.n,
            "seed": self.seed,
            "base_residual": self.base_residual,
            "derivative_handling": self.derivative_handling,
            "linear_term_mean": self.linear_term_mean,
            "linear_term_se": self.linear_term_se,
            "cross_term_mean": self.cross_term_mean,
            "cross_term_se": self.cross_term_se,
        }


def _fd_time_derivative(values, dt):
    return np.gradient(values, dt, axis=-1, edge_order=2)


def mc_averaged_residual(
    traj: PerturbedTrajectory,
    coeffs: OperatorCoefficients | None = None,
    derivative_handling: str = "auto",
) -> AveragingReport:
    """Ensemble mean of the operator shift along a perturbed trajectory.

    The shift of path omega at time t is h[base + zeta*int U(omega)] -
    h[base]; only velocities and accelerations enter, so the integrated
    noise itself is never needed.  Per-path means over the interior of the
    grid are averaged across the ensemble; the standard error is their
    spread over sqrt(N).
    """
    if coeffs is None:
        coeffs = OperatorCoefficients.einstein()
    ens = traj.ensemble
    if ens.n_paths < MIN_ENSEMBLE:
        raise ValueError(f"need at least {MIN_ENSEMBLE} paths, got {ens.n_paths}")
    kern = ens.sampling_kernel
    if derivative_handling == "auto":
        derivative_handling = "pathwise" if kern.kind == "squared_exp" else "weak"
    if derivative_handling not in ("pathwise", "weak"):
        raise ValueError(f"unknown derivative handling {derivative_handling!r}")
    if derivative_handling == "pathwise" and kern.kind != "squared_exp":
        raise ValueError("pathwise derivatives require the squared_exp kernel")

    zeta = traj.zeta
    base = traj.base
    times = ens.grid.times()
    interior = slice(1, -1) if ens.grid.n_steps > 2 else slice(None)
    t_eval = times[interior]
    dvel = np.stack([base.dpsi(t) for t in t_eval], axis=-1)  # (n, m_eval)
    sum_dvel = dvel.sum(axis=0)

    per_path_shift = np.empty(ens.n_paths)
    per_path_linear = np.empty(ens.n_paths)
    per_path_cross = np.empty(ens.n_paths)
    for idx, vals in ens.iter_chunks():
        u = np.broadcast_to(vals, (len(idx), base.n, ens.grid.n_steps)) if ens.mode == "shared" else vals
        if derivative_handling == "pathwise":
            du = _fd_time_derivative(vals, ens.grid.dt)
            du = np.broadcast_to(du, u.shape) if ens.mode == "shared" else du
            lin = coeffs.c1 * zeta * du[..., interior].sum(axis=1)
        else:
            lin = np.zeros((len(idx), len(t_eval)))
        ue = u[..., interior]
        s_u = ue.sum(axis=1)
        cross = 2.0 * zeta * (coeffs.c2 * np.einsum("km,akm->am", dvel, ue) + coeffs.c3 * sum_dvel * s_u)
        quad = zeta * zeta * (coeffs.c2 * np.sum(ue * ue, axis=1) + coeffs.c3 * s_u * s_u)
        per_path_shift[idx] = (lin + cross + quad).mean(axis=1)
        per_path_linear[idx] = lin.mean(axis=1)
        per_path_cross[idx] = cross.mean(axis=1)

    n_paths = ens.n_paths
    base_res = float(
        np.mean([h_residual(ModuliState(base.psi0, base.dpsi(t), base.ddpsi(t)), coeffs) for t in t_eval])
    )
    return AveragingReport(
        mc_mean=float(per_path_shift.mean()),
        mc_se=float(per_path_shift.std(ddof=1) / math.sqrt(n_paths)),
        analytic=induced_lambda_analytic(kern, zeta, base.n, ens.mode, coeffs),
        mode=ens.mode,
        n_paths=n_paths,
        zeta=zeta,
        n=base.n,
        seed=ens.seed,
        kernel_kind=traj.ensemble.kernel.kind,
        base_residual=base_res,
        derivative_handling=derivative_handling,
        linear_term_mean=float(per_path_linear.mean()),
        linear_term_se=float(per_path_linear.std(ddof=1) / math.sqrt(n_paths)),
        cross_term_mean=float(per_path_cross.mean()),
        cross_term_se=float(per_path_cross.std(ddof=1) / math.sqrt(n_paths)),
    )


def averaged_with_preexisting_lambda(
    traj: PerturbedTrajectory,
    coeffs: OperatorCoefficients | None = None,
    derivative_handling: str = "auto",
) -> AveragingReport:
    """Averaged residual of a forced exponential base: total = lam_bar + induced.

    The base must be a LinearBase solving the operator with forcing
    lam_bar; the report's mc_mean is the full averaged residual (base value
    plus shift) compared against lam_bar + induced lambda.
    """
    if coeffs is None:
        coeffs = OperatorCoefficients.einstein()
    if not isinstance(traj.base, LinearBase):
        raise ValueError("pre-existing-forcing averaging needs a LinearBase")
    rep = mc_averaged_residual(traj, coeffs, derivative_handling)
    return AveragingReport(
        mc_mean=rep.mc_mean + rep.base_residual,
        mc_se=rep.mc_se,
        analytic=rep.analytic + rep.base_residual,
        mode=rep.mode,
        n_paths=rep.n_paths,
        zeta=rep.zeta,
        n=rep.n,
        seed=rep.seed,
        kernel_kind=rep.kernel_kind,
        base_residual=rep.base_residual,
        derivative_handling=rep.derivative_handling,
        linear_term_mean=rep.linear_term_mean,
        linear_term_se=rep.linear_term_se,
        cross_term_mean=rep.cross_term_mean,
        cross_term_se=rep.cross_term_se,
    )


# ---------------------------------------------------------------------------
# Averaged slice observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftEntry:
    """One averaged observable shift with every candidate normalization."""

    name: str
    mc_mean: float
    mc_se: float
    candidates: dict
    supported: tuple = field(default=())

    def z_for(self, value: float) -> float:
        if self.mc_se == 0.0:
            return 0.0 if self.mc_mean == value else math.inf
        return (self.mc_mean - value) / self.mc_se


@dataclass(frozen=True)
class ObservableShiftReport:
    entries: tuple
    mode: str
    n_paths: int

    def entry(self, name: str) -> ShiftEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "N": self.n_paths,
            "entries": [
                {
                    "name": e.name,
                    "mc_mean": e.mc_mean,
                    "mc_se": e.mc_se,
                    "candidates": e.candidates,
                    "supported": list(e.supported),
                }
                for e in self.entries
            ],
        }


def averaged_observables(traj: PerturbedTrajectory) -> ObservableShiftReport:
    """Ensemble shifts of curvature, expansion and shear scalars.

    Every candidate normalization of the shifts is attached and the ones
    the ensemble supports (|z| <= 3) are flagged; nothing is chosen
    silently.  Expansion is reported in two forms: the linear combination
    sum psi_i' (whose average is exactly invariant) and the quadratic form
    sum (psi_i')^2 used by the slice observables (whose average shifts by
    n*zeta^2*J(0)).
    """
    ens = traj.ensemble
    if ens.n_paths < MIN_ENSEMBLE:
        raise ValueError(f"need at least {MIN_ENSEMBLE} paths, got {ens.n_paths}")
    base = traj.base
    zeta = traj.zeta
    kern = ens.sampling_kernel
    j0 = kern.j0()
    n = base.n
    pathwise = kern.kind == "squared_exp"

    times = ens.grid.times()
    interior = slice(1, -1) if ens.grid.n_steps > 2 else slice(None)
    t_eval = times[interior]
    dvel = np.stack([base.dpsi(t) for t in t_eval], axis=-1)
    sum_dvel = dvel.sum(axis=0)

    names = ["chi_linear", "chi_quadratic", "kretschmann_linearized", "shear"]
    acc = {name: np.empty(ens.n_paths) for name in names}
    for idx, vals in ens.iter_chunks():
        u = np.broadcast_to(vals, (len(idx), n, ens.grid.n_steps)) if ens.mode == "shared" else vals
        if pathwise:
            du = _fd_time_derivative(vals, ens.grid.dt)
            du = np.broadcast_to(du, u.shape) if ens.mode == "shared" else du
            dudsum = du[..., interior].sum(axis=1)
        else:
            dudsum = 0.0
        ue = u[..., interior]
        s_u = ue.sum(axis=1)
        vel_cross = np.einsum("km,akm->am", dvel, ue)
        quad_diag = np.sum(ue * ue, axis=1)
        chi_lin = zeta * s_u
        chi_quad = 2.0 * zeta * vel_cross + zeta * zeta * quad_diag
        k_lin = (
            4.0 * zeta * dudsum
            + 4.0 * chi_quad
            + 2.0 * (2.0 * zeta * sum_dvel * s_u + zeta * zeta * s_u * s_u)
        )
        diff_u = ue[:, :, None, :] - ue[:, None, :, :]
        diff_v = dvel[:, None, :] - dvel[None, :, :]
        shear = np.sum(
            2.0 * zeta * diff_v[None] * diff_u + zeta * zeta * diff_u * diff_u, axis=(1, 2)
        )
        acc["chi_linear"][idx] = chi_lin.mean(axis=1)
        acc["chi_quadratic"][idx] = chi_quad.mean(axis=1)
        acc["kretschmann_linearized"][idx] = k_lin.mean(axis=1)
        acc["shear"][idx] = shear.mean(axis=1)

    z2j = zeta * zeta * j0
    cands = {
        "chi_linear": {"invariant": 0.0},
        "chi_quadratic": {"invariant": 0.0, "diagonal_shift": n * z2j},
        "kretschmann_linearized": {
            "statement": 6.0 * n * z2j,
            "shared_full": 4.0 * n * z2j + 2.0 * n * n * z2j,
        },
        "shear": {
            "statement": 4.0 * n * z2j,
            "proof": 0.0,
            "iid_full": 2.0 * z2j * (n * n - n),
        },
    }
    entries = []
    for name in names:
        series = acc[name]
        mean = float(series.mean())
        se = float(series.std(ddof=1) / math.sqrt(len(series)))
        entry = ShiftEntry(name, mean, se, cands[name])
        supported = tuple(k for k, v in cands[name].items() if abs(entry.z_for(v)) <= 3.0)
        entries.append(ShiftEntry(name, mean, se, cands[name], supported))
    return ObservableShiftReport(tuple(entries), ens.mode, ens.n_paths)


# ---------------------------------------------------------------------------
# Exact geometric Brownian motion and Lyapunov estimators
# ---------------------------------------------------------------------------


def brownian_paths(grid, n_paths: int, seed: int) -> np.ndarray:
    """Standard Brownian paths on the grid, B(t_0) = 0, one stream per path."""
    sqdt = math.sqrt(grid.dt)
    out = np.empty((n_paths, grid.n_steps))
    for r in range(n_paths):
        incr = sqdt * path_rng(seed, r, 0).standard_normal(grid.n_steps - 1)
        out[r, 0] = 0.0
        np.cumsum(incr, out=out[r, 1:])
    return out


def gbm_exact(u0: float, alpha: float, zeta: float, brownian: np.ndarray, grid) -> np.ndarray:
    """Exact solution u0 * exp((-alpha - zeta^2/2) t + zeta B(t)).

    This is the strong solution of du = -alpha*u dt + zeta*u dB in the Ito
    sense (the -zeta^2/2 drift is the Ito correction).  The pathwise
    log-slope is the Lyapunov exponent -alpha - zeta^2/2; the companion
    unstable system with drift +alpha has exponent alpha - zeta^2/2 and is
    stabilized by noise exactly when that is negative.
    """
    if u0 <= 0.0:
        raise ValueError("initial value must be positive")
    t = grid.times() - grid.t_start
    return u0 * np.exp((-alpha - 0.5 * zeta * zeta) * t + zeta * np.atleast_2d(brownian))


def gbm_euler(u0: float, alpha: float, zeta: float, brownian: np.ndarray, grid) -> np.ndarray:
    """Euler-Maruyama iteration of the same SDE on the same increments."""
    if u0 <= 0.0:
        raise ValueError("initial value must be positive")
    b = np.atleast_2d(brownian)
    out = np.empty_like(b)
    out[:, 0] = u0
    db = np.diff(b, axis=1)
    for k in range(b.shape[1] - 1):
        out[:, k + 1] = out[:, k] * (1.0 - alpha * grid.dt + zeta * db[:, k])
    return out


def lce_empirical(values: np.ndarray, total_time: float) -> tuple[float, float]:
    """Pathwise Lyapunov estimate (1/T) log(u(T)/u(0)), ensemble mean and SE."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if np.any(values <= 0.0):
        raise ValueError("paths must stay strictly positive for log slopes")
    rates = np.log(values[:, -1] / values[:, 0]) / total_time
    se = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
    return float(rates.mean()), se


# ---------------------------------------------------------------------------
# White-noise divergence and moment bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceScan:
    table: tuple
    fitted_exponent: float

    def to_dict(self) -> dict:
        return {"table": [dict(row) for row in self.table], "fitted_exponent": self.fitted_exponent}


def white_noise_divergence_scan(
    varsigma_list,
    zeta: float,
    n: int,
    C: float = 1.0,
    mode: str = "iid",
    coeffs: OperatorCoefficients | None = None,
) -> DivergenceScan:
    """Induced constant against correlation time: the white limit diverges.

    For the ou kernel J(0) = C/varsigma, so the induced constant scales
    like 1/varsigma; the fitted log-log exponent should be -1.
    """
    rows = []
    for vs in varsigma_list:
        lam = induced_lambda_analytic(CovarianceKernel.ou(C, vs), zeta, n, mode, coeffs)
        rows.append({"varsigma": float(vs), "lambda": lam})
    if zeta == 0.0 or len(rows) < 2:
        return DivergenceScan(tuple(rows), 0.0)
    x = np.log([r["varsigma"] for r in rows])
    y = np.log([r["lambda"] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    return DivergenceScan(tuple(rows), slope)


@dataclass(frozen=True)
class MomentBoundReport:
    ell: int
    bound: float
    sup_of_means: float
    se_at_sup: float
    holds: bool
    pathwise_sup_mean: float
    pathwise_sup_holds: bool

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "bound": self.bound,
            "sup_of_means": self.sup_of_means,
            "se_at_sup": self.se_at_sup,
            "holds": self.holds,
            "pathwise_sup_mean": self.pathwise_sup_mean,
            "pathwise_sup_holds": self.pathwise_sup_holds,
        }


def moment_bound_check(
    psi0,
    ell: int,
    K: float,
    T: float,
    zeta: float,
    n_paths: int,
    seed: int,
    n_steps: int = 101,
) -> MomentBoundReport:
    """Exponential moment bound for linear-diffusion perturbations.

    Each component follows d psi_i = zeta * psi_i dW_i (diffusion f(psi) =
    psi, so ||zeta f||^2 <= K ||psi||^2 requires zeta^2 <= K), with exact
    solution psi_i(t) = psi0_i exp(zeta B_i - zeta^2 t / 2).  The checked
    statement is

        sup_t E{ ||psi(t)||^ell }  <=  ||psi0||^ell exp(K ell (ell-1) T / 2)

    with the sup over the time grid taken of the Monte-Carlo means (at
    ell = 1 each component is a martingale and the mean curve is flat, so
    the bound is tight).  The pathwise-sup statistic E{sup_t ||psi||^ell}
    is also reported: it strictly exceeds the bound at ell = 1 for any
    nondegenerate noise, which is why it is logged, not asserted.
    """
    if ell < 1:
        raise ValueError("moment order ell must be at least 1")
    if zeta * zeta > K + 1e-12:
        raise ValueError("hypothesis requires zeta^2 <= K for the linear diffusion")
    psi0 = np.atleast_1d(np.asarray(psi0, dtype=float))
    n = len(psi0)
    grid = TimeGrid(0.0, T / (n_steps - 1), n_steps)
    t = grid.times()
    norm0 = float(np.linalg.norm(psi0))
    bound = norm0**ell * math.exp(0.5 * K * ell * (ell - 1) * T)

    means = np.zeros(n_steps)
    sq = np.zeros(n_steps)
    pathwise = 0.0
    chunk = 2048
    for start in range(0, n_paths, chunk):
        idx = range(start, min(start + chunk, n_paths))
        b = np.empty((len(idx), n, n_steps))
        for a, r in enumerate(idx):
            for i in range(n):
                incr = math.sqrt(grid.dt) * path_rng(seed, r, i).standard_normal(n_steps - 1)
                b[a, i, 0] = 0.0
                np.cumsum(incr, out=b[a, i, 1:])
        paths = psi0[None, :, None] * np.exp(zeta * b - 0.5 * zeta * zeta * t[None, None, :])
        norm_ell = np.linalg.norm(paths, axis=1) ** ell
        means += norm_ell.sum(axis=0)
        sq += (norm_ell * norm_ell).sum(axis=0)
        pathwise += norm_ell.max(axis=1).sum()
    means /= n_paths
    var = np.maximum(sq / n_paths - means * means, 0.0)
    se = np.sqrt(var / n_paths)
    k_sup = int(np.argmax(means))
    sup_means = float(means[k_sup])
    se_sup = float(se[k_sup])
    rel_se = se_sup / sup_means if sup_means > 0 else 0.0
    pathwise_mean = pathwise / n_paths
    return MomentBoundReport(
        ell=ell,
        bound=bound,
        sup_of_means=sup_means,
        se_at_sup=se_sup,
        holds=bool(sup_means <= bound * (1.0 + 5.0 * rel_se)),
        pathwise_sup_mean=float(pathwise_mean),
        pathwise_sup_holds=bool(pathwise_mean <= bound * (1.0 + 5.0 * rel_se)),
    )
