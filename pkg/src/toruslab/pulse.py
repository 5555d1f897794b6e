"""Deterministic perturbations of static solutions: short pulses and steps.

A short pulse is a sharply peaked Gaussian disturbance A*exp(-t^2/(2*theta^2))
of each modulus velocity.  Its running integral converges to A*theta*sqrt(pi/2),
so the perturbed radii approach new static values ("attractors") once t
exceeds a few widths: the static torus is Lyapunov stable to short pulses,
and the pulse merely moves it between equilibria.

A constant-amplitude step A switched on at t = 0 never converges: it drives
exponential growth exp(A*t) of every radius and enters the operator as the
constant n*A^2 (diagonal preset), so A acts as a Lyapunov exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from toruslab.core import ModuliState, OperatorCoefficients, Radii
from toruslab.dynamics import h_residual

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class GaussianPulse:
    """Per-component amplitudes A_i and widths theta_i > 0 (theta << 1 intended)."""

    A: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        A = np.atleast_1d(np.asarray(self.A, dtype=float))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if A.shape != theta.shape:
            raise ValueError("A and theta must have the same length")
        if np.any(theta <= 0.0):
            raise ValueError("all pulse widths must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def is_anisotropic(self) -> bool:
        return bool(np.ptp(self.A) > 0.0 or np.ptp(self.theta) > 0.0)

    @staticmethod
    def isotropic(A: float, theta: float, n: int) -> "GaussianPulse":
        return GaussianPulse(np.full(n, A), np.full(n, theta))

    def profile(self, t: float) -> np.ndarray:
        """Pulse values A_i * exp(-t^2 / (2 theta_i^2)) at time t."""
        return self.A * np.exp(-(t * t) / (2.0 * self.theta**2))

    def profile_derivative(self, t: float) -> np.ndarray:
        # d/dt of the Gaussian: -(t/theta^2) times the profile.
        return -(t / self.theta**2) * self.profile(t)


@dataclass(frozen=True)
class ConstantPulse:
    """Constant amplitude switched on at t = 0."""

    A: float


def gaussian_pulse_integral(A: float, theta: float, t: float) -> float:
    """Running integral int_0^t A exp(-tau^2/(2 theta^2)) dtau in closed form.

    Equals A * theta * sqrt(pi/2) * erf(t / (sqrt(2) theta)); the asymptote
    as t -> inf is A * theta * sqrt(pi/2).  (Dimensional analysis fixes the
    prefactor to theta, not 1/theta: the integral of a height-A, width-theta
    bump scales like A*theta.)
    """
    if theta <= 0.0:
        raise ValueError("pulse width theta must be positive")
    return A * theta * SQRT_HALF_PI * float(erf(t / (math.sqrt(2.0) * theta)))


def _pulse_integrals(pulse: GaussianPulse, t: float) -> np.ndarray:
    return pulse.A * pulse.theta * SQRT_HALF_PI * erf(t / (math.sqrt(2.0) * pulse.theta))


def perturbed_moduli(psiE, pulse: GaussianPulse, t: float) -> ModuliState:
    """State of the pulse-perturbed static moduli at time t >= 0.

    psi_i(t) = psiE_i + int_0^t pulse_i, with analytic first and second
    derivatives (the second via the first Hermite polynomial).
    """
    psiE = np.asarray(psiE, dtype=float)
    if len(psiE) != pulse.n:
        raise ValueError("psiE and pulse must have the same length")
    return ModuliState(
        psiE + _pulse_integrals(pulse, t),
        pulse.profile(t),
        pulse.profile_derivative(t),
    )


def attractor(aE: Radii, pulse: GaussianPulse) -> Radii:
    """New static radii a_i * exp(A_i theta_i sqrt(pi/2)) reached after the pulse."""
    if aE.n != pulse.n:
        raise ValueError("radii and pulse must have the same length")
    return Radii(aE.a * np.exp(pulse.A * pulse.theta * SQRT_HALF_PI))


def pulse_source_term(pulse: GaussianPulse, t: float, coeffs: OperatorCoefficients) -> float:
    """Source S(t) the perturbed trajectory feeds into the operator.

    S = c1*sum_i G_i' + c2*sum_i G_i^2 + c3*(sum_i G_i)^2 evaluated at t;
    identical to the operator value of the perturbed trajectory itself.
    S decays like the pulse once t exceeds a few widths.
    """
    g = pulse.profile(t)
    dg = pulse.profile_derivative(t)
    s1 = float(g.sum())
    return float(coeffs.c1 * dg.sum() + coeffs.c2 * np.sum(g * g) + coeffs.c3 * s1 * s1)


def constant_perturbation(psiE, pulse: ConstantPulse, t: float) -> tuple[ModuliState, float]:
    """Step-perturbed state psi_i = psiE_i + A*t and its operator value n*A^2.

    The residual is reported in the diagonal preset, where the constant
    forcing identity lambda = n*A^2 is exact; the trace preset gives
    n*(1+n)*A^2/2 on the same state and can be evaluated directly with
    h_residual when the other reading is wanted.
    """
    psiE = np.asarray(psiE, dtype=float)
    n = len(psiE)
    A = pulse.A
    state = ModuliState(psiE + A * t, np.full(n, A), np.zeros(n))
    residual = h_residual(state, OperatorCoefficients.einstein_diagonal())
    return state, residual


def perturbed_norm(aE: Radii, pulse, t: float) -> float:
    """Euclidean distance of the perturbed radii from the static radii.

    Computed exactly from components: ||a_i*(exp(Y_i(t)) - 1)|| with Y_i the
    running pulse integral (Gaussian pulse) or A*t (constant pulse).  For a
    Gaussian pulse this is bounded for all t; for a constant pulse with
    A > 0 it grows without bound.
    """
    if isinstance(pulse, ConstantPulse):
        integrals = np.full(aE.n, pulse.A * t)
    else:
        if aE.n != pulse.n:
            raise ValueError("radii and pulse must have the same length")
        integrals = _pulse_integrals(pulse, t)
    diff = aE.a * (np.exp(integrals) - 1.0)
    return float(np.linalg.norm(diff))


@dataclass(frozen=True)
class RelaxationReport:
    """Relative deviations of the slice observables along a pulse."""

    times: np.ndarray
    dev_kretschmann: np.ndarray
    dev_expansion: np.ndarray
    dev_shear: np.ndarray
    settle_time: float
    max_dev_after_settle: float

    def settled(self, tol: float = 1e-8) -> bool:
        return self.max_dev_after_settle < tol

    def crossing_times(self, tol: float = 1e-8) -> dict:
        """First grid time after which each deviation stays below tol."""
        out = {}
        for name, dev in (
            ("kretschmann", self.dev_kretschmann),
            ("expansion", self.dev_expansion),
            ("shear", self.dev_shear),
        ):
            above = np.nonzero(dev >= tol)[0]
            if len(above) == 0:
                out[name] = float(self.times[0])
            elif above[-1] + 1 < len(self.times):
                out[name] = float(self.times[above[-1] + 1])
            else:
                out[name] = math.inf
        return out


def relaxation_check(p, pulse: GaussianPulse, t_grid) -> RelaxationReport:
    """Track how fast pulse-perturbed observables relax to the power-law ones.

    The base is the power-law trajectory with exponents p; the pulse adds
    A_i*exp(-t^2/2 theta_i^2) to each velocity.  Deviations are relative and
    the settle time is 10 * max(theta), after which every term still
    carrying the pulse envelope is far below roundoff.
    """
    p = np.asarray(p, dtype=float)
    times = np.asarray(t_grid, dtype=float)
    if np.any(times <= 0.0):
        raise ValueError("power-law base requires positive times")
    if len(p) != pulse.n:
        raise ValueError("exponents and pulse must have the same length")

    dev_k = np.empty(len(times))
    dev_chi = np.empty(len(times))
    dev_shear = np.empty(len(times))
    for k, t in enumerate(times):
        dp0 = p / t
        ddp0 = -p / t**2
        dp1 = dp0 + pulse.profile(t)
        ddp1 = ddp0 + pulse.profile_derivative(t)
        base = _slice_observables(dp0, ddp0)
        pert = _slice_observables(dp1, ddp1)
        dev_k[k] = _rel_dev(pert[0], base[0])
        dev_chi[k] = _rel_dev(pert[1], base[1])
        dev_shear[k] = _rel_dev(pert[2], base[2])

    settle_time = 10.0 * float(pulse.theta.max())
    after = times > settle_time
    max_after = float(
        np.max(np.concatenate([dev_k[after], dev_chi[after], dev_shear[after]]))
        if np.any(after)
        else np.inf
    )
    return RelaxationReport(times, dev_k, dev_chi, dev_shear, settle_time, max_after)


def _slice_observables(dp, ddp):
    cross = np.outer(dp, dp)
    k = 4.0 * ddp.sum() + 4.0 * np.sum(dp * dp) + 2.0 * np.sum(cross * cross)
    chi = np.sum(np.abs(dp * dp))
    diff = dp[:, None] - dp[None, :]
    shear = np.sum(diff * diff)
    return float(k), float(chi), float(shear)


def _rel_dev(x, ref):
    scale = max(abs(ref), 1e-300)
    return abs(x - ref) / scale
