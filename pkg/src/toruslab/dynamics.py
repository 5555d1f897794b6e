"""Nonlinear operators of the reduced toroidal system and their closed forms.

The log-radii operator is

    H[psi] = c1*sum_i psi_i'' + c2*sum_i (psi_i')^2 + c3*(sum_i psi_i')^2

and the equivalent radii operator, related by a_i = exp(psi_i),

    D[a] = c1*sum_i a_i''/a_i + (c2-c1)*sum_i (a_i'/a_i)^2 + c3*(sum_i a_i'/a_i)^2.

The chain rule a''/a = psi'' + (psi')^2 makes D[exp(psi)] = H[psi] an exact
identity for every coefficient triple.

Closed-form solution families:

- power law      psi_i = psi_i(0) + p_i ln t, solvable iff sum p = sum p^2
  (both operator presets vanish on it when the sums equal 1);
- static         psi_i = const;
- exponential    psi_i = psi_i(0) +/- q t with q chosen so the operator
  equals a prescribed constant forcing lambda.

Analytic derivatives are used whenever the trajectory is closed form; for
sampled trajectories second-order central differences are provided
(one-sided at the ends).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from toruslab.core import (
    KASNER_TOL,
    KasnerExponents,
    ModuliState,
    OperatorCoefficients,
    Radii,
)


@dataclass(frozen=True)
class LambdaTerm:
    """Constant forcing on the right-hand side of the nonlinear system.

    ``lam`` is the forcing itself; ``Lambda_raw``, when present, is the
    underlying constant it was derived from via lam = Lambda*(1+n)/(1-n).
    """

    lam: float
    Lambda_raw: float | None = None


@dataclass(frozen=True)
class KLParameter:
    """One-parameter chart u >= 1 of the ordered exponent triplets."""

    u: float

    def __post_init__(self):
        if not (self.u >= 1.0):
            raise ValueError("parameter u must satisfy u >= 1")


def h_residual(state: ModuliState, coeffs: OperatorCoefficients) -> float:
    """Evaluate the log-radii operator on a state."""
    dp = state.dpsi
    s1 = float(dp.sum())
    return float(
        coeffs.c1 * state.ddpsi.sum()
        + coeffs.c2 * np.sum(dp * dp)
        + coeffs.c3 * s1 * s1
    )


def d_residual(a, da, dda, coeffs: OperatorCoefficients) -> float:
    """Evaluate the radii operator; exactly h_residual of the log state.

    ``a`` may be a Radii value or a raw vector; raw vectors with any
    nonpositive entry are rejected.
    """
    av = a.a if isinstance(a, Radii) else np.asarray(a, dtype=float)
    da = np.asarray(da, dtype=float)
    dda = np.asarray(dda, dtype=float)
    if np.any(av <= 0.0):
        raise ValueError("all radii must be strictly positive")
    hub = da / av
    s1 = float(hub.sum())
    return float(
        coeffs.c1 * np.sum(dda / av)
        + (coeffs.c2 - coeffs.c1) * np.sum(hub * hub)
        + coeffs.c3 * s1 * s1
    )


def h_residual_series(psi_values: np.ndarray, dt: float, coeffs: OperatorCoefficients) -> np.ndarray:
    """Operator values along a sampled trajectory via finite differences.

    ``psi_values`` has shape (n, m): n components sampled at m uniformly
    spaced times.  Second-order central stencils are used in the interior,
    one-sided second-order stencils at the two ends.
    """
    psi = np.asarray(psi_values, dtype=float)
    if psi.ndim == 1:
        psi = psi[None, :]
    n, m = psi.shape
    if m < 3:
        raise ValueError("need at least 3 samples for second-order differences")
    d1 = np.gradient(psi, dt, axis=1, edge_order=2)
    d2 = np.empty_like(psi)
    d2[:, 1:-1] = (psi[:, 2:] - 2.0 * psi[:, 1:-1] + psi[:, :-2]) / dt**2
    d2[:, 0] = (2.0 * psi[:, 0] - 5.0 * psi[:, 1] + 4.0 * psi[:, 2] - psi[:, 3]) / dt**2 if m >= 4 else d2[:, 1]
    d2[:, -1] = (2.0 * psi[:, -1] - 5.0 * psi[:, -2] + 4.0 * psi[:, -3] - psi[:, -4]) / dt**2 if m >= 4 else d2[:, -2]
    s1 = d1.sum(axis=0)
    return coeffs.c1 * d2.sum(axis=0) + coeffs.c2 * np.sum(d1 * d1, axis=0) + coeffs.c3 * s1 * s1


def kasner_solution(psi0, p: KasnerExponents, t: float) -> ModuliState:
    """Power-law state psi_i = psi_i(0) + p_i ln t at a time t > 0."""
    if not t > 0.0:
        raise ValueError("power-law solutions require t > 0")
    psi0 = np.asarray(psi0, dtype=float)
    pv = p.p
    if len(psi0) != len(pv):
        raise ValueError("psi0 and exponents must have the same length")
    return ModuliState(psi0 + pv * math.log(t), pv / t, -pv / t**2)


def check_kasner(p: KasnerExponents, tol: float = KASNER_TOL) -> tuple[float, bool]:
    """Residual |sum p - sum p^2| of the power-law constraint and validity."""
    res = p.constraint_residual()
    return res, res < tol


def kl_exponents(u: KLParameter) -> KasnerExponents:
    """Ordered exponent triplet from the one-parameter chart.

    p1 = -u/(1+u+u^2), p2 = (1+u)/(1+u+u^2), p3 = u(1+u)/(1+u+u^2).
    Both sums equal 1 identically, so the output always satisfies the
    power-law constraint; p1 <= 0 <= p2 <= p3 with p1 < p2 for every u.
    """
    uu = u.u
    denom = 1.0 + uu + uu * uu
    return KasnerExponents(np.array([-uu, 1.0 + uu, uu * (1.0 + uu)]) / denom)


def lambda_solution(
    psi0,
    lam: LambdaTerm,
    n: int,
    sign: int = +1,
    t: float = 0.0,
    coeffs: OperatorCoefficients | None = None,
) -> ModuliState:
    """Isotropic exponential solution psi_i = psi_i(0) + sign*q*t of H = lam.

    The rate q is chosen so the requested operator preset evaluates to
    exactly ``lam.lam`` on the returned state:

        q = sqrt(lam / (n * (c2 + n*c3)))

    For the diagonal preset (the default) this is q = sqrt(lam/n).
    """
    if coeffs is None:
        coeffs = OperatorCoefficients.einstein_diagonal()
    if n < 1:
        raise ValueError("dimension n must be at least 1")
    if lam.lam < 0.0:
        raise ValueError("negative forcing gives an imaginary rate; out of scope")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    psi0 = np.asarray(psi0, dtype=float)
    if len(psi0) != n:
        raise ValueError("psi0 must have length n")
    q = sign * math.sqrt(lam.lam / coeffs.isotropic_quadratic_weight(n))
    return ModuliState(psi0 + q * t, np.full(n, q), np.zeros(n))


def lambda_from_Lambda(Lambda: float, n: int) -> LambdaTerm:
    """Map a bare constant to the forcing: lam = Lambda*(1+n)/(1-n).

    The factor is singular at n = 1, which is rejected rather than mapped
    to an infinity.
    """
    if n == 1:
        raise ValueError("the (1+n)/(1-n) factor is singular at n = 1")
    if n < 1:
        raise ValueError("dimension n must be at least 1")
    return LambdaTerm(lam=Lambda * (1.0 + n) / (1.0 - n), Lambda_raw=float(Lambda))


def general_solution_beta(
    psi0,
    q,
    beta: float,
    t: float,
    C: float | None = None,
    tol: float = KASNER_TOL,
) -> tuple[ModuliState, float]:
    """Closed forms of the one-parameter family (1, beta, 0).

    With ``C`` omitted, returns the homogeneous log solution
    psi_i = psi_i(0) + q_i ln t (requires sum q = beta * sum q^2) together
    with the operator value 0 as a cross-check.  With ``C`` given, returns
    the linear solution psi_i = psi_i(0) + q_i t (requires
    beta * sum q_i^2 = C) and the value C.
    """
    psi0 = np.asarray(psi0, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(psi0) != len(q):
        raise ValueError("psi0 and q must have the same length")
    coeffs = OperatorCoefficients.general(beta)
    if C is None:
        residual = abs(q.sum() - beta * np.sum(q * q))
        if residual > tol:
            raise ValueError(f"log-solution constraint violated: residual {residual:.3e}")
        if not t > 0.0:
            raise ValueError("log solutions require t > 0")
        state = ModuliState(psi0 + q * math.log(t), q / t, -q / t**2)
        return state, h_residual(state, coeffs)
    residual = abs(beta * np.sum(q * q) - C)
    if residual > tol:
        raise ValueError(f"linear-solution constraint violated: residual {residual:.3e}")
    state = ModuliState(psi0 + q * t, q, np.zeros_like(q))
    return state, h_residual(state, coeffs)


def isotropic_rate_for_forcing(C: float, beta: float, n: int) -> float:
    """Isotropic rate q = sqrt(C/(beta*n)) of the (1, beta, 0) family."""
    if C < 0.0 or beta <= 0.0 or n < 1:
        raise ValueError("require C >= 0, beta > 0 and n >= 1")
    return math.sqrt(C / (beta * n))


def forcing_residual_report(q: float, n: int) -> dict:
    """Operator value of the isotropic linear state under both presets.

    On psi_i = q*t the diagonal preset gives n*q^2 and the full trace
    preset gives n*(1+n)*q^2/2.  Both are reported so the normalization of
    any constant-forcing claim can be checked explicitly.
    """
    state = ModuliState(np.zeros(n), np.full(n, q), np.zeros(n))
    return {
        "q": float(q),
        "n": int(n),
        "diagonal": h_residual(state, OperatorCoefficients.einstein_diagonal()),
        "trace": h_residual(state, OperatorCoefficients.einstein()),
    }
