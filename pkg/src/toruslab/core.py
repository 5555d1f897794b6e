"""Value types and geometry observables for the toroidal moduli system.

State is carried by the log-radii psi_i of the n-torus together with their
first and second time derivatives.  All quantities are dimensionless.  The
diagonal spatial metric is g_ii = (2*pi)^2 * exp(2*psi_i); the (2*pi)^2
factor enters the metric norms only, never the dynamics.

All types are frozen dataclasses holding read-only numpy arrays, so values
can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI_SQ = (2.0 * math.pi) ** 2

#: Default absolute tolerance for the power-law exponent constraint.  The
#: closed-form exponent families are exact rationals, so any residual is
#: pure roundoff.
KASNER_TOL = 1e-10


def _as_readonly_vector(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = t_start + k*dt for k = 0 .. n_steps-1."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be a positive finite number")
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps)

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * (self.n_steps - 1)

    @property
    def span(self) -> float:
        return self.dt * (self.n_steps - 1)


@dataclass(frozen=True)
class ModuliState:
    """Log-radii psi_i with first and second time derivatives."""

    psi: np.ndarray
    dpsi: np.ndarray
    ddpsi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi", _as_readonly_vector(self.psi, "psi"))
        object.__setattr__(self, "dpsi", _as_readonly_vector(self.dpsi, "dpsi"))
        object.__setattr__(self, "ddpsi", _as_readonly_vector(self.ddpsi, "ddpsi"))
        if not (len(self.psi) == len(self.dpsi) == len(self.ddpsi)):
            raise ValueError("psi, dpsi and ddpsi must have identical length")

    @property
    def n(self) -> int:
        return len(self.psi)

    @staticmethod
    def static(psi) -> "ModuliState":
        """State of a static configuration: all derivatives vanish."""
        psi = np.asarray(psi, dtype=float)
        z = np.zeros_like(psi)
        return ModuliState(psi, z, z)


@dataclass(frozen=True)
class Radii:
    """Positive torus radii a_i = exp(psi_i)."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _as_readonly_vector(self.a, "a"))
        if np.any(self.a <= 0.0):
            raise ValueError("all radii must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.a)

    def log(self) -> np.ndarray:
        return np.log(self.a)


@dataclass(frozen=True)
class KasnerExponents:
    """Power-law exponents p_i of the rolling-radii solutions."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _as_readonly_vector(self.p, "p"))

    @property
    def n(self) -> int:
        return len(self.p)

    def constraint_residual(self) -> float:
        """|sum p_i - sum p_i^2|, the power-law solvability residual."""
        p = self.p
        return float(abs(p.sum() - (p * p).sum()))

    def is_valid(self, tol: float = KASNER_TOL) -> bool:
        return self.constraint_residual() < tol


@dataclass(frozen=True)
class OperatorCoefficients:
    """Weights (c1, c2, c3) of the nonlinear operator family.

    Acting on a state the operator is

        c1 * sum_i psi_i'' + c2 * sum_i (psi_i')^2 + c3 * sum_i sum_j psi_i' psi_j'

    where the c3 term is the full double sum, i.e. (sum_i psi_i')^2.

    Two named presets cover the system of interest:

    - ``einstein()`` = (1, 1/2, 1/2): half the Ricci scalar of the toroidal
      metric, the trace form of the reduced vacuum equations.
    - ``einstein_diagonal()`` = (1, 1, 0): the reduction obtained by keeping
      only the diagonal of the cross-component sum.  The two presets agree
      exactly whenever (sum_i psi_i')^2 = sum_i (psi_i')^2, in particular on
      every power-law solution whose exponents sum to 1.  The isotropic
      closed-form results (constant forcing lambda = n*q^2, constant
      amplitude lambda = n*A^2) hold in the diagonal form; the full trace
      form yields lambda*(1+n)/2 on the same trajectories.  Both presets are
      first class so either reading can be tested and reported.

    ``general(beta)`` = (1, beta, 0) is the wider one-parameter family the
    Einstein system embeds into.
    """

    c1: float
    c2: float
    c3: float

    @staticmethod
    def einstein() -> "OperatorCoefficients":
        return OperatorCoefficients(1.0, 0.5, 0.5)

    @staticmethod
    def einstein_diagonal() -> "OperatorCoefficients":
        return OperatorCoefficients(1.0, 1.0, 0.0)

    @staticmethod
    def general(beta: float) -> "OperatorCoefficients":
        return OperatorCoefficients(1.0, float(beta), 0.0)

    def isotropic_quadratic_weight(self, n: int) -> float:
        """Coefficient of q^2 on the isotropic linear state psi_i = q*t.

        The operator value there is (c2*n + c3*n^2) * q^2.
        """
        return self.c2 * n + self.c3 * n * n


@dataclass(frozen=True)
class GeometryObservables:
    """Scalar observables of a constant-time slice."""

    volume: float
    norm21: float
    frobenius: float
    kretschmann: float
    expansion: float
    shear_sq: float


def radii_from_moduli(psi) -> Radii:
    """Componentwise exponential map from log-radii to radii."""
    psi = np.asarray(psi, dtype=float)
    if not np.all(np.isfinite(psi)):
        raise ValueError("psi contains non-finite entries")
    return Radii(np.exp(psi))


def spatial_volume(psi) -> float:
    """Spatial volume exp(sum_i psi_i) = prod_i a_i of the torus slice."""
    psi = np.asarray(psi, dtype=float)
    if not np.all(np.isfinite(psi)):
        raise ValueError("psi contains non-finite entries")
    s = float(psi.sum())
    if s > 709.0:  # exp overflows float64 just above exp(709.78)
        raise OverflowError("spatial volume overflows the representable range")
    return math.exp(s)


def metric_norms(psi, reading: str = "columns") -> tuple[float, float]:
    """Entrywise L_{2,1} and Frobenius norms of the diagonal metric.

    The diagonal metric is g_ii = (2*pi)^2 exp(2*psi_i).  Two readings of
    the column-sum norm are exposed because the defining column index is
    ambiguous for a repeated-index sum:

    - ``"columns"`` (default): sum over columns of the column 2-norms,
      which for a diagonal matrix is sum_i |g_ii|.
    - ``"repeated"``: n identical copies of the full column norm,
      n * (sum_i |g_ii|^2)^(1/2).

    Returns (norm21, frobenius).
    """
    psi = np.asarray(psi, dtype=float)
    if not np.all(np.isfinite(psi)):
        raise ValueError("psi contains non-finite entries")
    g = TWO_PI_SQ * np.exp(2.0 * psi)
    frob = float(np.sqrt(np.sum(g * g)))
    if reading == "columns":
        norm21 = float(np.sum(np.abs(g)))
    elif reading == "repeated":
        norm21 = float(len(g) * frob)
    else:
        raise ValueError(f"unknown norm reading {reading!r}")
    return norm21, frob


def observables(state: ModuliState, reading: str = "columns") -> GeometryObservables:
    """Curvature, expansion and shear scalars of a slice.

    kretschmann = 4*sum psi'' + 4*sum (psi')^2 + 2*sum_ij (psi_i' psi_j')^2
    expansion   = sum |psi_i' psi_i'|
    shear_sq    = sum_ij |psi_i' - psi_j'|^2

    The Kretschmann combination decays like t^-4 on power-law solutions and
    diverges at t = 0, marking the initial-singularity boundary.
    """
    dp = state.dpsi
    ddp = state.ddpsi
    cross = np.outer(dp, dp)
    kretschmann = float(4.0 * ddp.sum() + 4.0 * np.sum(dp * dp) + 2.0 * np.sum(cross * cross))
    expansion = float(np.sum(np.abs(dp * dp)))
    diff = dp[:, None] - dp[None, :]
    shear_sq = float(np.sum(diff * diff))
    norm21, frob = metric_norms(state.psi, reading=reading)
    return GeometryObservables(
        volume=spatial_volume(state.psi),
        norm21=norm21,
        frobenius=frob,
        kretschmann=kretschmann,
        expansion=expansion,
        shear_sq=shear_sq,
    )
