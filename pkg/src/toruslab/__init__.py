"""toruslab: a numerical laboratory for toroidal Kasner-type cosmologies.

The vacuum field equations on an n-torus with time-dependent radii reduce to
an n-dimensional nonlinear ODE system for the log-radii ("moduli").  This
package evaluates those nonlinear operators, constructs the closed-form
solution families (static, power-law, exponential), perturbs them with
deterministic short pulses and with colored Gaussian noise, and verifies the
resulting averaging laws, growth estimates and probability bounds by
Monte-Carlo ensembles with explicit standard errors.

Subpackage layout:

- ``core``      value types, geometry observables, metric norms
- ``dynamics``  nonlinear operators and closed-form solutions
- ``pulse``     deterministic short-pulse and constant perturbations
- ``randfield`` colored Gaussian noise sampling and path calculus
- ``stochavg``  Monte-Carlo averaging of the perturbed operators
- ``estimate``  analytic growth laws, Lyapunov exponents, probability bounds
- ``cli``       batch experiment runner (``toruslab run|verify|list-experiments``)
"""

from toruslab.core import (
    GeometryObservables,
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
from toruslab.dynamics import (
    KLParameter,
    LambdaTerm,
    check_kasner,
    d_residual,
    general_solution_beta,
    h_residual,
    kasner_solution,
    kl_exponents,
    lambda_from_Lambda,
    lambda_solution,
)

__version__ = "0.1.0"

__all__ = [
    "TimeGrid",
    "ModuliState",
    "Radii",
    "KasnerExponents",
    "GeometryObservables",
    "OperatorCoefficients",
    "radii_from_moduli",
    "spatial_volume",
    "metric_norms",
    "observables",
    "LambdaTerm",
    "KLParameter",
    "h_residual",
    "d_residual",
    "kasner_solution",
    "check_kasner",
    "kl_exponents",
    "lambda_solution",
    "lambda_from_Lambda",
    "general_solution_beta",
    "__version__",
]
