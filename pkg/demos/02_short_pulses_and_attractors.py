"""Short pulses move a static torus between equilibria; steps inflate it.

A Gaussian bump of width theta added to each modulus velocity has a
convergent integral, so the radii approach new static values ("attractors")
once the pulse has passed - Lyapunov stability.  A constant amplitude never
converges: every radius grows like exp(A*t), amplitude = Lyapunov exponent.
"""

import math

import numpy as np

from toruslab.core import OperatorCoefficients, Radii
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

print("== pulse integral saturates: attractors exist ==")
A, theta = 1.0, 0.05
for t in (0.0, theta, 3 * theta, 8 * theta, 100 * theta):
    print(f"  int_0^{t:6.2f} pulse = {gaussian_pulse_integral(A, theta, t):.8f}")
print(f"  asymptote A*theta*sqrt(pi/2) = {A * theta * math.sqrt(math.pi / 2):.8f}")

print()
print("== perturbed radii settle on the attractor within ~8 widths ==")
pulse = GaussianPulse.isotropic(A, theta, 3)
aE = Radii(np.ones(3))
target = attractor(aE, pulse)
for t in (theta, 4 * theta, 8 * theta):
    a = np.exp(perturbed_moduli(np.zeros(3), pulse, t).psi)
    gap = np.max(np.abs(a - target.a) / target.a)
    print(f"  t = {t:6.3f}: radius = {a[0]:.8f}, rel gap to attractor = {gap:.2e}")
print(f"  source term at t = 0:        {pulse_source_term(pulse, 0.0, EINSTEIN):+.4f}")
print(f"  source term at t = 10*theta: {pulse_source_term(pulse, 10 * theta, EINSTEIN):+.2e}")

print()
print("== slice observables of a rolling background relax after the pulse ==")
report = relaxation_check(
    np.array([-1 / 3, 2 / 3, 2 / 3]), GaussianPulse.isotropic(1.0, 0.01, 3),
    np.linspace(0.05, 1.0, 96),
)
print(f"  settle time 10*max(theta) = {report.settle_time}")
print(f"  max relative deviation after settling = {report.max_dev_after_settle:.2e}")

print()
print("== a constant step never settles: exponential growth at rate A ==")
step = ConstantPulse(0.5)
_, residual = constant_perturbation(np.zeros(3), step, 1.0)
print(f"  operator value (diagonal preset) n*A^2 = {residual}")
for t in (1.0, 10.0, 20.0):
    dev = perturbed_norm(aE, step, t) / math.sqrt(3)
    print(f"  t = {t:5.1f}: |a - aE|/|aE| = {dev:12.4e}  (exp(A t) - 1 = {math.exp(0.5 * t) - 1:12.4e})")
