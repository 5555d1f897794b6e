"""Probabilistic stability: tail bounds evaluated against ensembles.

Stability under noise is a statement about probabilities, not trajectories.
The bound suite turns an ensemble of perturbed norms into checked
inequalities: Markov and Chernoff tails, Hoeffding for bounded families,
the sub-Gaussian maximum, and gamma-basins ("the equilibrium retains the
ensemble with probability at least gamma").
"""

import math

import numpy as np

from toruslab.estimate import (
    chernoff_tail,
    gamma_basin,
    hoeffding_bound,
    markov_bound,
    maximal_bound,
)

rng = np.random.default_rng(7)

print("== Markov and Chernoff on a lognormal deviation ensemble ==")
norms = np.exp(rng.normal(0.0, 1.0, 20_000))
mk = markov_bound(norms, 2.0 * float(norms.mean()))
print(f"  Markov:  P(X >= 2E[X]) empirical {mk.empirical_value:.4f} <= bound {mk.bound_value:.4f}: {mk.holds}")
ch = chernoff_tail(norms, 0.5 * float(norms.mean()))
print(f"  Chernoff: P(X <= E[X]/2) empirical {ch.empirical_value:.4f} <= bound {ch.bound_value:.4f}: {ch.holds}")

print()
print("== Hoeffding for a bounded family ==")
bounded = rng.uniform(1.0, 2.0, size=(20_000, 3))
sd = float(bounded.mean(axis=1).std(ddof=1))
hf = hoeffding_bound(bounded, 1.0, 2.0, sd)
print(f"  P(mean - E >= 1 sd) empirical {hf.empirical_value:.4f} <= bound {hf.bound_value:.4f}: {hf.holds}")

print()
print("== sub-Gaussian maximum over n = 64 directions ==")
z = rng.standard_normal((20_000, 64))
mx = maximal_bound(z, sub_gaussian_C=1.0)
print(
    f"  E[max] = {mx.mean_max:.3f} <= C sqrt(2 ln n) = {mx.mean_bound:.3f}: {mx.holds_mean};"
    f" tail P(max >= {mx.params['L']:.2f}) = {mx.tail_empirical:.2e} <= {mx.tail_bound:.2e}: {mx.holds_tail}"
)

print()
print("== gamma-basins: bounded pulses stay, integrated noise escapes ==")
pulse_finals = np.full(5000, 0.3)  # deterministic pulse ends on its attractor
print(f"  pulse ensemble within L = 0.5 with gamma = 0.99: {gamma_basin(pulse_finals, 0.5, 0.99)}")
sigma = math.sqrt(2.0 * 1.0 * (50.0 - 0.5))  # integrated ou noise at t = 50
noise_finals = np.abs(np.exp(sigma * rng.standard_normal(20_000)) - 1.0)
print(f"  noise ensemble within L = 1.0 with gamma = 0.9:  {gamma_basin(noise_finals, 1.0, 0.9)}")
