"""Rolling radii: power-law solutions of the toroidal vacuum system.

The log-radii operator (trace preset)

    H[psi] = sum psi'' + 1/2 sum (psi')^2 + 1/2 (sum psi')^2

vanishes on psi_i = psi_i(0) + p_i ln t whenever the exponents satisfy
sum p = sum p^2 = 1.  Some directions collapse (p_i < 0) while others
expand -- anisotropic "rolling radii".
"""

import numpy as np

from toruslab.core import KasnerExponents, OperatorCoefficients, observables
from toruslab.dynamics import KLParameter, check_kasner, h_residual, kasner_solution, kl_exponents

EINSTEIN = OperatorCoefficients.einstein()

print("== exponent triplets with two equal entries ==")
for p in ([-1 / 3, 2 / 3, 2 / 3], [0.0, 0.0, 1.0]):
    exps = KasnerExponents(np.array(p))
    residual, valid = check_kasner(exps)
    print(f"p = {p}: constraint residual {residual:.2e}, valid = {valid}")
    for t in (0.5, 2.0, 10.0):
        state = kasner_solution(np.zeros(3), exps, t)
        radii = np.exp(state.psi)
        print(
            f"  t = {t:5.1f}: radii = {np.array2string(radii, precision=4)}"
            f"   H[psi] = {h_residual(state, EINSTEIN):+.2e}"
        )

print()
print("== one-parameter chart of ordered triplets ==")
for u in (1.0, 2.0, 10.0, 1000.0):
    p = kl_exponents(KLParameter(u))
    print(f"u = {u:7.1f}: p = {np.array2string(p.p, precision=6)}")

print()
print("== slice observables blow up toward t = 0 (curvature singularity) ==")
exps = kl_exponents(KLParameter(2.0))
for t in (0.1, 1.0, 10.0):
    obs = observables(kasner_solution(np.zeros(3), exps, t))
    print(
        f"t = {t:5.2f}: curvature {obs.kretschmann:10.3e}  expansion {obs.expansion:8.3e}"
        f"  shear^2 {obs.shear_sq:8.3e}  volume {obs.volume:8.3e}"
    )
