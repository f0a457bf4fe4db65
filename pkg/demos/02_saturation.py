"""
Logistic saturation versus a linear restoring force
===================================================

The logistic preference loss has a margin gradient bounded by beta/4 that
decays exponentially once a pair is separated. The quadratic ratio loss pulls
back with force mu times the distance to its target, which never fades.
"""

import numpy as np

from opo_lab import dpo_local_curvature, dpo_margin_grad, saturation_profile

beta, mu = 1.0, 1.0
for m in (0.0, 2.0, 5.0, 10.0, 20.0):
    print(f"margin {m:5.1f}  dpo grad {dpo_margin_grad(m, beta):.3e}  "
          f"curvature {dpo_local_curvature(m, beta):.3e}  "
          f"opo force at same offset {mu * m:.1f}")

prof = saturation_profile(beta, mu, np.linspace(-20, 20, 4001), np.linspace(0, 20, 5))
print("grid max of the dpo gradient:", prof["dpo_max"], "(beta/4 =", beta / 4, ")")
