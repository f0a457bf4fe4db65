"""
Checking the approximation and divergence bounds
================================================

Three facts hold the method together: the log-ratio approximates the centered
ratio to second order, the chi-square trust region bounds total variation, and
the penalised and constrained problems share a solution.
"""

import numpy as np

from opo_lab import lagrange_dual_solve, log_approx_error_check, opo_closed_form, tv_chi2_bound_gap

rng = np.random.default_rng(3)

# |v - Delta| and |v^2 - Delta^2| against their bounds as delta grows
for dinf in (0.01, 0.1, 0.5, 0.9):
    d = rng.uniform(-dinf, dinf, 8)
    d[0] = dinf
    rep = log_approx_error_check(d)
    print(f"delta {dinf:4.2f}  ratio err {rep.ratio_error.max():.2e} <= {rep.ratio_bound:.2e}  "
          f"square err {rep.square_error.max():.2e} <= {rep.square_bound:.2e}")

###############################################################################
# TV <= 1/2 sqrt(E_ref[v^2]); the symmetric two-point case is tight.

gaps = [tv_chi2_bound_gap(rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))) for _ in range(1000)]
print("smallest gap over 1000 random pairs:", min(gaps))
print("binary gap:", tv_chi2_bound_gap(np.array([0.7, 0.3]), np.array([0.5, 0.5])))

###############################################################################
# A radius eps corresponds to stiffness mu = sqrt(E[omega^2] / eps).

ref = rng.dirichlet(np.ones(4))
omega = rng.normal(0, 1, 4)
v, mu = lagrange_dual_solve(omega, ref, 0.1)
print("mu:", mu, " E_ref[v^2]:", float(ref @ v.v**2))
print("matches omega/mu:", np.allclose(v.v, opo_closed_form(omega, mu).v, rtol=0, atol=1e-14))
