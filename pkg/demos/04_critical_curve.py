"""
Estimating the critical curve
=============================

For one environment, h_hat(lambda) solves Z_N(0) = 1.  Comparing it with the
family h^(m)(lambda) gives the effective slope m.
"""

from copoly import BERNOULLI, GAUSSIAN, generate, h_lower, h_m, h_upper
from copoly.analysis import critical_curve, fit_m

lams = [0.2, 0.6, 1.0, 2.0, 4.0]
N = 40_000

env = generate(BERNOULLI, N, 0, 0)
points = critical_curve(env, lams, N, tol=1e-5)
fit = fit_m(points, BERNOULLI, "anchor", anchor=4.0)
print(f"binary charges, N = {N}: m_hat = {fit.m:.4f}")
print(" lambda   lower   h_hat   upper   h^(m_hat)  rel.err")
for p, (_, r) in zip(points, fit.relative_errors):
    print(f"  {p.lam:4.1f}  {h_lower(BERNOULLI, p.lam):.4f}  {p.h_hat:.4f}  {h_upper(BERNOULLI, p.lam):.4f}"
          f"   {h_m(BERNOULLI, fit.m, p.lam):.4f}    {r:+.4f}")
# h_hat is a finite-N estimate that creeps up with N; at small lambda and this
# N it can still sit below the lower bound curve, which holds only as N -> infinity.

# Gaussian charges: h^(m)(lambda) = m lambda, so m is the largest ratio.
# h_hat cannot exceed h_sat, the largest -(w_{2n-1} + w_{2n}) / 2 in the sample.
env = generate(GAUSSIAN, N, 0, 0)
points = critical_curve(env, lams, N, tol=1e-5)
fit = fit_m(points, GAUSSIAN, "max_ratio")
print(f"\nGaussian charges, N = {N}: m_hat = {fit.m:.4f}")
for p in points:
    print(f"  lambda {p.lam:3.1f}: h_hat = {p.h_hat:.4f}  (h_sat = {p.h_sat:.3f})")
