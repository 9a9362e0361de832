"""
Atypical stretches
==================

A long stretch of charges whose average is at most q < 0 makes the polymer
gain energy by visiting the lower half-plane there.  The localization proof
waits for such a stretch; here we look for it in a sample.
"""

from copoly import BERNOULLI, PolymerParams, cramer_rate, find_tau, generate, optimal_q
from copoly.analysis import stretch_certificate

lam = 0.6
q = optimal_q(BERNOULLI, lam)
print(f"optimal q at lambda = {lam}: {q:.4f}, rate Sigma(q) = {cramer_rate(BERNOULLI, q):.4f}")

env = generate(BERNOULLI, 2_000_000, 3, 0)
# tau_M: the first time a stretch of length >= M with average <= q ends.
# It grows like exp(M Sigma(q)).
for M in (10, 20, 30, 40):
    rec = find_tau(env, q, M, 2_000_000)
    print(f"  M = {M:2d}: tau = {rec.tau_M}, stretch length R = {rec.R_M}")

# Below the lower bound curve Z_T(0) > 1 at the stretch; at h = 0.44 it is not.
for h in (0.30, 0.44):
    cert = stretch_certificate(env, PolymerParams(lam, h), A=20, epsilon=0.3, cap=2_000_000, extend=20_000)
    after = cert.extension[-1]
    print(f"h = {h}: T = {cert.T}, log Z_T(0) = {cert.log_z_T:.3f}, "
          f"log Z(0) at T + {after[0] - cert.T} = {after[1]:.3f}, analytic exponent {cert.exponent:.2f}")
