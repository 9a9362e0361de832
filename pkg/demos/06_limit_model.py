"""
The large-lambda limit
======================

Along h = h^(m)(lambda) the model has a limit as lambda grows: positive
charges never go below the axis and each negative charge there earns 2^(1/m).
"""

from copoly import BERNOULLI, PolymerParams, generate, h_m, sweep
from copoly.engine import limit_model_sweep

env = generate(BERNOULLI, 20_000, 0, 0)
m = 0.84
for lam in (1.0, 2.0, 4.0, 8.0):
    v = sweep(env, PolymerParams(lam, h_m(BERNOULLI, m, lam)), 2000).pinned_log
    print(f"lambda = {lam}: log Z_2000(0) = {v:.8f}")
print(f"limit model : log Z_2000(0) = {limit_model_sweep(env, m, 2000).pinned_log:.8f}")

# In the limit model the sign of log Z_N(0) changes with m.
for m in (0.7, 0.8, 0.9):
    res = limit_model_sweep(env, m, 20_000, checkpoints=[2000, 20_000])
    print(f"m = {m}: " + ", ".join(f"N={n}: {v:.3f}" for n, v in res.trace))
