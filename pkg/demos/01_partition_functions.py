"""
Partition functions by transfer matrix
======================================

The pinned and free partition functions of a copolymer of N monomers are
computed by one sweep over the charges, two monomers at a time.
"""

import math

import numpy as np

from copoly import DEFAULT_WINDOW, PolymerParams, brute_force, generate, sweep

# An environment is a reproducible charge sequence: the pair (seed, sample_index)
# determines it completely.
env = generate("bernoulli", 20_000, seed=1, sample_index=0)
print("first charges:", env.charges[:10])

# Without disorder (lambda = 0) the polymer is a simple random walk, so the
# pinned value is P(S_N = 0) and the free value is 1.
res = sweep(env, PolymerParams(0.0, 0.0), 1000)
print("lambda = 0, N = 1000: Z(0) =", math.exp(res.pinned_log),
      " exact:", math.comb(1000, 500) / 2 ** 1000)
print("                     Z    =", math.exp(res.free_log))

# For small N the sweep can be checked against a sum over all 2**N paths.
params = PolymerParams(0.6, 0.44)
res = sweep(env, params, 16)
print("N = 16: sweep", math.exp(res.pinned_log), " enumeration", brute_force(env, params, 16, endpoint=0))

# Large sizes: the height window drops paths far from the axis, which makes
# the cost grow like N^{3/2} and changes nothing visible in the result.
full = sweep(env, params, 20_000)
win = sweep(env, params, 20_000, window=DEFAULT_WINDOW)
print(f"N = 20000: full {full.pinned_log:.12f} ({full.ops} updates)")
print(f"           window {win.pinned_log:.12f} ({win.ops} updates)")

# The trace of log Z_N(0) along the way comes from the same sweep.
res = sweep(env, params, 20_000, checkpoints=[2000, 5000, 10_000, 20_000])
for n, v in res.trace:
    print(f"  N = {n:6d}  log Z_N(0) = {v:9.4f}   + (1/2) log N = {v + 0.5 * np.log(n):7.4f}")
