"""
Distance to the Brownian meander
================================

In the delocalized phase the endpoint of the polymer (seen from the end of
the charge sequence) should look like a Brownian meander, x exp(-x^2/2).
The l1 distance between the two laws is the diagnostic.
"""

import numpy as np

from copoly import BERNOULLI, PolymerParams, generate, h_upper, meander_distance
from copoly.stats import median_ci

lam = 0.6
print(f"h_upper({lam}) = {h_upper(BERNOULLI, lam):.4f}")

# Well above the upper bound the distance falls steadily with N ...
for h in (0.6, 0.47):
    params = PolymerParams(lam, h)
    row = []
    for size in (10_000, 40_000, 160_000):
        d = [meander_distance(generate(BERNOULLI, size, 0, i), params, size).distance for i in range(8)]
        row.append(np.median(d))
    print(f"h = {h}: median distance " + "  ".join(f"{v:.4f}" for v in row))

# ... while closer to the critical curve it stops decreasing.  At these sizes it
# hovers near 0.2; between N = 1e5 and 1e6 it grows, a sign of localization.
params = PolymerParams(lam, 0.43)
for size in (10_000, 40_000, 160_000):
    d = [meander_distance(generate(BERNOULLI, size, 0, i), params, size).distance for i in range(8)]
    print(f"h = 0.43, size {size}: median {np.median(d):.4f}")

# With at least 100 samples the median gets an order-statistic interval.
d = [meander_distance(generate(BERNOULLI, 4000, 1, i), PolymerParams(lam, 0.47), 4000).distance
     for i in range(200)]
print("95% interval for the median at size 4000:", median_ci(np.array(d)))
