"""
Three RSSI likelihood representations
=====================================

The same handful of readings as a histogram, a Gaussian and a kernel
density estimate, and what an AP that was never seen looks like.
"""

import numpy as np

from wifitopo.likelihood import (DEFAULT_GRID, estimate_kde, estimate_normal, estimate_pmf,
                                 evaluate_on_grid, invisible_likelihood)

readings = [-70, -70, -68, -71, -69, -70, -84]

pmf = estimate_pmf(readings)
print("PMF:", {k: round(v, 3) for k, v in pmf.as_dict().items()})

# Laplace smoothing keeps every support point strictly positive
smooth = estimate_pmf(readings, laplace_epsilon=1e-6)
print("smoothed min mass:", smooth.probs.min())

normal = estimate_normal(readings)
print(f"Normal: mu={normal.mu:.2f} sigma2={normal.sigma2:.2f}")

# the outlier at -84 shows up as a second bump in the KDE only
kde = estimate_kde(readings, h=2.0)
pdf, cdf = evaluate_on_grid(kde, DEFAULT_GRID)
x = DEFAULT_GRID.midpoints
for lo, hi in ((-75, -65), (-88, -80)):
    inside = (x >= lo) & (x < hi)
    print(f"KDE mass in [{lo}, {hi}): {pdf[inside].sum() * DEFAULT_GRID.step:.3f}")

for method in ("pmf", "normal", "kde"):
    lik = invisible_likelihood(method)
    print(f"invisible AP ({method}): mean {lik.mean():.1f} dBm")

print("Normal density peak:", float(np.max(evaluate_on_grid(normal)[0])))
