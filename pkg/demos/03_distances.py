"""
Comparing likelihoods
=====================

All nine measures on a pair of nearby distributions, then the gap
argument: push two point masses apart and watch EMD grow while the
symmetrized KL divergence stays flat.
"""

from wifitopo.distance import Measure, univariate_distance
from wifitopo.likelihood import estimate_kde, estimate_pmf

p = estimate_kde([-70, -70, -68, -71], h=2.0)
q = estimate_kde([-66, -65, -65, -63], h=2.0)
for m in Measure:
    print(f"{m.value:>20s}  {univariate_distance(p, q, m):.4f}")

print("\ngap   EMD    SKL")
for gap in range(5, 45, 5):
    a = estimate_pmf([-90], laplace_epsilon=1e-6)
    b = estimate_pmf([-90 + gap], laplace_epsilon=1e-6)
    print(f"{gap:3d} {univariate_distance(a, b, 'emd'):6.2f} "
          f"{univariate_distance(a, b, 'symmetrized_kl'):6.2f}")
