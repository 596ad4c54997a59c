"""Sparsified sampling from a large DPP.

A rank-8 DPP on n = 3000 items with k = 4.  We estimate marginals with a
short chain, subdivide heavy items, and then sample by restricting to a
random domain of a few dozen copies per step instead of all 3000 items.
"""

import time

import numpy as np

from domsparse import families as F
from domsparse import pipeline as P
from domsparse.rng import RngStream
from domsparse.samplers import ChainConfig, choose_t

n, k = 3000, 4
V = RngStream(0).generator().standard_normal((n, 8))
mu = F.LowRankDppFamily(V, k)

pilot = P.SparsifiedSampler(mu, None, ChainConfig(t=choose_t(n, k, 1.0), steps=1), RngStream(1))
start = time.perf_counter()
est = P.estimate_marginals(mu, pilot, 2000)
print(f"marginal estimates from 2000 pilot draws in {time.perf_counter() - start:.1f}s")

smap, _ = P.isotropic_transform(mu, est)
print(f"subdivided ground set: |U| = {smap.size} (<= 2n = {2 * n}), "
      f"largest copy count {smap.counts.max()}")

t = choose_t(smap.size, k, 1.0)
cfg = ChainConfig(t=t, steps=3)
sampler = P.SparsifiedSampler(mu, est, cfg, RngStream(2))
start = time.perf_counter()
draws = sampler.samples(500)
elapsed = time.perf_counter() - start
print(f"t = {t}: 500 samples in {elapsed:.2f}s ({1e3 * elapsed / 500:.2f} ms each)")

# Items with large leverage show up more often.  Pick the 200 heaviest
# items by the estimates, then compare how often they appear in an
# independent plain chain and in the sparsified samples (reusing the
# estimation draws would inflate the plain-chain number by selection).
top = np.argsort(-est.p)[:200]
check = P.SparsifiedSampler(mu, None, ChainConfig(t=choose_t(n, k, 1.0), steps=3), RngStream(3))


def share(samples):
    counts = np.zeros(n)
    for S in samples:
        counts[list(S)] += 1
    return counts[top].sum() / len(samples)


print(f"items per sample among the 200 heaviest: plain chain {share(check.samples(500)):.3f}, "
      f"sparsified {share(draws):.3f}, uniform baseline {200 * k / n:.3f}")
