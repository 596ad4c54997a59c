"""Why the chain keeps S0: the paired instance.

The paired family is uniform over the n/2 pairs {i, i + n/2}.  A uniform
t-subset of [n] rarely contains a whole pair when t is small, so a sampler
that proposes fresh intermediate sets and rejects by mass waits a long time.
The intermediate-sampling chain keeps the current pair inside every
intermediate set and still moves to a near-stationary state in one step
once t is a little above sqrt(n).
"""

import math

from domsparse import analysis as A
from domsparse import families as F
from domsparse import samplers as S

print("n   t   accept (fresh T)   accept (S0 kept)   chain one-step TV")
for n in (8, 12, 16, 20):
    d = A.enumerate_family(F.make_paired(n))
    S0 = tuple(d.sets[0].tolist())
    for t in sorted({4, math.ceil(2 * math.sqrt(n)), n // 2}):
        fresh = S.rejection_acceptance(d, t)[2]
        kept = S.rejection_acceptance(d, t, S0)[2]
        tv = A.exact_transition_matrix(d, t).one_step_tv().max()
        print(f"{n:<3} {t:<3} {fresh:<18.3f} {kept:<18.3f} {tv:.3f}")

# The averaged mass the rejection sampler sees is much smaller than its
# worst case; on n = 6, t = 3 the two are 0.2 and 1/3.
d6 = A.enumerate_family(F.make_paired(6))
mean, top, acc = S.rejection_acceptance(d6, 3)
print(f"\nn=6, t=3: E mu(T) = {mean:.3f}, max mu(T) = {top:.3f}, acceptance = {acc:.2f}")

# The one-step TV target of 1/4 pins down t.  Calibrate the constant on a
# held-out instance and check it on others.
cal = S.calibrate_c0([F.make_paired(10)], alpha=0.5, C=1.0)
print(f"\ncalibrated c0 = {cal.c0:.3f} from paired n=10 (t_min = {cal.t_min[0]})")
for n in (8, 12, 14):
    t = S.choose_t(n, 2, 0.5, C=1.0, epsilon=0.25, c0=cal.c0)
    P = A.exact_transition_matrix(F.make_paired(n), t)
    print(f"  n={n}: t={t}, min P/mu={P.min_domination_ratio():.3f}, TV after 5 steps={P.tv_after(5).max():.1e}")
