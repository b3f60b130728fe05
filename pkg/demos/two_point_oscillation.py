"""Alternating between (0,0) and (1,1), with square-index spikes on top.

Neither point is a statistical limit, since each attracts half of the indices.
Both are statistical cluster points, and with roughness 2*sqrt(2) both become
rough statistical limits. Run with ``python3 demos/two_point_oscillation.py``.
"""

import math

import smetric as sm

spec = sm.norm_sum("euclidean")
seq = sm.example4_1()
r = 2 * math.sqrt(2)

for c in [(0, 0), (1, 1)]:
    plain = sm.st_converges(spec, seq, c).verdict.value
    cluster = sm.cluster_point_check(spec, seq, c).verdict.value
    rough = sm.rough_st_converges(spec, seq, c, r).verdict.value
    ordinary = sm.rough_limit_check(spec, seq, c, r).verdict.value
    print(f"{c}: statistical limit {plain}, cluster point {cluster}, "
          f"rough statistical (r=2sqrt2) {rough}, rough (r=2sqrt2) {ordinary}")

limits = sm.estimate_rough_limit_set(spec, seq, r, sm.Region((-3, -3), (4, 4)), 0.25)
print(f"grid search: {len(limits)} of {limits.tested} grid points are limits of degree 2sqrt2; "
      f"diameter {limits.diameter_estimate:.4f} <= 3r = {3 * r:.4f}")

cover = sm.cluster_ball_cover_check(spec, seq, (0, 0), r, limits.members)
print(f"all of them lie in the closed ball of radius r around the cluster point (0,0): {cover.passed}")
