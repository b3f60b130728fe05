"""A sequence that spikes to (k, k) at every square index and sits at the origin otherwise.

It is unbounded and not convergent, yet the spikes occupy a density-zero set of
indices, so the sequence converges statistically to the origin. Run with
``python3 demos/square_spikes.py``.
"""

import math

import smetric as sm

spec = sm.norm_sum("euclidean")
seq = sm.example3_1()
print("first terms:", [tuple(p) for p in seq.prefix(10).tolist()])

conv = sm.is_convergent_prefix(spec, seq, (0, 0))
print(f"ordinary convergence to (0,0): {conv.verdict.value}, last far term at n={conv.witness}")
bnd = sm.is_s_bounded_prefix(spec, seq)
print(f"S-bounded: {bnd.verdict.value}, largest sampled S at index pair {bnd.witness}")

st = sm.st_converges(spec, seq, (0, 0))
print(f"statistical convergence to (0,0): {st.verdict.value}")
eps, est = st.per_eps[0]
for n, count in est.prefix_counts:
    print(f"  eps={eps:g}: {count} far terms among the first {n} (floor(sqrt n)/n = {math.isqrt(n) / n:.6g})")

mod = sm.ae_modification(spec, seq, (0, 0), n_max=10_000)
print(f"the modified sequence differs on {len(mod.disagreement.values)} indices up to 10^4,"
      f" all squares: {all(math.isqrt(i) ** 2 == i for i in mod.disagreement.values)}")

for r in (0.5, 1.0, 2.0):
    limits = sm.estimate_rough_limit_set(spec, seq, r)
    print(f"rough limits of degree {r:g}: {limits.representation} centred at {tuple(limits.ball.center.tolist())},"
          f" diameter {limits.diameter_estimate:.4f} <= 3r = {3 * r:g}")
