"""Largest part, distinct parts, and gap-free compositions: exact values,
simulation, and the asymptotic formulas side by side.

Run: python demos/03_large_parts.py
"""
from locomp import (AsymptoticModel, build_spec, collect_stats, distinct_parts_expectation,
                    estimate_constants, max_part_distribution, pm_sequence)

spec = build_spec("carlitz")
est = estimate_constants(spec)
model = AsymptoticModel(est.r, est.C)
print(f"r = {est.r:.8f}, C = {est.C:.8f}")

print(f"\n{'n':>5} {'E(M_n) exact':>13} {'formula':>10} {'E(D_n) exact':>13} {'formula':>10}")
for n in (25, 50, 100, 200):
    em = float(max_part_distribution(spec, n).mean)
    ed = float(distinct_parts_expectation(spec, n))
    print(f"{n:5d} {em:13.5f} {model.expected_max(n):10.5f} {ed:13.5f} {model.expected_distinct(n):10.5f}")

# gap-free: every part below the largest shows up
n = 300
st = collect_stats(spec, n, 20_000, seed=1, k_max=3)
m = int(est.C * n / (1 - est.r))
print(f"\ngap free at n={n}: sampled {st.q_hat:.4f} +- {st.q_se:.4f}, "
      f"formula {model.qn(n):.4f}, p_{m} = {pm_sequence(est.r, m)[m]:.6f}")

# how many parts tie for the maximum
for k in (1, 2, 3):
    p, se = st.freq("g", k)
    print(f"exactly {k} maximal part(s): sampled {p:.4f} +- {se:.4f}, formula {model.gnk(n, k):.4f}")

# p_m settles near 0.372 and keeps a tiny wobble
p = pm_sequence(est.r, 120)
print("\np_m, m = 20..120 step 20:", [round(float(x), 7) for x in p[20::20]])
print("oscillation amplitude of P_0 is about", f"{max(abs(model.P(0, 100 * est.r ** (-u / 50))) for u in range(50)):.1e}")
