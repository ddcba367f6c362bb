"""Growth rate r, the constant A in C(n) ~ A r^-n, and the part constants B, C.

Run: python demos/02_growth_constants.py
"""
from locomp import (Alternating, build_spec, check_A_equals_C, count, estimate_constants,
                    estimate_r_A, spectral_r)

families = {
    "unrestricted": build_spec("unrestricted"),
    "carlitz": build_spec("carlitz"),
    "weak up-down": build_spec("alternating", Alternating(strict=False)),
    "strict up-down": build_spec("alternating", Alternating(strict=True)),
}

print(f"{'family':16} {'r (ratios)':>14} {'r (transfer)':>14} {'A':>12} {'C':>12}  A=C?")
for name, spec in families.items():
    est = estimate_constants(spec, n_count=200, n_moments=400)
    sr = spectral_r(spec, cap=40)
    ac = check_A_equals_C(spec, est)
    print(f"{name:16} {est.r:14.10f} {sr.r:14.10f} {est.A:12.9f} {est.C:12.9f}  {ac.status}")

# the ratio C(n)/C(n+1) settles geometrically fast
g = estimate_r_A(count(families["carlitz"], 60), window=50)
for n, d in list(zip(range(11, 61), g.diagnostics["ratio_diffs"]))[::8]:
    print(f"n={n:3d}  |r_(n+1) - r_n| = {d:.2e}")

# part sizes become geometric: u_k r^-k is flat for large k
est = estimate_constants(families["carlitz"], n_count=200, n_moments=600)
for k in (2, 6, 10, 14):
    print(f"k={k:2d}  u_k = {est.u[k]:.3e}   u_k / r^k = {est.u[k] / est.r ** k:.7f}   B = {est.B:.7f}")
