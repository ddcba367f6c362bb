"""Counts of parts of a given size near log(n) behave like independent
Poisson variables with means C n r^j.

Run: python demos/04_poisson_parts.py
"""
import math

from locomp import build_spec, collect_stats, jvz_ratios, poisson_check

spec = build_spec("unrestricted")
n = 600
st = collect_stats(spec, n, 30_000, seed=4, k_max=2, j_window=(7, 10))
rep = poisson_check(st, 0.5, 0.5)
print(f"log2(Cn) = {math.log2(0.5 * n):.2f}; sizes near it: {rep.near_centre}")
for x in rep.ratios:
    print(f"{x.label:16} observed {x.observed:9.4f}  target {x.target:9.4f}  ratio {x.ratio:.3f} +- {x.se:.3f}")

# more than one copy of the max (or min) part: counts grow by 1/r per unit of n
rep = jvz_ratios(spec, 0.5, 200, trials=20_000, seed=2)
print(f"\nMin ratio {rep.min_ratio:.4f}, Max ratio {rep.max_ratio:.4f} +- {rep.max_se:.4f}, 1/r = {rep.target}")
