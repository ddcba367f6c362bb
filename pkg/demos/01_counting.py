"""Counting compositions under local restrictions.

Run: python demos/01_counting.py
"""
from locomp import (Alternating, GeneralizedCarlitz, brute_force, build_spec, count, moments,
                    parts_cap)

# Carlitz compositions: no two adjacent parts equal
carlitz = build_spec("carlitz")
print("Carlitz C(1..12):", count(carlitz, 12).counts[1:])

# the DP agrees with plain enumeration
for n in range(1, 11):
    assert count(carlitz, n)[n] == len(brute_force(carlitz, n))
print("compositions of 5:", sorted(brute_force(carlitz, 5)))

# adjacent parts must differ by at least 2
far = build_spec("carlitz", GeneralizedCarlitz(frozenset({0, 1, -1})))
print("|c_i - c_(i-1)| >= 2:", count(far, 12).counts[1:])

# up-down compositions c1 <= c2 >= c3 <= ... with an odd number of parts
weak = build_spec("alternating", Alternating(strict=False))
print("weak up-down, odd length:", count(weak, 12).counts[1:])

# counts are exact integers however large they get
print("C(300) for Carlitz has", len(str(count(carlitz, 300)[300])), "digits")

# compositions of 20 with every part at most 3
print("parts <= 3, n = 20:", count(build_spec("unrestricted"), 20, parts_cap(3))[20])

# average number of parts, and of parts equal to 1, at n = 40
m = moments(carlitz, 40, [1])
print("E(#parts) =", float(m.mean_parts(40)), " E(#ones) =", float(m.mean_part_count(1, 40)))
