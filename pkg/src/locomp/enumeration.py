"""Exact counting of locally restricted compositions.

Two dynamic programs share one interface:

* ``_KernelEngine`` handles span-1 rules that come with a :class:`LocalKernel`.
  A state is ``(residue of the last position, last part)`` and each transition
  is aggregated over all previous parts in O(1) with row totals or prefix
  sums, so a table to ``n`` costs O(m n^2) big-integer operations.
* ``_GenericEngine`` works for any predicate.  A state is the residue plus the
  last ``p`` parts and transitions call the rule directly.

Counts are Python ints throughout; probabilities are built as Fractions.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .restriction import AnyPair, RestrictionSpec, is_valid_composition

DEFAULT_BUDGET = 10**6
BRUTE_FORCE_LIMIT = 22


class BudgetError(RuntimeError):
    """DP state space larger than the configured budget."""


class EmptyClassError(ValueError):
    """No compositions of the requested size."""


@dataclass(frozen=True)
class Variant:
    kind: str = "plain"  # plain | parts_cap | avoid_part
    value: int | None = None

    def __post_init__(self):
        if self.kind == "plain":
            return
        if self.kind == "parts_cap":
            if self.value is None or self.value < 0:
                raise ValueError("parts_cap needs a cap >= 0")
        elif self.kind == "avoid_part":
            if self.value is None or self.value < 1:
                raise ValueError("avoid_part needs a part >= 1")
        else:
            raise ValueError(f"unknown variant {self.kind!r}")

    def allows(self, x: int) -> bool:
        if self.kind == "parts_cap":
            return x <= self.value
        if self.kind == "avoid_part":
            return x != self.value
        return True

    def mask(self, n_max: int) -> list:
        return [False] + [self.allows(x) for x in range(1, n_max + 1)]

    def label(self) -> str:
        return self.kind if self.value is None else f"{self.kind}({self.value})"


PLAIN = Variant()


def parts_cap(cap: int) -> Variant:
    return Variant("parts_cap", cap)


def avoid_part(j: int) -> Variant:
    return Variant("avoid_part", j)


@dataclass
class CountTable:
    spec_id: str
    n_max: int
    counts: list
    variant: Variant = PLAIN

    def __getitem__(self, n: int) -> int:
        return self.counts[n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "count"])
        for n, c in enumerate(self.counts):
            w.writerow([n, str(c)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"spec_id": self.spec_id, "n_max": self.n_max, "variant": self.variant.label(),
                "counts": [str(c) for c in self.counts]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class MomentTable:
    """Exact sums over all compositions of n of the part statistics.

    ``total_parts[n]`` is the total number of parts and ``part_counts[k][n]``
    the total number of parts equal to ``k``.
    """

    n_max: int
    counts: list
    total_parts: list
    part_counts: dict = field(default_factory=dict)

    def mean_parts(self, n: int) -> Fraction:
        return Fraction(self.total_parts[n], self.counts[n])

    def mean_part_count(self, k: int, n: int) -> Fraction:
        return Fraction(self.part_counts[k][n], self.counts[n])


def check_budget(spec: RestrictionSpec, n_max: int, budget: int | None) -> None:
    budget = DEFAULT_BUDGET if budget is None else budget
    states = spec.modulus * max(n_max, 1) ** spec.span
    if states > budget:
        raise BudgetError(f"state space m*n^p = {states} exceeds budget {budget}")


# ---------------------------------------------------------------------------
# Span-1 engine with structured transitions
# ---------------------------------------------------------------------------


def _prefix(row):
    return list(itertools.accumulate(row[1:], initial=0))


class _KernelEngine:
    def __init__(self, spec: RestrictionSpec):
        self.spec = spec
        self.kernel = spec.kernel
        self.m = spec.modulus
        self.need_prefix = any(pr.needs_prefix for pr in self.kernel.pairs)

    def _end_weights(self):
        k = self.kernel
        return [1 if k.end_ok((a + 1) % self.m) else 0 for a in range(self.m)]

    def forward(self, n_max: int, mask: Sequence[bool], with_parts: bool = False):
        """Rows ``F[s][a][last]`` of prefix counts (and parts accumulators)."""
        m, kernel = self.m, self.kernel
        start_res = 1 % m
        need_prefix = self.need_prefix

        def empty(s):
            return [[0] * (s + 1) for _ in range(m)]

        F = [[[1] if a == 0 else [0] for a in range(m)]]
        Ft = [[1 if a == 0 else 0 for a in range(m)]]
        Fp = [[None] * m]
        H = [[[0] for _ in range(m)]] if with_parts else None
        Ht = [[0] * m] if with_parts else None
        Hp = [[None] * m] if with_parts else None
        for s in range(1, n_max + 1):
            rows = empty(s)
            hrows = empty(s) if with_parts else None
            for a in range(m):
                b = (a - 1) % m
                rule = kernel.pairs[a]
                row = rows[a]
                for x in range(1, s + 1):
                    if not mask[x]:
                        continue
                    t = s - x
                    if t == 0:
                        v = 1 if (a == start_res and kernel.start(x)) else 0
                        row[x] = v
                        if with_parts:
                            hrows[a][x] = v
                        continue
                    v = rule.forward(x, F[t][b], Fp[t][b], Ft[t][b], t)
                    row[x] = v
                    if with_parts:
                        hrows[a][x] = rule.forward(x, H[t][b], Hp[t][b], Ht[t][b], t) + v
            F.append(rows)
            Ft.append([sum(r) for r in rows])
            Fp.append([_prefix(r) for r in rows] if need_prefix else [None] * m)
            if with_parts:
                H.append(hrows)
                Ht.append([sum(r) for r in hrows])
                Hp.append([_prefix(r) for r in hrows] if need_prefix else [None] * m)
        return F, Ft, Ht

    def counts(self, n_max, mask):
        _, Ft, _ = self.forward(n_max, mask)
        ends = self._end_weights()
        # the empty composition has only all-zero windows
        return [1] + [sum(e * t for e, t in zip(ends, Ft[s])) for s in range(1, n_max + 1)]

    def counts_and_parts(self, n_max, mask):
        F, Ft, Ht = self.forward(n_max, mask, with_parts=True)
        ends = self._end_weights()
        counts = [1] + [sum(e * t for e, t in zip(ends, Ft[s])) for s in range(1, n_max + 1)]
        parts = [0] + [sum(e * t for e, t in zip(ends, Ht[s])) for s in range(1, n_max + 1)]
        return F, counts, parts

    def backward(self, n_max: int, mask: Sequence[bool]):
        """``B[t][a][last]``: completions of remaining sum t after part ``last``
        placed at residue ``a``.  ``B[t][0][0]`` is the count from the empty
        prefix, i.e. the number of compositions of t."""
        m, kernel = self.m, self.kernel
        ends = self._end_weights()
        B = []
        for t in range(n_max + 1):
            L = n_max - t
            layer = []
            for a in range(m):
                if t == 0:
                    row = [ends[a]] * (L + 1)
                    row[0] = 1 if a == 0 else 0
                    layer.append(row)
                    continue
                a2 = (a + 1) % m
                rule = kernel.pairs[a2]
                w = [0] * (t + 1)
                for x in range(1, t + 1):
                    if mask[x]:
                        w[x] = B[t - x][a2][x]
                total = sum(w)
                prefix = _prefix(w) if rule.needs_prefix else None
                row = [0] * (L + 1)
                for last in range(1, L + 1):
                    row[last] = rule.backward(last, w, prefix, total, t)
                if a == 0 and a2 == 1 % m:
                    row[0] = sum(w[x] for x in range(1, t + 1) if kernel.start(x))
                layer.append(row)
            B.append(layer)
        return B

    def part_count_sums(self, F, B, n_max, ks, ns):
        out = {}
        m = self.m
        for k in ks:
            vals = [0] * (n_max + 1)
            for n in ns:
                acc = 0
                for s in range(k, n + 1):
                    rows_s, rows_b = F[s], B[n - s]
                    for a in range(m):
                        f = rows_s[a][k]
                        if f:
                            acc += f * rows_b[a][k]
                vals[n] = acc
            out[k] = vals
        return out

    # sampler hooks --------------------------------------------------------
    def root_state(self):
        return (0, 0)

    def steps(self, B, state, t, mask):
        """Yield ``(x, weight, next_state)`` in increasing x."""
        a, last = state
        a2 = (a + 1) % self.m
        kernel = self.kernel
        layer_rule = kernel.pairs[a2]
        for x in range(1, t + 1):
            if not mask[x]:
                continue
            if last == 0:
                ok = a2 == 1 % self.m and kernel.start(x)
            else:
                ok = layer_rule.allows(x, last)
            if ok:
                w = B[t - x][a2][x]
                if w:
                    yield x, w, (a2, x)

    def completions(self, B, state, t):
        a, last = state
        return B[t][a][last]


# ---------------------------------------------------------------------------
# Generic engine: any predicate, any span
# ---------------------------------------------------------------------------


class _GenericEngine:
    def __init__(self, spec: RestrictionSpec):
        self.spec = spec
        self.m, self.p = spec.modulus, spec.span
        self._end_cache = {}

    def end_ok(self, state) -> bool:
        hit = self._end_cache.get(state)
        if hit is None:
            a, w = state
            rule, p, m = self.spec.rule, self.p, self.m
            hit = all(rule((a + d) % m, (0,) * d + w[: p + 1 - d]) for d in range(1, p + 1))
            self._end_cache[state] = hit
        return hit

    def forward(self, n_max, mask, with_parts=False):
        rule, m = self.spec.rule, self.m
        root = (0, (0,) * self.p)
        F = [{root: 1}]
        H = [{root: 0}] if with_parts else None
        for s in range(1, n_max + 1):
            cur = defaultdict(int)
            hcur = defaultdict(int) if with_parts else None
            for x in range(1, s + 1):
                if not mask[x]:
                    continue
                src = F[s - x]
                hsrc = H[s - x] if with_parts else None
                for (a, w), cnt in src.items():
                    a2 = (a + 1) % m
                    if rule(a2, (x,) + w):
                        nxt = (a2, (x,) + w[:-1])
                        cur[nxt] += cnt
                        if with_parts:
                            hcur[nxt] += hsrc[(a, w)] + cnt
            F.append(dict(cur))
            if with_parts:
                H.append(dict(hcur))
        return F, H

    def counts(self, n_max, mask):
        F, _ = self.forward(n_max, mask)
        return [sum(c for st, c in F[s].items() if self.end_ok(st)) for s in range(n_max + 1)]

    def counts_and_parts(self, n_max, mask):
        F, H = self.forward(n_max, mask, with_parts=True)
        counts = [sum(c for st, c in F[s].items() if self.end_ok(st)) for s in range(n_max + 1)]
        parts = [sum(c for st, c in H[s].items() if self.end_ok(st)) for s in range(n_max + 1)]
        return F, counts, parts

    def backward(self, n_max, mask):
        """``B[t][state]`` for every state reachable with sum <= n_max - t."""
        F, _ = self.forward(n_max, mask)
        rule, m = self.spec.rule, self.m
        B = []
        for t in range(n_max + 1):
            states = set()
            for s in range(n_max - t + 1):
                states.update(F[s])
            layer = {}
            for st in states:
                if t == 0:
                    layer[st] = 1 if self.end_ok(st) else 0
                    continue
                a, w = st
                a2 = (a + 1) % m
                acc = 0
                for x in range(1, t + 1):
                    if mask[x] and rule(a2, (x,) + w):
                        acc += B[t - x].get((a2, (x,) + w[:-1]), 0)
                layer[st] = acc
            B.append(layer)
        return B

    def part_count_sums(self, F, B, n_max, ks, ns):
        out = {}
        for k in ks:
            vals = [0] * (n_max + 1)
            for n in ns:
                acc = 0
                for s in range(k, n + 1):
                    for st, f in F[s].items():
                        if st[1][0] == k:
                            acc += f * B[n - s].get(st, 0)
                vals[n] = acc
            out[k] = vals
        return out

    def root_state(self):
        return (0, (0,) * self.p)

    def steps(self, B, state, t, mask):
        rule, m = self.spec.rule, self.m
        a, w = state
        a2 = (a + 1) % m
        for x in range(1, t + 1):
            if mask[x] and rule(a2, (x,) + w):
                nxt = (a2, (x,) + w[:-1])
                wt = B[t - x].get(nxt, 0)
                if wt:
                    yield x, wt, nxt

    def completions(self, B, state, t):
        return B[t].get(state, 0)


def engine_for(spec: RestrictionSpec, generic: bool = False):
    if spec.kernel is not None and spec.span == 1 and not generic:
        return _KernelEngine(spec)
    return _GenericEngine(spec)


def _is_unrestricted(spec: RestrictionSpec) -> bool:
    k = spec.kernel
    return (k is not None and spec.modulus == 1 and k.end_residues is None
            and all(isinstance(pr, AnyPair) for pr in k.pairs) and spec.family == "unrestricted")


def _unrestricted_counts(n_max: int, variant: Variant) -> list:
    # C(s) = sum over allowed x of C(s - x), evaluated with running sums
    T = [1] + [0] * n_max
    Q = [1] + [0] * n_max  # Q[s] = T[0] + ... + T[s]
    for s in range(1, n_max + 1):
        v = Q[s - 1]
        if variant.kind == "parts_cap":
            c = variant.value
            if s - 1 - c >= 0:
                v -= Q[s - 1 - c]
        elif variant.kind == "avoid_part":
            j = variant.value
            if s >= j:
                v -= T[s - j]
        T[s] = v
        Q[s] = Q[s - 1] + v
    return T


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def count(spec: RestrictionSpec, n_max: int, variant: Variant = PLAIN, *,
          budget: int | None = None, generic: bool = False) -> CountTable:
    """Exact counts ``C(0) .. C(n_max)`` of compositions in the class."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    check_budget(spec, n_max, budget)
    if _is_unrestricted(spec) and not generic:
        counts = _unrestricted_counts(n_max, variant)
    else:
        counts = engine_for(spec, generic).counts(n_max, variant.mask(n_max))
    return CountTable(spec.digest(), n_max, counts, variant)


def moments(spec: RestrictionSpec, n_max: int, ks: Iterable[int], *,
            ns: Iterable[int] | None = None, budget: int | None = None,
            generic: bool = False) -> MomentTable:
    """Exact part-count sums.  ``part_counts[k]`` is filled only at ``ns``
    (default: every n up to n_max); ``total_parts`` is always complete."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    check_budget(spec, n_max, budget)
    ks = sorted(set(ks))
    ns = list(range(n_max + 1)) if ns is None else sorted(set(ns))
    mask = PLAIN.mask(n_max)
    eng = engine_for(spec, generic)
    F, counts, parts = eng.counts_and_parts(n_max, mask)
    pcs = {}
    if ks:
        B = eng.backward(n_max, mask)
        pcs = eng.part_count_sums(F, B, n_max, [k for k in ks if k <= n_max], ns)
        for k in ks:
            pcs.setdefault(k, [0] * (n_max + 1))
    return MomentTable(n_max, counts, parts, pcs)


def _plain_count(spec, n, budget):
    c = count(spec, n, budget=budget).counts[n]
    if c == 0:
        raise EmptyClassError(f"empty class at n={n}")
    return c


@dataclass
class MaxPartDistribution:
    n: int
    total: int
    tail_counts: list  # tail_counts[j-1] = #{c : max(c) >= j}, j = 1..n

    def tail(self, j: int) -> Fraction:
        return Fraction(self.tail_counts[j - 1], self.total)

    @property
    def probabilities(self) -> list:
        return [c / self.total for c in self.tail_counts]

    @property
    def mean(self) -> Fraction:
        return Fraction(sum(self.tail_counts), self.total)


def max_part_distribution(spec: RestrictionSpec, n: int, *, budget: int | None = None) -> MaxPartDistribution:
    """``Pr(M_n >= j)`` for j = 1..n, exact."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = _plain_count(spec, n, budget)
    tails = []
    for j in range(1, n + 1):
        below = count(spec, n, parts_cap(j - 1), budget=budget).counts[n]
        tails.append(total - below)
    return MaxPartDistribution(n, total, tails)


def distinct_parts_expectation(spec: RestrictionSpec, n: int, *, budget: int | None = None) -> Fraction:
    """Exact ``E(D_n)``: sum over recurrent j of ``Pr(part j appears)``.

    Nonrecurrent parts are skipped; the caller applies ``nu`` if needed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = _plain_count(spec, n, budget)
    acc = 0
    for j in range(1, n + 1):
        if not spec.is_recurrent(j):
            continue
        acc += total - count(spec, n, avoid_part(j), budget=budget).counts[n]
    return Fraction(acc, total)


def brute_force(spec: RestrictionSpec, n: int, limit: int = BRUTE_FORCE_LIMIT) -> list:
    """Every composition of n in the class, by backtracking.

    Prefixes are pruned with the rule at positions already fully determined;
    complete compositions are checked with :func:`is_valid_composition`.
    """
    if n > limit:
        raise ValueError(f"brute force refuses n={n} > {limit}")
    p, m, rule = spec.span, spec.modulus, spec.rule
    out = []

    def prefix_ok(c):
        i = len(c)
        window = tuple(c[i - 1 - d] if i - 1 - d >= 0 else 0 for d in range(p + 1))
        return rule(i % m, window)

    def extend(c, rest):
        if rest == 0:
            if is_valid_composition(spec, c):
                out.append(tuple(c))
            return
        for x in range(1, rest + 1):
            c.append(x)
            if prefix_ok(c):
                extend(c, rest - x)
            c.pop()

    extend([], n)
    return out
