"""Exact uniform sampling and Monte Carlo part statistics.

A trial draws one integer ``U`` uniformly from ``[0, C(n))`` and unranks it
against the completion table, so no floating point enters the choice of
parts.  Trials are grouped in blocks of ``BLOCK`` and block ``b`` uses its own
generator seeded from ``SeedSequence(seed, spawn_key=(b,))``.  Any split of
the blocks across workers therefore reproduces the same samples.
"""
from __future__ import annotations

import csv
import io
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .enumeration import PLAIN, _KernelEngine, check_budget, engine_for
from .restriction import RestrictionSpec

BLOCK = 1024


@dataclass(frozen=True)
class SamplerTable:
    spec: RestrictionSpec
    n: int
    engine: object = field(repr=False)
    B: list = field(repr=False)
    mask: list = field(repr=False)

    @property
    def spec_id(self) -> str:
        return self.spec.digest()

    @property
    def root_count(self) -> int:
        return self.engine.completions(self.B, self.engine.root_state(), self.n)

    def completions(self, state, t: int) -> int:
        return self.engine.completions(self.B, state, t)

    def transitions(self, state, t: int):
        """``(x, weight, next_state)`` for every part that can follow ``state``
        with remaining sum ``t``; weights sum to ``completions(state, t)``."""
        return list(self.engine.steps(self.B, state, t, self.mask))


def build_sampler(spec: RestrictionSpec, n: int, *, budget: int | None = None,
                  generic: bool = False) -> SamplerTable:
    if n < 0:
        raise ValueError("n must be >= 0")
    check_budget(spec, n, budget)
    eng = engine_for(spec, generic)
    mask = PLAIN.mask(n)
    return SamplerTable(spec, n, eng, eng.backward(n, mask), mask)


def _unrank_kernel(table: SamplerTable, U: int) -> tuple:
    eng, B, mask = table.engine, table.B, table.mask
    kernel, m = eng.kernel, eng.m
    start_res = 1 % m
    a, last, t = 0, 0, table.n
    out = []
    while t:
        a2 = (a + 1) % m
        rule = kernel.pairs[a2]
        for x in range(1, t + 1):
            if not mask[x]:
                continue
            if last == 0:
                if a2 != start_res or not kernel.start(x):
                    continue
            elif not rule.allows(x, last):
                continue
            w = B[t - x][a2][x]
            if U < w:
                break
            U -= w
        else:
            raise RuntimeError("completion table is inconsistent")
        out.append(x)
        a, last, t = a2, x, t - x
    return tuple(out)


def _unrank_generic(table: SamplerTable, U: int) -> tuple:
    eng = table.engine
    state, t = eng.root_state(), table.n
    out = []
    while t:
        for x, w, nxt in eng.steps(table.B, state, t, table.mask):
            if U < w:
                break
            U -= w
        else:
            raise RuntimeError("completion table is inconsistent")
        out.append(x)
        state, t = nxt, t - x
    return tuple(out)


def unrank(table: SamplerTable, U: int) -> tuple:
    """The composition of rank ``U`` (0 <= U < C(n)) in lexicographic order."""
    total = table.root_count
    if not 0 <= U < total:
        raise ValueError(f"rank {U} outside [0, {total})")
    if isinstance(table.engine, _KernelEngine):
        return _unrank_kernel(table, U)
    return _unrank_generic(table, U)


def block_rng(seed: int, block: int) -> random.Random:
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    state = ss.generate_state(2, dtype=np.uint64)
    return random.Random(int(state[0]) << 64 | int(state[1]))


def sample(table: SamplerTable, seed: int, trials: int, start: int = 0) -> Iterator[tuple]:
    """Compositions for trial indices ``start .. start + trials - 1``."""
    total = table.root_count
    if total == 0:
        raise ValueError(f"no compositions of {table.n} in this class")
    walk = _unrank_kernel if isinstance(table.engine, _KernelEngine) else _unrank_generic
    idx, stop = start, start + trials
    while idx < stop:
        b = idx // BLOCK
        rng = block_rng(seed, b)
        # skip draws belonging to earlier trials of this block
        for _ in range(idx - b * BLOCK):
            rng.randrange(total)
        end = min(stop, (b + 1) * BLOCK)
        for _ in range(idx, end):
            yield walk(table, rng.randrange(total))
        idx = end


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def composition_stats(c: Sequence[int], spec: RestrictionSpec | None = None, k_max: int = 5,
                      alt_gap_free: bool = False) -> dict:
    """Per-composition quantities: M, D, D(k), g, gap_free, min_mult."""
    rec = spec.is_recurrent if spec is not None else (lambda j: True)
    counts = Counter(c)
    M = max(c) if c else 0
    recurrent = [j for j in counts if rec(j)]
    D = len(recurrent)
    Dk = [sum(1 for j in recurrent if counts[j] == k) for k in range(1, k_max + 1)]
    lo = min(c) if (alt_gap_free and c) else 1
    gap_free = all(counts.get(j, 0) > 0 for j in range(lo, M) if rec(j))
    min_rec = min(recurrent) if recurrent else 0
    return {
        "M": M, "D": D, "Dk": Dk, "g": counts.get(M, 0), "gap_free": gap_free,
        "min_mult": counts.get(min_rec, 0),
    }


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


@dataclass
class SampleStats:
    n: int
    trials: int
    seed: int | None
    k_max: int
    j_window: tuple
    M: np.ndarray
    D: np.ndarray
    Dk: np.ndarray  # trials x k_max
    g: np.ndarray
    gap_free: np.ndarray
    zeta: np.ndarray  # trials x len(window)
    min_mult: np.ndarray
    alt_gap_free: bool = False

    @property
    def js(self) -> list:
        lo, hi = self.j_window
        return list(range(lo, hi + 1))

    def zeta_of(self, j: int) -> np.ndarray:
        return self.zeta[:, self.js.index(j)]

    def mean_se(self, name: str, k: int | None = None) -> tuple[float, float]:
        if name == "Dk":
            return _mean_se(self.Dk[:, k - 1])
        if name == "zeta":
            return _mean_se(self.zeta_of(k))
        return _mean_se(np.asarray(getattr(self, name), dtype=float))

    @property
    def q_hat(self) -> float:
        return float(np.mean(self.gap_free))

    @property
    def q_se(self) -> float:
        q = self.q_hat
        return math.sqrt(q * (1 - q) / self.trials)

    def gap_free_by_max(self) -> dict:
        """Frequency of (gap free and M = k) for every observed k."""
        out = {}
        for k in np.unique(self.M):
            out[int(k)] = float(np.mean(self.gap_free & (self.M == k)))
        return out

    def g_distribution(self) -> dict:
        vals, cnt = np.unique(self.g, return_counts=True)
        return {int(v): c / self.trials for v, c in zip(vals, cnt)}

    def freq(self, name: str, value: int) -> tuple[float, float]:
        p = float(np.mean(getattr(self, name) == value))
        return p, math.sqrt(p * (1 - p) / self.trials)

    def summary(self) -> dict:
        out = {"n": self.n, "trials": self.trials, "seed": self.seed,
               "j_window": list(self.j_window), "alt_gap_free": self.alt_gap_free}
        for name in ("M", "D", "g", "min_mult"):
            m, se = self.mean_se(name)
            out[name] = {"mean": m, "se": se}
        out["Dk"] = {str(k): dict(zip(("mean", "se"), self.mean_se("Dk", k)))
                     for k in range(1, self.k_max + 1)}
        out["gap_free"] = {"q_hat": self.q_hat, "se": self.q_se}
        out["g_distribution"] = {str(k): v for k, v in self.g_distribution().items()}
        out["zeta"] = {str(j): dict(zip(("mean", "se"), self.mean_se("zeta", j))) for j in self.js}
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """One row per trial."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "M", "D", "g", "gap_free", "min_mult"]
                   + [f"D{k}" for k in range(1, self.k_max + 1)]
                   + [f"zeta{j}" for j in self.js])
        for i in range(self.trials):
            w.writerow([i, int(self.M[i]), int(self.D[i]), int(self.g[i]), int(self.gap_free[i]),
                        int(self.min_mult[i])] + [int(v) for v in self.Dk[i]]
                       + [int(v) for v in self.zeta[i]])
        return buf.getvalue()


def stats_from_compositions(comps, n: int, *, spec: RestrictionSpec | None = None, k_max: int = 5,
                            j_window: tuple = (1, 1), seed: int | None = None,
                            alt_gap_free: bool = False) -> SampleStats:
    lo, hi = j_window
    if lo < 1 or hi < lo:
        raise ValueError("j_window must satisfy 1 <= lo <= hi")
    js = range(lo, hi + 1)
    rows = []
    zeta = []
    for c in comps:
        st = composition_stats(c, spec, k_max, alt_gap_free)
        rows.append(st)
        cnt = Counter(c)
        zeta.append([cnt.get(j, 0) for j in js])
    T = len(rows)
    col = lambda key, dt=np.int64: np.array([r[key] for r in rows], dtype=dt)
    return SampleStats(
        n=n, trials=T, seed=seed, k_max=k_max, j_window=(lo, hi),
        M=col("M"), D=col("D"), Dk=np.array([r["Dk"] for r in rows], dtype=np.int64).reshape(T, k_max),
        g=col("g"), gap_free=col("gap_free", bool),
        zeta=np.array(zeta, dtype=np.int64).reshape(T, len(js)),
        min_mult=col("min_mult"), alt_gap_free=alt_gap_free,
    )


def collect_stats(spec: RestrictionSpec, n: int, trials: int, *, seed: int = 0, k_max: int = 5,
                  j_window: tuple | None = None, table: SamplerTable | None = None,
                  alt_gap_free: bool = False) -> SampleStats:
    """Sample ``trials`` compositions of n and tabulate their part statistics.

    ``j_window`` defaults to the three sizes nearest ``log2 n``.
    """
    if table is None:
        table = build_sampler(spec, n)
    elif table.n != n:
        raise ValueError("sampler table was built for a different n")
    if j_window is None:
        c = max(1, round(math.log2(max(n, 2))) - 1)
        j_window = (max(1, c - 1), c + 1)
    comps = sample(table, seed, trials)
    return stats_from_compositions(comps, n, spec=spec, k_max=k_max, j_window=j_window,
                                   seed=seed, alt_gap_free=alt_gap_free)


# ---------------------------------------------------------------------------
# Poisson moment check
# ---------------------------------------------------------------------------


@dataclass
class MomentRatio:
    label: str
    observed: float
    target: float
    ratio: float
    se: float  # standard error of the ratio
    degenerate: bool = False

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.ratio <= hi

    def z(self) -> float:
        if self.degenerate or not self.se:
            return 0.0
        return (self.ratio - 1.0) / self.se


@dataclass
class PoissonReport:
    r: float
    C: float
    n: int
    near_centre: list  # js within 2 of log_{1/r}(Cn)
    ratios: list

    def get(self, label: str) -> MomentRatio:
        for x in self.ratios:
            if x.label == label:
                return x
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {"r": self.r, "C": self.C, "n": self.n, "near_centre": self.near_centre,
                "ratios": [vars(x) for x in self.ratios]}


def _ratio(label, values: np.ndarray, target: float, j_max: int, n: int) -> MomentRatio:
    mean, se = _mean_se(values.astype(float))
    if j_max > n:
        # parts larger than n never occur
        return MomentRatio(label, mean, target, 0.0 if target else 1.0, 0.0, True)
    return MomentRatio(label, mean, target, mean / target, se / target)


def poisson_check(stats: SampleStats, r: float, C: float, pairs: Sequence[tuple] | None = None) -> PoissonReport:
    """Compare factorial moments of the part counts with independent Poisson
    variables of means ``C n r^j``."""
    n = stats.n
    js = stats.js
    mu = {j: C * n * r**j for j in js}
    out = []
    for j in js:
        z = stats.zeta_of(j)
        out.append(_ratio(f"E[z{j}]", z, mu[j], j, n))
        out.append(_ratio(f"E[z{j}(z{j}-1)]", z * (z - 1), mu[j] ** 2, j, n))
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(js) for b in js[i + 1:]]
    for a, b in pairs:
        out.append(_ratio(f"E[z{a}z{b}]", stats.zeta_of(a) * stats.zeta_of(b), mu[a] * mu[b], max(a, b), n))
    centre = math.log(C * n) / math.log(1 / r)
    near = [j for j in js if abs(j - centre) <= 2]
    return PoissonReport(r, C, n, near, out)
