"""Growth constants r, A, B, C estimated from exact counts.

``r`` and ``A`` come from ratios of successive counts, which converge
exponentially fast.  ``B`` and ``C`` come from the exact part statistics: the
limits ``lim E(X_k(n))/n`` are read off as first differences in ``n`` (exact
up to exponentially small terms), and ``u_k r^-k`` is averaged over the
largest part sizes where it has flattened out.

``spectral_r`` is an independent route to ``r``: it truncates part sizes at K,
builds the word transfer matrix and solves ``spectral_radius(T(x)) = 1``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy import sparse

from .enumeration import CountTable, MomentTable, count, moments
from .restriction import RestrictionSpec


class FitError(ValueError):
    """Counts unsuitable for a growth-rate fit."""


class ConvergenceError(RuntimeError):
    """An iterative numerical method did not converge."""


@dataclass
class GrowthEstimate:
    r: float
    A: float
    period: int
    diagnostics: dict


@dataclass
class PartConstants:
    B: float
    C: float
    u: dict
    low_confidence: bool
    diagnostics: dict


@dataclass
class ConstantEstimates:
    r: float
    A: float
    B: float
    C: float
    u: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["u"] = {str(k): v for k, v in self.u.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _support_period(counts, lo: int) -> int:
    support = [n for n in range(lo, len(counts)) if counts[n] > 0]
    if len(support) < 2:
        raise FitError("fewer than two nonzero counts in the fit window")
    return reduce(math.gcd, (b - a for a, b in zip(support, support[1:])))


def _aitken(seq):
    a, b, c = seq[-3:]
    den = c - 2 * b + a
    if abs(den) < 1e-15 * abs(c):
        return c
    return c - (c - b) ** 2 / den


def estimate_r_A(counts: CountTable | list, window: int = 20) -> GrowthEstimate:
    """Fit ``C(n) ~ A r^-n`` on the last ``window`` counts."""
    C = counts.counts if isinstance(counts, CountTable) else list(counts)
    n_max = len(C) - 1
    lo = max(1, n_max - window)
    d = _support_period(C, lo)
    ns = [n for n in range(lo, n_max + 1) if C[n] > 0]
    if any(C[n] == 0 for n in range(ns[0], n_max + 1, d)):
        raise FitError("zero counts inside the supported subsequence")
    if any(C[b] < C[a] for a, b in zip(ns, ns[1:])):
        raise FitError("counts are not monotone in the fit window")
    if len(ns) < 4:
        raise FitError("fit window too short")

    ratios = [float(Fraction(C[n], C[n + d])) ** (1.0 / d) for n in ns[:-1]]
    diffs = [abs(b - a) for a, b in zip(ratios, ratios[1:])]
    r = _aitken(ratios)
    if not 0.0 < r < 1.0:
        raise FitError(f"fitted r={r} outside (0, 1)")
    log_r = math.log(r)
    A_seq = [math.exp(math.log(C[n]) + n * log_r) for n in ns]
    tail = A_seq[-max(3, len(A_seq) // 4):]
    A = float(np.mean(tail))
    decay = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]
    diag = {
        "n_max": n_max,
        "ratios": ratios,
        "ratio_diffs": diffs,
        "ratio_decay": decay,
        "A_sequence": A_seq,
        "A_spread": float(max(tail) - min(tail)),
        "certificate": diffs[-1] if diffs else float("nan"),
    }
    return GrowthEstimate(r, A, d, diag)


def estimate_B_C(moments_table: MomentTable, r: float, ks=None, width: int = 6,
                 spread_bound: float = 1e-3, period: int = 1) -> PartConstants:
    """``u_k``, ``B`` and ``C`` from exact part statistics at the fit n.

    ``u_k`` is the ratio of the per-unit-size slopes of ``E(X_k(n))`` and
    ``E(X_0(n))``, each taken as the difference between n and n - period.
    ``B`` averages ``u_k r^-k`` over the ``width`` largest ks.
    """
    mt = moments_table
    n = mt.n_max
    n0 = n - period
    ks = sorted(mt.part_counts) if ks is None else sorted(ks)
    if len(ks) < 2:
        raise FitError("need at least two part sizes")
    slope0 = (mt.mean_parts(n) - mt.mean_parts(n0)) / period
    raw0 = mt.mean_parts(n)
    u, u_raw, scaled = {}, {}, {}
    for k in ks:
        slope_k = (mt.mean_part_count(k, n) - mt.mean_part_count(k, n0)) / period
        u[k] = float(slope_k / slope0)
        u_raw[k] = float(mt.mean_part_count(k, n) / raw0)
        scaled[k] = u[k] * r ** (-k)
    tail_ks = ks[-width:]
    vals = np.array([scaled[k] for k in tail_ks])
    B = float(vals.mean())
    spread = float((vals.max() - vals.min()) / B)
    C = B * float(slope0)
    diag = {
        "fit_n": n,
        "tail_ks": tail_ks,
        "scaled_u": {str(k): v for k, v in scaled.items()},
        "raw_u": {str(k): v for k, v in u_raw.items()},
        "relative_spread": spread,
        "mean_parts_per_unit": float(slope0),
        "raw_mean_parts_per_unit": float(raw0 / n),
        "C_raw": B * float(raw0 / n),
    }
    return PartConstants(B, C, u, spread > spread_bound, diag)


def estimate_constants(spec: RestrictionSpec, n_count: int = 200, n_moments: int = 400,
                       ks=None, width: int = 6, budget: int | None = None) -> ConstantEstimates:
    """Convenience wrapper running both fits."""
    growth = estimate_r_A(count(spec, n_count, budget=budget))
    if ks is None:
        # part sizes up to where Cn r^k has dropped well below 1e-3 of its value at k = 1
        top = min(n_moments // 4, int(math.log(1e-12) / math.log(growth.r)) + 1)
        ks = range(1, max(top, width + 2) + 1)
    mt = moments(spec, n_moments, ks, ns=[n_moments - growth.period, n_moments], budget=budget)
    pc = estimate_B_C(mt, growth.r, width=width, period=growth.period)
    diag = {"growth": growth.diagnostics, "parts": pc.diagnostics,
            "low_confidence": pc.low_confidence}
    return ConstantEstimates(growth.r, growth.A, pc.B, pc.C, pc.u, diag)


# ---------------------------------------------------------------------------
# Transfer matrix
# ---------------------------------------------------------------------------


@dataclass
class TransferMatrix:
    """Word transfer matrix with parts truncated at ``cap``.

    Words have length ``L``, the smallest multiple of the modulus that is at
    least the span, and start at positions with residue 1.  Entry (i, j) is
    ``x^sum(word_j)`` when word j can follow word i.  Since that only depends
    on the last ``p`` parts of word i, ``T = U V`` with U mapping a word to its
    tail; ``reduced(x) = V U`` has the same nonzero spectrum and is what the
    root finder iterates on.
    """

    cap: int
    span: int
    word_length: int
    words: np.ndarray  # (W, L) parts of each word
    follows: sparse.csr_matrix  # (S, W): word j allowed after tail s
    tail_of: np.ndarray  # (W,) tail index of each word
    weights: np.ndarray  # (W,) sum of parts
    _tail_map: sparse.csr_matrix = field(repr=False, default=None)  # (W, S) one-hot

    def __post_init__(self):
        W = len(self.tail_of)
        S = self.follows.shape[0]
        self._tail_map = sparse.csr_matrix((np.ones(W), (np.arange(W), self.tail_of)), shape=(W, S))

    def _V(self, x: float) -> sparse.csr_matrix:
        f = self.follows
        data = x ** self.weights[f.indices].astype(float)
        return sparse.csr_matrix((data, f.indices, f.indptr), shape=f.shape)

    def matrix(self, x: float) -> np.ndarray:
        return self._V(x).toarray()[self.tail_of, :]

    def reduced(self, x: float) -> np.ndarray:
        return (self._V(x) @ self._tail_map).toarray()


def build_transfer_matrix(spec: RestrictionSpec, cap: int, max_cells: int = 30_000_000) -> TransferMatrix:
    m, p = spec.modulus, spec.span
    L = m * -(-p // m)
    S, W = cap ** p, cap ** L
    if S * W > max_cells:
        raise MemoryError(f"transfer matrix at cap {cap} needs {S * W} cells (limit {max_cells})")

    # rule table over parts 0..cap, indexed [residue, c_i, c_{i-1}, ..., c_{i-p}]
    table = np.zeros((m,) + (cap + 1,) * (p + 1), dtype=bool)
    for res in range(m):
        for idx in itertools.product(range(cap + 1), repeat=p + 1):
            table[(res,) + idx] = bool(spec.rule(res, idx))

    grid = np.arange(1, cap + 1)
    tails = np.array(list(itertools.product(grid, repeat=p)), dtype=np.int64).reshape(S, p)
    words = np.array(list(itertools.product(grid, repeat=L)), dtype=np.int64).reshape(W, L)

    # reading order is tail (earliest first) then word; columns broadcast to (S, W)
    def col(pos):
        return tails[:, pos, None] if pos < p else words[None, :, pos - p]

    ok = np.ones((S, W), dtype=bool)
    for q in range(L):
        pos = p + q
        res = (1 + q) % m
        ok &= table[(res,) + tuple(col(pos - d) for d in range(p + 1))]
    weights = words.sum(axis=1)
    # tail index of a word: base-cap digits of its last p parts
    tail_of = np.zeros(W, dtype=np.int64)
    for c in words[:, L - p:].T:
        tail_of = tail_of * cap + (c - 1)
    return TransferMatrix(cap, p, L, words, sparse.csr_matrix(ok), tail_of, weights)


def spectral_radius(M: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000,
                    v0: np.ndarray | None = None) -> tuple:
    """Perron root of a nonnegative matrix by power iteration.

    Falls back to iterating ``M + I`` when the plain iteration oscillates
    (periodic matrices).  Returns ``(rho, vector, iterations)``.
    """
    n = M.shape[0]
    for shift in (0.0, 1.0):
        A = M + shift * np.eye(n) if shift else M
        v = np.ones(n) if v0 is None else np.asarray(v0, dtype=float).copy()
        v /= v.sum()
        lam_old = None
        limit = max_iter if shift else min(max_iter, 2000)
        for it in range(1, limit + 1):
            y = A @ v
            lam = y.sum()
            if lam == 0.0:
                return 0.0, v, it
            v = y / lam
            if lam_old is not None and abs(lam - lam_old) <= tol * lam:
                return lam - shift, v, it
            lam_old = lam
    raise ConvergenceError("power iteration did not converge")


@dataclass
class SpectralResult:
    r: float
    cap: int
    certificate: float
    r_coarse: float
    probes: list
    monotone: bool


def _root_at_cap(tm: TransferMatrix, tol: float):
    probes = []
    v = None

    def lam(x):
        nonlocal v
        rho, v, _ = spectral_radius(tm.reduced(x), v0=v)
        probes.append((x, rho))
        return rho

    lo, hi = 1e-9, 1.0 - 1e-12
    if lam(hi) <= 1.0:
        raise ConvergenceError(f"spectral radius below 1 on (0,1) at cap {tm.cap}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lam(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), probes


def spectral_r(spec: RestrictionSpec, cap: int = 60, tol: float = 1e-10) -> SpectralResult:
    """Root of ``spectral_radius(T(x)) = 1`` at caps K and 2K."""
    coarse, _ = _root_at_cap(build_transfer_matrix(spec, cap), tol)
    fine, probes = _root_at_cap(build_transfer_matrix(spec, 2 * cap), tol)
    ordered = sorted(probes)
    monotone = all(b[1] >= a[1] for a, b in zip(ordered, ordered[1:]))
    return SpectralResult(fine, 2 * cap, abs(fine - coarse), coarse, probes, monotone)


# ---------------------------------------------------------------------------
# A = C check
# ---------------------------------------------------------------------------


@dataclass
class AEqualsCReport:
    status: str  # pass | fail | skipped
    A: float | None
    C: float | None
    difference: float | None
    tolerance: float
    reason: str = ""


def check_A_equals_C(spec: RestrictionSpec, estimates: ConstantEstimates,
                     tolerance: float = 5e-3) -> AEqualsCReport:
    if not spec.splice:
        return AEqualsCReport("skipped", estimates.A, estimates.C, None, tolerance,
                              "splice condition not declared for this family")
    diff = abs(estimates.A - estimates.C)
    return AEqualsCReport("pass" if diff < tolerance else "fail", estimates.A, estimates.C,
                          diff, tolerance)
