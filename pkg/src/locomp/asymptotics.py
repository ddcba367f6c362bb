"""Closed-form large-part asymptotics.

Every ``log`` here is to base ``1/r``; ``log_e = 1/ln(1/r)``.  The oscillating
term is

    P_k(x) = log_e * sum_{l != 0} Gamma(k + 2 pi i l log_e) exp(-2 pi i l log x)

which is periodic in ``log x`` with period 1 and tiny for moderate r because
Gamma decays like ``exp(-pi |y| / 2)`` along vertical lines.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

EULER_GAMMA = 0.5772156649015329

# Lanczos coefficients, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_log_gamma(z: complex) -> complex:
    # valid for Re z >= 0.5
    z = z - 1.0
    a = _LANCZOS[0]
    for k in range(1, len(_LANCZOS)):
        a += _LANCZOS[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(a)


def log_gamma_complex(z: complex) -> complex:
    """A branch of log Gamma(z); only ``exp`` of the result is meaningful."""
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise ValueError(f"Gamma has a pole at {z.real:g}")
    shift = 0.0
    while z.real < 0.5:
        shift += cmath.log(z)
        z += 1.0
    return _lanczos_log_gamma(z) - shift


def gamma_complex(z: complex) -> complex:
    """Gamma at a complex argument (Lanczos, shifted up by the recurrence)."""
    return cmath.exp(log_gamma_complex(z))


@dataclass(frozen=True)
class AsymptoticModel:
    r: float
    C: float
    nu: int = 0
    ell_max: int = 8
    tail_tol: float = 1e-15
    gamma_euler: float = EULER_GAMMA

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError("r must lie in (0, 1)")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.ell_max < 1:
            raise ValueError("ell_max must be >= 1")

    @property
    def log_e(self) -> float:
        return 1.0 / math.log(1.0 / self.r)

    def log(self, x: float) -> float:
        return math.log(x) * self.log_e

    def in_regime(self, n: float) -> bool:
        """False when log(Cn) < 3, where the o(1) terms are not small."""
        return self.log(self.C * n) >= 3.0

    # oscillation ---------------------------------------------------------
    def _terms_needed(self, k: int) -> int:
        """Smallest L >= ell_max with the tail over |l| > L below tail_tol."""
        le = self.log_e
        L = self.ell_max
        while True:
            y = 2.0 * math.pi * (L + 1) * le
            # |Gamma(k+iy)| decays at least by exp(-pi^2 le) per step in l once |y| > k
            q = math.exp(-math.pi * math.pi * le) * ((L + 2) / (L + 1)) ** max(k, 1)
            term = abs(gamma_complex(complex(k, y)))
            bound = 2.0 * le * term / (1.0 - q) if q < 1.0 else math.inf
            if bound < self.tail_tol or L > 10_000:
                return L
            L += 1

    def oscillation_sum(self, x: float, k: int) -> complex:
        """Unpaired complex sum over 1 <= |l| <= L (its imaginary part is
        rounding noise)."""
        le = self.log_e
        L = self._terms_needed(k)
        lx = self.log(x)
        total = 0j
        for ell in range(1, L + 1):
            y = 2.0 * math.pi * ell * le
            for sgn in (1, -1):
                total += gamma_complex(complex(k, sgn * y)) * cmath.exp(-2j * math.pi * sgn * ell * lx)
        return le * total

    def P(self, k: int, x: float) -> float:
        """``P_k(x)``, summing conjugate pairs so the result is real."""
        if x <= 0:
            raise ValueError("x must be positive")
        if k < 0:
            raise ValueError("k must be >= 0")
        le = self.log_e
        L = self._terms_needed(k)
        # reduce log x mod 1 so the phase is exact under x -> x / r
        frac = self.log(x) % 1.0
        total = 0.0
        for ell in range(1, L + 1):
            g = gamma_complex(complex(k, 2.0 * math.pi * ell * le))
            total += 2.0 * (g * cmath.exp(-2j * math.pi * ell * frac)).real
        return le * total

    # closed forms ---------------------------------------------------------
    def expected_max(self, n: float) -> float:
        x = self.C * n / (1.0 - self.r)
        return self.log(x) + self.gamma_euler * self.log_e - 0.5 + self.P(0, x)

    def expected_distinct(self, n: float) -> float:
        x = self.C * n
        return self.log(x) + self.gamma_euler * self.log_e - 0.5 + self.P(0, x) - self.nu

    def qnk(self, n: float, k: int) -> float:
        """Probability of being gap free with largest part k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        cn, r = self.C * n, self.r
        out = math.exp(-cn * r ** (k + 1) / (1.0 - r))
        for j in range(1, k + 1):
            out *= -math.expm1(-cn * r**j)
        return out

    def qn(self, n: float, width: int = 20) -> float:
        """Sum of qnk over |k - log(Cn)| <= width."""
        centre = self.log(self.C * n)
        lo = max(1, int(math.floor(centre - width)))
        hi = int(math.ceil(centre + width))
        return math.fsum(self.qnk(n, k) for k in range(lo, hi + 1))

    def gnk(self, n: float, k: int) -> float:
        """Probability of exactly k parts of maximum size."""
        if k < 1:
            raise ValueError("k must be >= 1")
        w = (1.0 - self.r) ** k
        x = self.C * n / (1.0 - self.r)
        return w / math.factorial(k) * self.P(k, x) + w * self.log_e / k

    def expected_Dnk(self, n: float, k: int) -> float:
        """Expected number of distinct parts with multiplicity exactly k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return self.P(k, self.C * n) / math.factorial(k) + self.log_e / k

    def mnk(self, n: float, k: int) -> float:
        return self.expected_Dnk(n, k) / self.log(n)


def pm_sequence(r: float, m_max: int) -> np.ndarray:
    """Gap-free probabilities ``p_0 .. p_{m_max}`` for m iid geometric(1-r).

    ``p_m = sum_{k<m} p_k C(m,k) r^k (1-r)^(m-k)``; binomial weights are
    formed in log space so nothing overflows or underflows at large m.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    p = np.zeros(m_max + 1)
    p[0] = 1.0
    lr, l1r = math.log(r), math.log1p(-r)
    lfact = gammaln(np.arange(m_max + 1) + 1.0)
    for m in range(1, m_max + 1):
        k = np.arange(m)
        logw = lfact[m] - lfact[:m] - lfact[m:0:-1] + k * lr + (m - k) * l1r
        p[m] = np.dot(p[:m], np.exp(logw))
    return p


def gap_free_limit(r: float, C: float, n: float) -> float:
    """``p_m`` at ``m = floor(Cn/(1-r))``."""
    m = int(math.floor(C * n / (1.0 - r)))
    return float(pm_sequence(r, m)[m])


@dataclass
class JVZReport:
    n: int
    k: int
    target: float
    status: str  # "ok" or "unsupported residue"
    min_ratio: float = math.nan
    min_se: float = math.nan
    max_ratio: float = math.nan
    max_se: float = math.nan
    trials: int = 0
    seed: int = 0

    def within(self, rel: float) -> dict:
        return {
            "min": abs(self.min_ratio / self.target - 1.0) <= rel,
            "max": abs(self.max_ratio / self.target - 1.0) <= rel,
        }

    def to_dict(self) -> dict:
        return dict(vars(self))


def _ratio_se(p1: float, p0: float, t: int) -> float:
    # delta method for p1/p0 with independent binomial estimates
    if p0 <= 0 or p1 <= 0:
        return math.inf
    v = (1 - p1) / (p1 * t) + (1 - p0) / (p0 * t)
    return math.sqrt(v)


def jvz_ratios(spec, r: float, n: int, k: int = 1, *, trials: int = 100_000, seed: int = 0) -> JVZReport:
    """``Min_k(n+1)/Min_k(n)`` and ``Max_k(n+1)/Max_k(n)`` against ``1/r``.

    Each count is ``C(n)`` times the sampled probability of having more than
    k copies of the smallest recurrent (resp. largest) part.
    """
    from .enumeration import count
    from .sampler import collect_stats

    counts = count(spec, n + 1).counts
    rep = JVZReport(n, k, 1.0 / r, "ok", trials=trials, seed=seed)
    if counts[n] == 0 or counts[n + 1] == 0:
        rep.status = "unsupported residue"
        return rep
    growth = counts[n + 1] / counts[n]
    s0 = collect_stats(spec, n, trials, seed=seed, k_max=1, j_window=(1, 1))
    s1 = collect_stats(spec, n + 1, trials, seed=seed + 1, k_max=1, j_window=(1, 1))
    for name, attr in (("min", "min_mult"), ("max", "g")):
        p0 = float(np.mean(getattr(s0, attr) > k))
        p1 = float(np.mean(getattr(s1, attr) > k))
        ratio = growth * p1 / p0 if p0 > 0 else math.nan
        setattr(rep, f"{name}_ratio", ratio)
        setattr(rep, f"{name}_se", abs(ratio) * _ratio_se(p1, p0, trials) if p0 > 0 else math.nan)
    return rep
