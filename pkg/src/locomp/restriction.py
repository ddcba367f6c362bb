"""Local restriction functions and the built-in composition families.

A restriction of type ``(m, p)`` is a predicate ``rule(residue, window)`` where
``window = (c_i, c_{i-1}, ..., c_{i-p})`` and ``residue = i mod m``.  Parts
outside the composition are 0.  A composition is in the class when the rule
holds at every position; only positions ``1 .. len + p`` need checking since
every other window is all zeros.

Built-in families with span 1 also carry a :class:`LocalKernel`, a structured
form of the same rule that the counting code uses to aggregate transitions
with prefix sums instead of looping over every pair of parts.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

Rule = Callable[[int, tuple], bool]

SCHEMA_VERSION = 1
FAMILIES = ("unrestricted", "carlitz", "alternating", "periodic_chain", "custom")


class SpecError(ValueError):
    """Invalid family parameters or restriction document."""


@dataclass(frozen=True)
class PartWindow:
    """Arguments of a restriction: ``parts[0]`` is the current part."""

    parts: tuple
    position_residue: int

    def check(self, span: int, modulus: int) -> None:
        if len(self.parts) != span + 1:
            raise SpecError(f"window needs {span + 1} parts, got {len(self.parts)}")
        if any(c < 0 for c in self.parts):
            raise SpecError("window entries must be nonnegative")
        if not 0 <= self.position_residue < modulus:
            raise SpecError(f"residue {self.position_residue} outside [0, {modulus})")


# ---------------------------------------------------------------------------
# Pair rules: span-1 relations between the previous part and the current one.
#
# ``forward(x, row, prefix, t)`` returns sum(row[prev] for allowed prev in 1..t)
# and ``backward(last, w, prefix, t)`` returns sum(w[x] for allowed x in 1..t).
# ``prefix[y]`` is row[1] + ... + row[y] (``prefix[0] == 0``); rules that only
# need the total get ``prefix`` as None and use ``total``.
# ---------------------------------------------------------------------------


class PairRule:
    needs_prefix = False

    def allows(self, x: int, prev: int) -> bool:
        raise NotImplementedError

    def forward(self, x, row, prefix, total, t):
        return sum(row[prev] for prev in range(1, t + 1) if self.allows(x, prev))

    def backward(self, last, w, prefix, total, t):
        return sum(w[x] for x in range(1, t + 1) if self.allows(x, last))


class AnyPair(PairRule):
    def allows(self, x, prev):
        return True

    def forward(self, x, row, prefix, total, t):
        return total

    def backward(self, last, w, prefix, total, t):
        return total


class DiffPair(PairRule):
    """Forbid ``x - prev`` in a finite set, optionally chosen per ``prev``."""

    def __init__(self, forbidden, table: Mapping[int, frozenset] | None = None):
        self.default = frozenset(forbidden)
        self.table = {int(k): frozenset(v) for k, v in (table or {}).items()}

    def forbidden_for(self, prev: int) -> frozenset:
        return self.table.get(prev, self.default)

    def allows(self, x, prev):
        return (x - prev) not in self.forbidden_for(prev)

    def forward(self, x, row, prefix, total, t):
        out = total
        for d in self.default:
            prev = x - d
            if 1 <= prev <= t and prev not in self.table:
                out -= row[prev]
        for prev, ds in self.table.items():
            if prev <= t and (x - prev) in ds:
                out -= row[prev]
        return out

    def backward(self, last, w, prefix, total, t):
        out = total
        for d in self.forbidden_for(last):
            x = last + d
            if 1 <= x <= t:
                out -= w[x]
        return out


class ComparePair(PairRule):
    """``prev OP x`` for OP in ``<, <=, >, >=``."""

    needs_prefix = True
    OPS = ("<", "<=", ">", ">=")

    def __init__(self, op: str):
        if op not in self.OPS:
            raise SpecError(f"unknown comparison {op!r}")
        self.op = op

    def allows(self, x, prev):
        op = self.op
        if op == "<":
            return prev < x
        if op == "<=":
            return prev <= x
        if op == ">":
            return prev > x
        return prev >= x

    def forward(self, x, row, prefix, total, t):
        op = self.op
        if op == "<":
            return prefix[min(x - 1, t)]
        if op == "<=":
            return prefix[min(x, t)]
        if op == ">":
            return total - prefix[min(x, t)]
        return total - prefix[min(x - 1, t)]

    def backward(self, last, w, prefix, total, t):
        op = self.op
        if op == "<":
            return total - prefix[min(last, t)]
        if op == "<=":
            return total - prefix[min(last - 1, t)]
        if op == ">":
            return prefix[min(last - 1, t)]
        return prefix[min(last, t)]


class PredicatePair(PairRule):
    def __init__(self, fn: Callable[[int, int], bool]):
        self.fn = fn

    def allows(self, x, prev):
        return bool(self.fn(x, prev))


@dataclass(frozen=True)
class LocalKernel:
    """Span-1 rule split into start, interior and end behaviour.

    ``pairs[res]`` governs a part at a position with residue ``res``.  The
    first part sits at residue ``1 % m``.  ``end_residues`` lists the residues
    the first position after the last part may have (None means any).
    """

    modulus: int
    pairs: tuple
    start: Callable[[int], bool] = lambda x: True
    end_residues: frozenset | None = None

    def end_ok(self, res: int) -> bool:
        return self.end_residues is None or res in self.end_residues

    def rule(self, res: int, window: tuple) -> bool:
        x, prev = window
        if x == 0 and prev == 0:
            return True
        if prev == 0:
            return res == 1 % self.modulus and bool(self.start(x))
        if x == 0:
            return self.end_ok(res)
        return self.pairs[res].allows(x, prev)


# ---------------------------------------------------------------------------
# Family parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Unrestricted:
    pass


@dataclass(frozen=True)
class GeneralizedCarlitz:
    """Adjacent parts with ``c_i - c_{i-1}`` outside a finite set.

    ``table`` overrides the forbidden set for particular values of the
    previous part.  ``forbidden={0}`` gives Carlitz compositions.
    """

    forbidden: frozenset = frozenset({0})
    table: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class Alternating:
    strict: bool = True
    first_step: str = "up"  # up | down | either
    parity: str = "odd"  # odd | any


@dataclass(frozen=True)
class PeriodicChain:
    """``c_1 R_0 c_2 R_1 c_3 ...`` with relations repeating with period L.

    ``length_residues`` restricts ``len(c) mod L``; None allows every length.
    """

    relations: tuple = ("<=", ">=")
    length_residues: tuple | None = None


FamilyParams = Unrestricted | GeneralizedCarlitz | Alternating | PeriodicChain


@dataclass(frozen=True)
class RestrictionSpec:
    modulus: int
    span: int
    rule: Rule
    family: str = "custom"
    params: object = None
    nu: int = 0
    nonrecurrent: frozenset = frozenset()
    kernel: LocalKernel | None = None
    # classes covered by the "sometimes A = C" splice condition
    splice: bool = False

    def __post_init__(self):
        if self.modulus < 1 or self.span < 1:
            raise SpecError("modulus and span must be positive")
        if self.nu < 0:
            raise SpecError("nu must be nonnegative")
        zero = (0,) * (self.span + 1)
        for res in range(self.modulus):
            if not self.rule(res, zero):
                raise SpecError(f"rule must allow the all-zero window (residue {res})")

    def allows(self, window: PartWindow) -> bool:
        window.check(self.span, self.modulus)
        return bool(self.rule(window.position_residue, tuple(window.parts)))

    def is_recurrent(self, part: int) -> bool:
        return part not in self.nonrecurrent

    def to_dict(self) -> dict:
        if self.family == "custom":
            raise SpecError("custom predicates cannot be serialized")
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "modulus": self.modulus,
            "span": self.span,
            "nu": self.nu,
            "params": _params_to_dict(self.params),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        try:
            text = self.to_json()
        except SpecError:
            text = repr((self.family, self.modulus, self.span, self.rule))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_nu(self, nu: int) -> "RestrictionSpec":
        return RestrictionSpec(**{**self.__dict__, "nu": nu})


def custom_spec(rule: Rule, modulus: int, span: int, *, nu: int = 0,
                nonrecurrent: Sequence[int] = ()) -> RestrictionSpec:
    """Wrap an arbitrary predicate.  Counting falls back to the generic DP."""
    return RestrictionSpec(modulus=modulus, span=span, rule=rule, family="custom",
                           nu=nu, nonrecurrent=frozenset(nonrecurrent))


def _spec_from_kernel(kernel: LocalKernel, family: str, params, splice: bool) -> RestrictionSpec:
    return RestrictionSpec(modulus=kernel.modulus, span=1, rule=kernel.rule, family=family,
                           params=params, kernel=kernel, splice=splice)


def _chain_kernel(relations: Sequence[str], length_residues) -> LocalKernel:
    period = len(relations)
    # position i >= 2 compares c_{i-1} and c_i with relations[(i - 2) mod L]
    pairs = tuple(ComparePair(relations[(res - 2) % period]) for res in range(period))
    ends = None
    if length_residues is not None:
        ends = frozenset((k + 1) % period for k in length_residues)
    return LocalKernel(modulus=period, pairs=pairs, end_residues=ends)


def _strict_either_rule(res: int, w: tuple) -> bool:
    a, b, c = w
    if a == 0:
        return True
    if b == 0:
        return c == 0
    if c == 0:
        return a != b
    return (c < b > a) or (c > b < a)


def build_spec(family: str, params: FamilyParams | None = None) -> RestrictionSpec:
    """Construct the restriction for a built-in family."""
    if family == "unrestricted":
        params = params or Unrestricted()
        return _spec_from_kernel(LocalKernel(1, (AnyPair(),)), family, params, splice=True)

    if family == "carlitz":
        params = params or GeneralizedCarlitz()
        if not isinstance(params, GeneralizedCarlitz):
            raise SpecError("carlitz expects GeneralizedCarlitz params")
        for s in [params.forbidden, *params.table.values()]:
            if not isinstance(s, (set, frozenset, tuple, list)):
                raise SpecError("difference sets must be finite collections of integers")
        params = GeneralizedCarlitz(frozenset(int(d) for d in params.forbidden),
                                    {int(k): frozenset(int(d) for d in v)
                                     for k, v in params.table.items()})
        kernel = LocalKernel(1, (DiffPair(params.forbidden, params.table),))
        return _spec_from_kernel(kernel, family, params, splice=True)

    if family == "alternating":
        params = params or Alternating()
        if not isinstance(params, Alternating):
            raise SpecError("alternating expects Alternating params")
        if params.first_step not in ("up", "down", "either"):
            raise SpecError(f"first_step must be up, down or either, got {params.first_step!r}")
        if params.parity not in ("odd", "any"):
            raise SpecError(f"parity must be odd or any, got {params.parity!r}")
        if params.first_step == "either":
            if not params.strict or params.parity != "any":
                raise SpecError("first_step='either' needs strict inequalities and parity='any'")
            return RestrictionSpec(modulus=1, span=2, rule=_strict_either_rule,
                                   family=family, params=params)
        up, down = ("<", ">") if params.strict else ("<=", ">=")
        relations = (up, down) if params.first_step == "up" else (down, up)
        lengths = (1,) if params.parity == "odd" else None
        kernel = _chain_kernel(relations, lengths)
        splice = params.strict and params.first_step == "up" and params.parity == "odd"
        return _spec_from_kernel(kernel, family, params, splice=splice)

    if family == "periodic_chain":
        params = params or PeriodicChain()
        if not isinstance(params, PeriodicChain):
            raise SpecError("periodic_chain expects PeriodicChain params")
        rels = tuple(params.relations)
        if not rels:
            raise SpecError("relation list is empty")
        bad = [r for r in rels if r not in ComparePair.OPS]
        if bad:
            raise SpecError(f"unknown relations {bad}")
        if not any(r in ("<", "<=") for r in rels) or not any(r in (">", ">=") for r in rels):
            raise SpecError("relations must allow both increases and decreases")
        lengths = None
        if params.length_residues is not None:
            lengths = tuple(sorted({int(k) % len(rels) for k in params.length_residues}))
            if not lengths:
                raise SpecError("length_residues is empty")
        params = PeriodicChain(rels, lengths)
        return _spec_from_kernel(_chain_kernel(rels, lengths), family, params, splice=False)

    raise SpecError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Validity and serialization
# ---------------------------------------------------------------------------


def is_valid_composition(spec: RestrictionSpec, c: Sequence[int]) -> bool:
    p, m = spec.span, spec.modulus
    padded = (0,) * p + tuple(c) + (0,) * p
    for i in range(1, len(c) + p + 1):
        # padded index of c_i is i + p - 1
        j = i + p - 1
        window = tuple(padded[j - d] for d in range(p + 1))
        if not spec.rule(i % m, window):
            return False
    return True


def _params_to_dict(params) -> dict:
    if params is None or isinstance(params, Unrestricted):
        return {}
    if isinstance(params, GeneralizedCarlitz):
        return {"forbidden": sorted(params.forbidden),
                "table": {str(k): sorted(v) for k, v in sorted(params.table.items())}}
    if isinstance(params, Alternating):
        return {"strict": params.strict, "first_step": params.first_step, "parity": params.parity}
    if isinstance(params, PeriodicChain):
        return {"relations": list(params.relations),
                "length_residues": None if params.length_residues is None
                else list(params.length_residues)}
    raise SpecError(f"cannot serialize params {params!r}")


def spec_from_dict(doc: Mapping) -> RestrictionSpec:
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SpecError(f"unsupported schema_version {version}")
    family = doc.get("family")
    raw = doc.get("params") or {}
    if family == "unrestricted":
        params = Unrestricted()
    elif family == "carlitz":
        params = GeneralizedCarlitz(frozenset(raw.get("forbidden", [0])),
                                    {int(k): frozenset(v) for k, v in raw.get("table", {}).items()})
    elif family == "alternating":
        params = Alternating(bool(raw.get("strict", True)), raw.get("first_step", "up"),
                             raw.get("parity", "odd"))
    elif family == "periodic_chain":
        lr = raw.get("length_residues")
        params = PeriodicChain(tuple(raw.get("relations", ())), None if lr is None else tuple(lr))
    else:
        raise SpecError(f"unknown family {family!r}")
    spec = build_spec(family, params)
    for key in ("modulus", "span"):
        if key in doc and doc[key] != getattr(spec, key):
            raise SpecError(f"{key}={doc[key]} does not match family {family} ({getattr(spec, key)})")
    nu = int(doc.get("nu", 0))
    return spec.with_nu(nu) if nu else spec


def spec_from_json(text: str) -> RestrictionSpec:
    return spec_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Bounded freeness probe
# ---------------------------------------------------------------------------


@dataclass
class ContextResult:
    residue: int
    left: tuple
    right: tuple
    threshold: int | None  # least M with constant acceptance on [M, probe_bound]
    stable_value: bool | None


@dataclass
class FreenessReport:
    probe_bound: int
    context_bound: int
    contexts: list
    candidate_contexts: list  # contexts whose acceptance stabilizes to "allow"
    non_stabilizing: list
    saturation: int | None  # empirical phi(P); None when inconclusive

    @property
    def conclusive(self) -> bool:
        return self.saturation is not None


def _accepts_middle(spec: RestrictionSpec, residue: int, left: tuple, x: int, right: tuple) -> bool:
    p, m = spec.span, spec.modulus
    seq = left + (x,) + right
    # every window lying inside seq ends at index p .. 2p and contains x
    for e in range(p, 2 * p + 1):
        window = tuple(seq[e - d] for d in range(p + 1))
        if not spec.rule((residue + e - p) % m, window):
            return False
    return True


def check_freeness(spec: RestrictionSpec, probe_bound: int, context_bound: int | None = None,
                   max_contexts: int = 2_000_000) -> FreenessReport:
    """Probe whether large middle parts can be swapped for any larger part.

    For every context ``r_1..r_p x r_{p+2}..r_{2p+1}`` with positive parts up to
    ``context_bound`` and every residue of ``x``, the acceptance of ``x`` is
    tabulated for ``x <= probe_bound``.  A context stabilizes when acceptance
    is constant on ``[probe_bound/2, probe_bound]``; its threshold is the
    least ``M`` from which it is constant.  This is evidence, not a proof.
    """
    p = spec.span
    if probe_bound < 2 * p + 2:
        raise SpecError(f"probe_bound must be at least {2 * p + 2}")
    if context_bound is None:
        context_bound = max(1, probe_bound // 2 - 2)
    n_ctx = spec.modulus * context_bound ** (2 * p)
    if n_ctx > max_contexts:
        raise SpecError(f"{n_ctx} contexts exceed max_contexts={max_contexts}")

    half = probe_bound // 2
    contexts, candidates, unstable = [], [], []
    parts = range(1, context_bound + 1)
    for residue in range(spec.modulus):
        for ctx in itertools.product(parts, repeat=2 * p):
            left, right = tuple(ctx[:p]), tuple(ctx[p:])
            acc = [_accepts_middle(spec, residue, left, x, right) for x in range(1, probe_bound + 1)]
            last = acc[-1]
            m_thr = probe_bound
            while m_thr > 1 and acc[m_thr - 2] == last:
                m_thr -= 1
            if m_thr > half:
                res = ContextResult(residue, left, right, None, None)
                unstable.append(res)
            else:
                res = ContextResult(residue, left, right, m_thr, last)
                if last:
                    candidates.append(res)
            contexts.append(res)
    saturation = None
    if candidates and not unstable:
        saturation = max(c.threshold for c in candidates)
    return FreenessReport(probe_bound, context_bound, contexts, candidates, unstable, saturation)
