"""``locomp`` command line.

Exit status: 0 ok, 1 invalid input, 2 budget refusal, 3 numerical failure.
Errors print a single ``locomp: error=<kind> message=<text>`` line to stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from fractions import Fraction

import numpy as np
import scipy

from . import __version__
from .asymptotics import AsymptoticModel, jvz_ratios, pm_sequence
from .constants import (ConvergenceError, FitError, check_A_equals_C, estimate_constants,
                        spectral_r)
from .enumeration import (DEFAULT_BUDGET, BudgetError, EmptyClassError, count,
                          distinct_parts_expectation, max_part_distribution)
from .restriction import (Alternating, GeneralizedCarlitz, SpecError, build_spec,
                          spec_from_json)
from .sampler import collect_stats, poisson_check

REPORT_VERSION = 1
FAMILIES = ("unrestricted", "carlitz", "weak-alternating", "strict-alternating")

EXIT_VALIDATION, EXIT_BUDGET, EXIT_NUMERIC = 1, 2, 3


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _clean(obj):
    """Make a structure JSON safe: NaN/inf become null, Fractions floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Fraction):
        obj = float(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2)


def _spec(args):
    if getattr(args, "spec_file", None):
        with open(args.spec_file) as fh:
            return spec_from_json(fh.read())
    fam = args.family
    if fam is None:
        raise UsageError("one of --family or --spec-file is required")
    if fam == "unrestricted":
        return build_spec("unrestricted")
    if fam == "carlitz":
        forb = args.forbidden
        if forb is None:
            return build_spec("carlitz")
        try:
            vals = frozenset(int(v) for v in forb.split(",") if v.strip())
        except ValueError:
            raise UsageError(f"bad --forbidden list {forb!r}") from None
        return build_spec("carlitz", GeneralizedCarlitz(vals))
    if fam == "weak-alternating":
        return build_spec("alternating", Alternating(strict=False))
    if fam == "strict-alternating":
        return build_spec("alternating", Alternating(strict=True))
    raise UsageError(f"unknown family {fam!r}")


def _jwindow(text):
    if text is None:
        return None
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--jwindow expects lo:hi, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise UsageError("--jwindow needs 1 <= lo <= hi")
    return lo, hi


def _format(args):
    if args.format:
        return args.format
    return "table" if sys.stdout.isatty() else "json"


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _table(rows, header) -> str:
    cols = list(zip(*([header] + [[_cell(v) for v in r] for r in rows])))
    widths = [max(len(c) for c in col) for col in cols]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for r in rows:
        lines.append("  ".join(_cell(v).rjust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def _need_seed(args):
    if args.trials and args.trials > 0 and args.seed is None:
        raise UsageError("--seed is required when --trials > 0")


def _model(est, spec, args) -> AsymptoticModel:
    return AsymptoticModel(est.r, est.C, nu=spec.nu, ell_max=args.ellmax)


def _provenance(spec, args) -> dict:
    return {
        "spec": json.loads(spec.to_json()) if spec.family != "custom" else None,
        "spec_hash": spec.digest(),
        "seed": getattr(args, "seed", None),
        "versions": {"locomp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_count(args):
    spec = _spec(args)
    table = count(spec, args.nmax, budget=args.budget_states)
    fmt = _format(args)
    if fmt == "json":
        return dumps(table.to_dict())
    if fmt == "csv":
        return table.to_csv()
    return "\n".join(f"{n}, {c}" for n, c in enumerate(table.counts) if n >= 1)


def _constants(spec, args):
    n_moments = args.nmoments if args.nmoments is not None else max(2 * args.nmax, 100)
    return estimate_constants(spec, n_count=args.nmax, n_moments=n_moments, budget=args.budget_states)


def cmd_constants(args):
    spec = _spec(args)
    est = _constants(spec, args)
    out = {"r": est.r, "A": est.A, "B": est.B, "C": est.C,
           "u": {str(k): v for k, v in est.u.items()}}
    if args.spectral:
        sr = spectral_r(spec, cap=args.cap)
        out["spectral_r"] = {"r": sr.r, "cap": sr.cap, "certificate": sr.certificate,
                             "monotone": sr.monotone}
    ac = check_A_equals_C(spec, est)
    out["A_equals_C"] = {"status": ac.status, "difference": ac.difference, "tolerance": ac.tolerance}
    fmt = _format(args)
    if fmt == "json":
        out["diagnostics"] = {"low_confidence": est.diagnostics.get("low_confidence")}
        return dumps(out)
    rows = [("r", est.r), ("A", est.A), ("B", est.B), ("C", est.C)]
    if args.spectral:
        rows.append(("r_spectral", out["spectral_r"]["r"]))
    rows.append(("A=C", ac.status))
    if fmt == "csv":
        return "name,value\n" + "\n".join(f"{k},{_cell(v)}" for k, v in rows)
    return _table(rows, ("name", "value"))


def cmd_sample(args):
    _need_seed(args)
    spec = _spec(args)
    st = collect_stats(spec, args.n, args.trials, seed=args.seed, k_max=args.kmax,
                       j_window=_jwindow(args.jwindow), alt_gap_free=args.alt_gap_free)
    fmt = _format(args)
    if fmt == "csv":
        return st.to_csv()
    summ = st.summary()
    if fmt == "json":
        return dumps(summ)
    rows = [(k, summ[k]["mean"], summ[k]["se"]) for k in ("M", "D", "g")]
    rows += [(f"D({k})", v["mean"], v["se"]) for k, v in summ["Dk"].items()]
    rows += [(f"zeta_{j}", v["mean"], v["se"]) for j, v in summ["zeta"].items()]
    rows.append(("gap_free", summ["gap_free"]["q_hat"], summ["gap_free"]["se"]))
    return _table(rows, ("statistic", "mean", "se"))


def _model_from_args(args):
    if args.r is not None and args.C is not None:
        return None, AsymptoticModel(args.r, args.C, nu=args.nu, ell_max=args.ellmax)
    spec = _spec(args)
    est = _constants(spec, args)
    return spec, AsymptoticModel(est.r, est.C, nu=spec.nu, ell_max=args.ellmax)


def cmd_asymptotics(args):
    fmt = _format(args)
    if args.quantity == "pm":
        if args.r is None or args.m is None:
            raise UsageError("pm needs --r and --m")
        if not 0 < args.r < 1:
            raise UsageError("--r must lie in (0, 1)")
        if args.m < 0:
            raise UsageError("--m must be >= 0")
        p = pm_sequence(args.r, args.m)
        if fmt == "json":
            return dumps({"r": args.r, "m": args.m, "p_m": float(p[args.m])})
        if fmt == "csv":
            return "m,p_m\n" + "\n".join(f"{m},{p[m]!r}" for m in range(args.m + 1))
        return f"{p[args.m]:.6f}"
    if args.n is None:
        raise UsageError("--n is required")
    _, model = _model_from_args(args)
    rows = _formula_rows(model, args.n, args.kmax)
    if fmt == "json":
        return dumps({"r": model.r, "C": model.C, "nu": model.nu, "n": args.n,
                      "in_regime": model.in_regime(args.n), "values": dict(rows)})
    if fmt == "csv":
        return "quantity,value\n" + "\n".join(f"{k},{v!r}" for k, v in rows)
    return _table(rows, ("quantity", "value"))


def _formula_rows(model, n, kmax):
    rows = [("E(M_n)", model.expected_max(n)), ("E(D_n)", model.expected_distinct(n)),
            ("q_n", model.qn(n))]
    rows += [(f"g_n({k})", model.gnk(n, k)) for k in range(1, kmax + 1)]
    rows += [(f"E(D_n({k}))", model.expected_Dnk(n, k)) for k in range(1, kmax + 1)]
    return rows


def _compare(spec, args):
    est = _constants(spec, args)
    model = _model(est, spec, args)
    n = args.n
    exact = {
        "E(M_n)": max_part_distribution(spec, n, budget=args.budget_states).mean,
        "E(D_n)": distinct_parts_expectation(spec, n, budget=args.budget_states),
    }
    sampled = {}
    st = None
    if args.trials:
        st = collect_stats(spec, n, args.trials, seed=args.seed, k_max=args.kmax,
                           j_window=_jwindow(args.jwindow))
        sampled["E(M_n)"] = st.mean_se("M")
        sampled["E(D_n)"] = st.mean_se("D")
        sampled["q_n"] = (st.q_hat, st.q_se)
        for k in range(1, args.kmax + 1):
            sampled[f"g_n({k})"] = st.freq("g", k)
            sampled[f"E(D_n({k}))"] = st.mean_se("Dk", k)
    rows = []
    for name, asym in _formula_rows(model, n, args.kmax):
        ex = float(exact[name]) if name in exact else None
        sm, se = sampled.get(name, (None, None))
        rows.append({
            "quantity": name, "asymptotic": asym, "exact": ex,
            "exact_minus_asymptotic": None if ex is None else ex - asym,
            "sampled": sm, "sampled_se": se,
            "sampled_minus_asymptotic": None if sm is None else sm - asym,
        })
    return est, model, rows, st


def cmd_compare(args):
    _need_seed(args)
    spec = _spec(args)
    _, model, rows, _ = _compare(spec, args)
    fmt = _format(args)
    if fmt == "json":
        return dumps({"n": args.n, "in_regime": model.in_regime(args.n), "rows": rows})
    keys = ("quantity", "asymptotic", "exact", "exact_minus_asymptotic", "sampled", "sampled_se",
            "sampled_minus_asymptotic")
    if fmt == "csv":
        return ",".join(keys) + "\n" + "\n".join(",".join(_cell(r[k]) for k in keys) for r in rows)
    return _table([[r[k] for k in keys] for r in rows],
                  ("quantity", "asym", "exact", "exact-asym", "sampled", "se", "sampled-asym"))


def cmd_report(args):
    _need_seed(args)
    spec = _spec(args)
    est, model, rows, st = _compare(spec, args)
    doc = {
        "report_version": REPORT_VERSION,
        "provenance": _provenance(spec, args),
        "parameters": {"n": args.n, "nmax": args.nmax, "trials": args.trials, "kmax": args.kmax,
                       "ellmax": args.ellmax},
        "constants": {"r": est.r, "A": est.A, "B": est.B, "C": est.C,
                      "A_equals_C": vars(check_A_equals_C(spec, est))},
        "asymptotic_regime": model.in_regime(args.n),
        "compare": rows,
    }
    if st is not None:
        doc["sample"] = st.summary()
        doc["poisson"] = poisson_check(st, est.r, est.C).to_dict()
    if args.jvz:
        doc["jvz"] = jvz_ratios(spec, est.r, args.n, trials=args.trials, seed=args.seed).to_dict()
    return dumps(doc)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_spec(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--family", choices=FAMILIES)
    g.add_argument("--spec-file", help="JSON restriction document")
    p.add_argument("--forbidden", help="comma separated forbidden differences (carlitz family)")


def _add_common(p, *, n=False, nmax=False, trials=False):
    if nmax:
        p.add_argument("--nmax", type=int, default=200, help="largest n counted (default 200)")
        p.add_argument("--nmoments", type=int, default=None,
                       help="n used for part moments (default max(2*nmax, 100))")
    if n:
        p.add_argument("--n", type=int, required=True)
    if trials:
        p.add_argument("--trials", type=int, default=0)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jwindow", default=None, help="lo:hi part sizes for zeta_j")
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--ellmax", type=int, default=8)
    p.add_argument("--format", choices=("csv", "json", "table"))
    p.add_argument("--budget-states", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--out", help="write output here instead of stdout")


class _Parser(argparse.ArgumentParser):
    # argparse would exit with 2, which is reserved for budget refusals
    def error(self, message):
        print(f"locomp: error=validation message={message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="locomp", description="Locally restricted integer compositions")
    ap.add_argument("--version", action="version", version=f"locomp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="exact counts C(1..nmax)")
    _add_spec(p)
    p.add_argument("--nmax", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("constants", help="estimate r, A, B, C")
    _add_spec(p)
    _add_common(p, nmax=True)
    p.add_argument("--spectral", action="store_true", help="also run the transfer-matrix root")
    p.add_argument("--cap", type=int, default=60)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("sample", help="Monte Carlo statistics of uniform samples")
    _add_spec(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jwindow", default=None)
    p.add_argument("--alt-gap-free", action="store_true",
                   help="gap free means every part between min and max appears")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("asymptotics", help="evaluate asymptotic formulas")
    p.add_argument("quantity", choices=("pm", "eval"))
    _add_spec(p)
    p.add_argument("--r", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--nu", type=int, default=0)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    _add_common(p, nmax=True)
    p.set_defaults(func=cmd_asymptotics)

    for name, func, helptext in (("compare", cmd_compare, "exact and sampled vs asymptotic"),
                                 ("report", cmd_report, "full JSON report for one family")):
        p = sub.add_parser(name, help=helptext)
        _add_spec(p)
        _add_common(p, n=True, nmax=True, trials=True)
        if name == "report":
            p.add_argument("--jvz", action="store_true", help="include ratio checks (slow)")
        p.set_defaults(func=func)
    return ap


def _fail(kind: str, code: int, exc) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"locomp: error={kind} message={msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        text = args.func(args)
    except BudgetError as exc:
        return _fail("budget", EXIT_BUDGET, exc)
    except (ConvergenceError, FitError) as exc:
        return _fail("nonconvergence", EXIT_NUMERIC, exc)
    except (SpecError, UsageError, EmptyClassError, ValueError, OSError) as exc:
        return _fail("validation", EXIT_VALIDATION, exc)
    _emit(args, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
