"""Batch command-line front end emitting reproducible JSON manifests.

Every invocation prints a single manifest to standard output: the command,
the full parameter record (exact rationals as "p/q" strings), the numeric
settings (precision bits, tolerances, integration window), the tool version,
the wall-clock duration and the results payload.  Exit status is 0 only if
every certification the command performs passed.  Parameters must be exact:
decimal parameter strings are rejected, since they silently break the
rational identities everything downstream relies on.

Optional TSV sampling (columns: x <tab> value) is written to --out for the
closed-form evaluators.  Defaults can be stored in a key=value configuration
file named by --config or the QESODE_CONFIG environment variable.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction

import mpmath

from . import __version__, bdpoly, closedform, frobenius, params, shoot


CONFIG_ENV = "QESODE_CONFIG"
_CONFIG_KEYS = ("precision_bits", "tol", "x0", "xm", "xr")


def parse_rational(text: str) -> Fraction:
    """Exact 'p/q' or integer string; decimals are rejected, not rounded."""
    s = text.strip()
    if any(ch in s for ch in ".eE"):
        raise argparse.ArgumentTypeError(
            f"{text!r} looks like a decimal; pass an exact rational such as 3/2"
        )
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"cannot parse rational {text!r}: {exc}") from exc


def parse_rational_list(text: str) -> tuple[Fraction, ...]:
    return tuple(parse_rational(part) for part in text.split(","))


def parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(","))


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line (expected key=value): {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r}; expected one of {_CONFIG_KEYS}")
            out[key] = value
    return out


def _settings(args) -> dict:
    cfg = _load_config(getattr(args, "config", None))

    def pick(name, cast, fallback):
        value = getattr(args, name, None)
        if value is not None:
            return value
        if name in cfg:
            return cast(cfg[name])
        return fallback

    return {
        "precision_bits": pick("precision_bits", int, 128),
        "tol": pick("tol", float, 1e-10),
        "x0": pick("x0", float, 0.01),
        "xm": pick("xm", float, 1.0),
        "xr": pick("xr", float, None),
    }


def _nstr(v, dps=None) -> str:
    return mpmath.nstr(v, dps or int(mpmath.mp.dps))


def _estimates_json(estimates) -> list[dict]:
    return [e.to_json() for e in estimates]


def _spec_from_settings(problem, k_max, settings) -> shoot.BVPSpec:
    return shoot.default_spec(
        problem,
        k_max,
        prec_bits=settings["precision_bits"],
        x0=settings["x0"],
        xm=settings["xm"],
        xr=settings["xr"],
        eigen_tol=mpmath.mpf(settings["tol"]),
    )


def _write_tsv(path: str, samples: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, value in samples:
            fh.write(f"{_nstr(x)}\t{_nstr(value)}\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_poly(args, settings) -> tuple[dict, bool]:
    emit = args.emit or "coeffs"
    family = args.family
    results: dict = {"family": family}
    params_rec: dict = {}
    if family == "sextic":
        if args.l is None or (args.J is None and (args.alpha is None or args.n is None)):
            raise SystemExit("family=sextic requires --l and either --J (QES line) or --alpha with --n")
        n = args.n if args.n is not None else args.J
        alpha = args.alpha if args.alpha is not None else params.alpha_qes(args.J, args.l)
        poly = bdpoly.bd_second(alpha, args.l, n)
        params_rec = {"l": params.rational_str(args.l), "alpha": params.rational_str(alpha), "n": n}
        if args.J is not None:
            params_rec["J"] = args.J
    elif family == "irregular":
        if args.J is None or args.l is None:
            raise SystemExit("family=irregular requires --J and --l")
        n = args.n if args.n is not None else args.J
        out = bdpoly.bd_irregular(args.J, args.l, n)
        params_rec = {"J": args.J, "l": params.rational_str(args.l), "n": n}
        if isinstance(out, bdpoly.ObstructionPolynomial):
            poly = out.poly
            results["obstruction"] = True
        elif isinstance(out, bdpoly.FreeCoefficientPolynomial):
            results["free_coefficient"] = {
                "pure": out.pure.to_json(),
                "qj_part": out.free.to_json(),
            }
            poly = out.pure
        else:
            poly = out
    elif family == "cheng":
        if args.g is None or args.n is None:
            raise SystemExit("family=cheng requires --g and --n")
        poly = bdpoly.cheng_third(*args.g, args.n)
        params_rec = {"g": [params.rational_str(v) for v in args.g], "n": args.n}
    elif family == "general":
        if args.g is None or args.n is None or args.order is None or args.M is None:
            raise SystemExit("family=general requires --order, --M, --g and --n")
        poly = bdpoly.general_family(args.order, args.M, args.g, args.n)
        params_rec = {
            "order": args.order,
            "M": args.M,
            "g": [params.rational_str(v) for v in args.g],
            "m": args.n,
        }
    else:
        raise SystemExit(f"unknown polynomial family {family!r}")
    results["polynomial"] = poly.to_json()
    if emit == "roots":
        roots = bdpoly.isolate_real_roots(poly, settings["precision_bits"])
        results["roots"] = roots.to_json()
    return {"parameters": params_rec, "results": results}, True


def cmd_spectrum(args, settings) -> tuple[dict, bool]:
    problem, rec = _problem_from_args(args)
    spec = _spec_from_settings(problem, args.k_max, settings)
    if args.k_max == 0:
        return {"parameters": rec, "results": {"eigenvalues": []}}, True
    if isinstance(problem, params.SexticProblem):
        ev = shoot.spectrum_sextic(problem, args.k_max, spec)
    elif isinstance(problem, params.ThirdOrderProblem):
        ev = shoot.spectrum_third(problem, args.k_max, spec)
    else:
        ev = shoot.spectrum_general(problem, args.k_max, spec)
    ok = len(ev) == args.k_max
    results = {"eigenvalues": _estimates_json(ev)}
    out_path = getattr(args, "out", None)
    if out_path and args.grid:
        level = args.sample_level if args.sample_level is not None else 0
        samples = shoot.sample_eigenfunction(problem, ev[level].value, spec, args.grid)
        _write_tsv(out_path, samples)
        results["wavefunction_tsv"] = {"path": out_path, "level": level}
    return {"parameters": rec, "results": results}, ok


def _problem_from_args(args):
    kind = args.problem
    if kind == "sextic":
        if args.alpha is None or args.l is None:
            raise SystemExit("problem=sextic requires --alpha and --l")
        return params.SexticProblem(args.alpha, args.l), {
            "problem": "sextic",
            "alpha": params.rational_str(args.alpha),
            "l": params.rational_str(args.l),
        }
    if kind == "third":
        if args.g is None:
            raise SystemExit("problem=third requires --g g0,g1,g2")
        prob = params.ThirdOrderProblem(*args.g, adjoint=args.adjoint)
        return prob, {
            "problem": "third",
            "g": [params.rational_str(v) for v in args.g],
            "adjoint": bool(args.adjoint),
        }
    if kind == "general":
        if args.g is None or args.order is None or args.M is None:
            raise SystemExit("problem=general requires --order, --M and --g")
        prob = params.GeneralProblem(args.order, args.M, args.g)
        return prob, {
            "problem": "general",
            "order": args.order,
            "M": args.M,
            "g": [params.rational_str(v) for v in args.g],
        }
    raise SystemExit(f"unknown problem kind {kind!r}")


def cmd_isospec(args, settings) -> tuple[dict, bool]:
    if args.alpha is not None and args.l is not None:
        alpha, l = args.alpha, args.l
    elif args.J is not None and args.l is not None:
        alpha, l = params.alpha_qes(args.J, args.l), args.l
    else:
        raise SystemExit("isospec requires --alpha --l (or --J --l)")
    report = shoot.isospectral_report(
        alpha, l, args.k_max, prec_bits=settings["precision_bits"]
    )
    tol = mpmath.mpf(settings["tol"])
    passed = (not report.has_gaps) and report.max_abs_difference < tol
    rec = {"alpha": params.rational_str(alpha), "l": params.rational_str(l), "k_max": args.k_max}
    return {"parameters": rec, "results": report.to_json()}, passed


def cmd_resonance(args, settings) -> tuple[dict, bool]:
    prec = settings["precision_bits"]
    if args.family == "sextic":
        if args.J is None or args.l is None:
            raise SystemExit("resonance family=sextic requires --J and --l")
        obstruction = bdpoly.obstruction_polynomial(args.J, args.l).poly
        reference = bdpoly.bd_second(params.alpha_qes(args.J, args.l), args.l, args.J)
        problem = params.SexticProblem.irregular(args.J, args.l)
        rec = {"family": "sextic", "J": args.J, "l": params.rational_str(args.l)}
    elif args.family == "third":
        if args.g is not None:
            g = args.g
        elif args.J is not None and args.l is not None:
            g = params.g_qes(args.J, args.l)
        else:
            raise SystemExit("resonance family=third requires --g or --J/--l")
        problem = params.ThirdOrderProblem(*g)
        obstruction = frobenius.resonant_log_coefficient(problem)
        _, J = frobenius.resonance_order_of(problem)
        reference = bdpoly.cheng_third(*g, J)
        rec = {"family": "third", "g": [params.rational_str(v) for v in g]}
    else:
        raise SystemExit(f"unknown resonance family {args.family!r}")
    factor = obstruction.proportional_factor(reference.with_var(obstruction.var))
    log_coeff = frobenius.resonant_log_coefficient(problem)
    roots = bdpoly.isolate_real_roots(obstruction, prec)
    results = {
        "obstruction": obstruction.to_json(),
        "roots": [dict(r, channel="qes") for r in roots.to_json()],
        "log_coefficient": log_coeff.to_json(),
        "proportional_to_recursion_polynomial": factor is not None,
        "proportionality_factor": params.rational_str(factor) if factor is not None else None,
    }
    return {"parameters": rec, "results": results}, factor is not None


def cmd_closedform(args, settings) -> tuple[dict, bool]:
    prec = settings["precision_bits"]
    tol = mpmath.mpf(settings["tol"])
    grid = args.grid or ()
    samples = []
    with mpmath.workprec(prec):
        if args.kind == "whittaker":
            if args.J is None or args.l is None:
                raise SystemExit("closedform whittaker requires --J and --l")
            rec = {"kind": "whittaker", "J": args.J, "l": params.rational_str(args.l)}
            for x in grid:
                samples.append((mpmath.mpf(x), closedform.whittaker_solution(args.J, args.l, x)))
            qj0 = closedform.qj0_constant(args.J, args.l)
            x_chk = mpmath.mpf(1)
            direct = closedform.whittaker_solution(args.J, args.l, x_chk)
            series = frobenius.bd_irregular_series_eval(args.J, args.l, 0, qj0, x_chk, N=140)
            rel = abs(direct - series) / abs(direct)
            results = {
                "qj0": _nstr(qj0),
                "series_identity_relative_error": _nstr(rel, 5),
                "samples": [[_nstr(x), _nstr(v)] for x, v in samples],
            }
            passed = rel < tol
        elif args.kind == "bessel":
            if args.J is None or args.l is None:
                raise SystemExit("closedform bessel requires --J and --l")
            rec = {"kind": "bessel", "J": args.J, "l": params.rational_str(args.l)}
            result = closedform.bessel_ansatz_solve(args.J, args.l, prec)
            reference = bdpoly.bd_second(params.alpha_qes(args.J, args.l), args.l, args.J).monic()
            results = result.to_json()
            passed = result.eigencondition == reference
            results["eigencondition_matches_recursion"] = passed
        elif args.kind == "f02":
            if args.g0 is None:
                raise SystemExit("closedform f02 requires --g0")
            rec = {"kind": "f02", "g0": params.rational_str(args.g0)}
            for x in grid:
                samples.append((mpmath.mpf(x), closedform.subdominant_third_order(args.g0, x)))
            c_star = closedform.subdominant_C(args.g0)
            l_equiv = Fraction(3, 2) - args.g0
            g_triple = params.g_qes(1, l_equiv)
            x_chk = mpmath.mpf("1.5")
            lhs = frobenius.cheng_series_eval(g_triple, 0, x_chk, regulated_C=c_star)
            rhs = closedform.subdominant_third_order(args.g0, x_chk)
            rel = abs(lhs - rhs) / abs(rhs)
            results = {
                "C": _nstr(c_star),
                "regulated_series_relative_error": _nstr(rel, 5),
                "samples": [[_nstr(x), _nstr(v)] for x, v in samples],
            }
            passed = rel < tol
        else:
            raise SystemExit(f"unknown closed form {args.kind!r}")
    out_path = getattr(args, "out", None)
    if out_path and samples:
        _write_tsv(out_path, samples)
    return {"parameters": rec, "results": results}, passed


def cmd_biorthogonality(args, settings) -> tuple[dict, bool]:
    if args.g is None:
        raise SystemExit("biorthogonality requires --g g0,g1,g2")
    report = shoot.biorthogonality_check(args.g, args.n_max, prec_bits=settings["precision_bits"])
    tol = mpmath.mpf(settings["tol"])
    passed = report.max_off_diagonal() < tol
    rec = {"g": [params.rational_str(v) for v in args.g], "n_max": args.n_max}
    return {"parameters": rec, "results": report.to_json()}, passed


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # the numeric-settings flags are accepted both before and after the
    # subcommand; SUPPRESS defaults keep the subparser from clobbering values
    # parsed at the top level
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument(
        "--precision-bits", type=int, default=argparse.SUPPRESS, help="working precision (default 128)"
    )
    shared.add_argument(
        "--tol", type=float, default=argparse.SUPPRESS, help="certification tolerance (default 1e-10)"
    )
    shared.add_argument("--x0", type=float, default=argparse.SUPPRESS, help="origin-side anchor point")
    shared.add_argument("--xm", type=float, default=argparse.SUPPRESS, help="matching point")
    shared.add_argument(
        "--xr", type=float, default=argparse.SUPPRESS, help="outer integration bound (default adaptive)"
    )
    shared.add_argument(
        "--config", default=argparse.SUPPRESS, help=f"key=value config file (or ${CONFIG_ENV})"
    )
    shared.add_argument("--out", default=argparse.SUPPRESS, help="TSV output path for sample grids")

    parser = argparse.ArgumentParser(
        prog="qesode",
        parents=[shared],
        description="QES sectors of sextic and higher-order ODE eigenproblems: "
        "exact recursions plus a high-precision shooting oracle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--J", type=int, default=None)
        p.add_argument("--l", type=parse_rational, default=None)
        p.add_argument("--alpha", type=parse_rational, default=None)
        p.add_argument("--g", type=parse_rational_list, default=None)
        p.add_argument("--order", type=int, default=None, help="ODE order n for the general family")
        p.add_argument("--M", type=int, default=None)
        p.add_argument("--n", type=int, default=None)

    p = sub.add_parser("poly", parents=[shared], help="emit recursion polynomials or their certified roots")
    p.add_argument("--family", required=True, choices=("sextic", "irregular", "cheng", "general"))
    p.add_argument("--emit", choices=("coeffs", "roots"), default="coeffs")
    add_common(p)
    p.set_defaults(func=cmd_poly)

    p = sub.add_parser("spectrum", parents=[shared], help="shooting spectrum of one boundary-value problem")
    p.add_argument("--problem", required=True, choices=("sextic", "third", "general"))
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--adjoint", action="store_true")
    p.add_argument("--grid", type=parse_float_list, default=None, help="x values for wavefunction TSV samples")
    p.add_argument("--sample-level", type=int, default=None, help="level index to sample (default 0)")
    add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("isospec", parents=[shared], help="pair the sextic and third-order spectra level by level")
    p.add_argument("--k-max", type=int, required=True)
    add_common(p)
    p.set_defaults(func=cmd_isospec)

    p = sub.add_parser("resonance", parents=[shared], help="obstruction polynomial, roots and channel tags")
    p.add_argument("--family", required=True, choices=("sextic", "third"))
    add_common(p)
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("closedform", parents=[shared], help="Whittaker / Bessel-pair / 0F2 closed forms")
    p.add_argument("--kind", required=True, choices=("whittaker", "bessel", "f02"))
    p.add_argument("--g0", type=parse_rational, default=None)
    p.add_argument("--grid", type=parse_float_list, default=None, help="comma-separated x values")
    add_common(p)
    p.set_defaults(func=cmd_closedform)

    p = sub.add_parser("biorthogonality", parents=[shared], help="inner products of direct and adjoint eigenfunctions")
    p.add_argument("--n-max", type=int, required=True)
    add_common(p)
    p.set_defaults(func=cmd_biorthogonality)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = _settings(args)
    started = time.time()
    with mpmath.workprec(settings["precision_bits"]):
        try:
            payload, passed = args.func(args, settings)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            manifest = {
                "command": args.command,
                "tool_version": __version__,
                "settings": settings,
                "error": {"type": type(exc).__name__, "message": str(exc)},
                "passed": False,
            }
            json.dump(manifest, sys.stdout, indent=2)
            sys.stdout.write("\n")
            return 1
    manifest = {
        "command": args.command,
        "tool_version": __version__,
        "settings": settings,
        "duration_seconds": round(time.time() - started, 3),
        "passed": bool(passed),
    }
    manifest.update(payload)
    json.dump(manifest, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
