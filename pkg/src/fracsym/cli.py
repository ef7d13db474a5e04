"""Command line interface: ``fracsym <subcommand> ...``.

Exit codes: 0 success, 1 a check ran and failed, 2 parse error, 3 domain
error, 4 non-convergence under --strict, 5 sample certification failure,
6 precondition or transversality failure.
"""

import argparse
import csv
import io
import json
import math
import sys

from . import diffusion
from . import expr as ex
from .errors import (
    CertificationError,
    DomainError,
    EvaluationError,
    ParseError,
    PreconditionError,
    SeriesDivergenceError,
    TerminalError,
    TruncationError,
)
from .fracop import FracSpec, SeriesControl, rl_power_sum, rl_quadrature, rl_series, NotPowerSum
from .jet import default_truncation, jet_of
from .parse import parse
from .prolong import VectorField, classical_phi_sigma, corollary_phi_p_1d, general_phi_p
from .symmetry import (
    Equation,
    SolutionSample,
    certify,
    invariants_of_scaling,
    lie_residual,
    probe_points,
    transversality_rank,
)

EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_CONVERGENCE = 4
EXIT_CERTIFICATION = 5
EXIT_PRECONDITION = 6


class StrictFailure(Exception):
    pass


# -- argument helpers ---------------------------------------------------------


def _bindings(text):
    """'t=1,x=0.5' -> {'t': 1.0, 'x': 0.5}."""
    out = {}
    if not text:
        return out
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not _:
            raise argparse.ArgumentTypeError(f"expected name=value, got {part!r}")
        out[name.strip()] = float(value)
    return out


def _box(text):
    """'t=0.1:2,x=0:2' -> {'t': (0.1, 2.0), 'x': (0.0, 2.0)}."""
    out = {}
    for part in text.split(","):
        name, _, rng = part.partition("=")
        lo, _, hi = rng.partition(":")
        out[name.strip()] = (float(lo), float(hi))
    return out


def _control(args):
    tol = args.series_tol if hasattr(args, "series_tol") else args.tol
    return SeriesControl(args.max_terms, tol, args.small_run)


def _load_equation(path):
    with open(path) as fh:
        data = json.load(fh)
    return Equation.from_json(data), data


def _diffusion_spec(data):
    if data.get("family") != "diffusion" or "diffusion" not in data:
        raise PreconditionError("generator ids v1, v2, v3 need an equation file of the diffusion family")
    return diffusion.DiffusionSpec.from_json(data["diffusion"])


def _field(args, eq, data):
    if args.field:
        raw = args.field
        if not raw.lstrip().startswith("{"):
            with open(raw) as fh:
                raw = fh.read()
        return VectorField.from_json(json.loads(raw))
    if args.generator:
        spec = _diffusion_spec(data)
        if args.generator == "v3_printed":
            return diffusion.printed_v3(spec)
        return diffusion.generator(spec, args.generator)
    raise PreconditionError("give --generator or --field")


# -- output -------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _rows(report):
    """CSV projection: the per-point table when there is one, else key/value pairs."""
    pts = report.get("probe_points")
    res = report.get("residuals")
    if pts and res and len(pts) == len(res):
        keys = sorted(pts[0])
        rows = [keys + ["residual"]]
        rows += [[pt[k] for k in keys] + [r] for pt, r in zip(pts, res)]
        return rows
    rows = [["key", "value"]]
    for k in sorted(report):
        v = report[k]
        rows.append([k, json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v])
    return rows


def _emit(report, args):
    report = _clean(report)
    if args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(_rows(report))
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands --------------------------------------------------------------


def cmd_eval_rl(args):
    f = parse(args.expr)
    var = args.var
    spec = FracSpec.single(var, args.order, args.a)
    at = {var: args.at}
    at.update(_bindings(args.bind))
    report = {"expr": ex.to_text(f), "order": args.order, "a": args.a, "at": args.at, "nodes": None, "tail_estimate": 0.0, "converged": True}
    method = args.method
    if method == "auto":
        try:
            report["value"] = rl_power_sum(f, spec, at)
            method = "power"
        except NotPowerSum:
            method = "quadrature" if args.order < 0 or not float(args.order).is_integer() else "series"
    if method == "power":
        report.setdefault("value", rl_power_sum(f, spec, at))
    elif method == "quadrature":
        if float(args.order).is_integer() and args.order >= 0:
            method = "series"
        else:
            report["value"] = rl_quadrature(f, spec, at, args.nodes)
            report["nodes"] = args.nodes
    if method == "series":
        r = rl_series(f, spec, at, _control(args))
        report.update(value=r.value, tail_estimate=r.tail, converged=r.converged, terms=r.terms, heuristic=r.heuristic)
        if args.strict and not r.converged:
            _emit(dict(report, method=method), args)
            raise StrictFailure(f"series did not meet the tail rule within {args.max_terms} terms")
    report["method"] = method
    _emit(report, args)
    return 0


def cmd_prolong(args):
    axes = tuple(a.strip() for a in args.axes.split(","))
    xi = {}
    for item in args.xi or []:
        name, _, text = item.partition("=")
        xi[name.strip()] = parse(text)
    v = VectorField.of(axes, xi, parse(args.phi), args.dep)
    at = _bindings(args.at)
    section = parse(args.section)
    K = args.K or default_truncation()
    jet = jet_of(section, at, K, axes=axes, dep=args.dep)
    report = {"field": v.to_json(), "section": ex.to_text(section), "at": at, "truncation": K}
    if args.sigma is not None:
        sigma = tuple(axes.index(s) for s in args.sigma.split(",") if s)
        coef = classical_phi_sigma(v, sigma)
        report.update(target=jet.space.coord(sigma), coefficient=ex.to_text(coef), value=jet.evaluate(coef))
    else:
        axis = args.frac_axis or axes[-1]
        spec = FracSpec.single(axis, args.order, args.a)
        ctl = _control(args)
        report.update(target=f"RL[{args.order},{axis}]({args.dep})", mode=args.mode)
        report["value"] = general_phi_p(v, spec, jet, ctl, args.mode, args.nodes)
        if len(axes) == 1:
            report["corollary_value"] = corollary_phi_p_1d(v, args.order, args.a, jet, ctl)
    _emit(report, args)
    return 0


def _sample(args, eq, data):
    if not args.sample:
        raise CertificationError("no solution sample given (use --sample builtin or --sample EXPR); the Lie condition is only checked on a certified solution")
    if args.sample == "builtin":
        s = diffusion.builtin_sample(_diffusion_spec(data))
        if args.box:
            s = SolutionSample(s.expr, _box(args.box), s.name, s.note)
        return s
    frac = set(eq.fractional_axes())
    box = _box(args.box) if args.box else {a: (eq.terminal(a), eq.terminal(a) + 2.0) if a in frac else (0.1, 2.0) for a in eq.axis_names}
    return SolutionSample(parse(args.sample), box, "user")


def cmd_check_symmetry(args):
    eq, data = _load_equation(args.equation)
    v = _field(args, eq, data)
    sample = _sample(args, eq, data)
    cert = certify(eq, sample, seed=args.seed, nodes=args.nodes)
    terminals = {a: eq.terminal(a) for a in eq.fractional_axes()}
    pts = probe_points(sample.box, args.points, args.seed, terminals, axes=eq.axis_names)
    res = lie_residual(eq, v, sample, pts, _control(args), args.mode, nodes=args.nodes)
    worst = max(abs(r) for r in res)
    report = {
        "generator": v.name or "field",
        "field": v.to_json(),
        "sample": ex.to_text(sample.expr),
        "certification_residual": cert,
        "probe_points": pts,
        "residuals": res,
        "max_residual": worst,
        "truncation": default_truncation() if args.mode == "jet" else args.mode,
        "tolerances": {"lie": args.tol, "certification": 1e-8},
        "seed": args.seed,
        "pass": worst <= args.tol,
    }
    _emit(report, args)
    return 0 if worst <= args.tol else EXIT_FAILED


def _reduction_probes(spec, args):
    """Lift of the power similarity solution checked on the original equation."""
    c, lift, _ = diffusion.similarity_solution_v2(spec)
    eq = diffusion.build_equation(spec)
    box = {diffusion.TIME: (0.1, 2.0), spec.axes[0]: (0.0, 2.0)}
    pts = probe_points(box, args.points, args.seed, {spec.axes[0]: 0.0}, axes=eq.axis_names)
    res = [eq.residual_at(lift, pt, args.nodes) for pt in pts]
    return {"coefficient": c, "lifted_solution": ex.to_text(lift), "probe_points": pts, "residuals": res, "max_residual": max(abs(r) for r in res)}


def cmd_reduce(args):
    eq, data = _load_equation(args.equation)
    if args.generator:
        spec = _diffusion_spec(data)
        v = diffusion.generator(spec, args.generator)
        reducer = {"v1": diffusion.reduce_by_v1, "v2": diffusion.reduce_by_v2, "v3": diffusion.reduce_by_v3}[args.generator]
        reduced = reducer(spec)
        report = reduced.to_json()
        if args.generator == "v2" and spec.N == 1 and not spec.linear:
            try:
                report["verification"] = _reduction_probes(spec, args)
            except PreconditionError as err:
                report["verification"] = {"skipped": str(err)}
        if args.generator == "v3":
            report["slot_kinds"] = reduced.slot_kinds()
    else:
        v = _field(args, eq, data)
        inv = invariants_of_scaling(v)
        report = {"generator": v.name or "field", "field": v.to_json(), "invariants": inv.texts(), "vertical": inv.vertical}
    at = _bindings(args.at) if args.at else {a: 1.0 for a in eq.axis_names}
    at.setdefault(eq.dep, 1.0)
    r_xi, r_all = transversality_rank([v], at)
    report["transversality"] = {"at": at, "rank_xi": r_xi, "rank_augmented": r_all}
    if r_xi != r_all:
        _emit(report, args)
        raise PreconditionError(f"transversality fails at {at}: rank {r_xi} != augmented rank {r_all}")
    _emit(report, args)
    return 0


def cmd_ek(args):
    f = parse(args.expr)
    alphas = _bindings(args.alpha)
    at = _bindings(args.at)
    report = {"expr": ex.to_text(f), "mu": args.mu, "alphas": alphas, "at": at, "nodes": args.nodes}
    report["value"] = diffusion.ek_operator(f, args.mu, alphas, at, args.nodes)
    if args.identity:
        var = next(iter(alphas)) if alphas else "z"
        p, t, x = args.identity
        lhs, rhs = diffusion.ek_scaling_identity(f, alphas.get(var, 0.5), p, t, x, var, args.nodes)
        report["scaling_identity"] = {"p": p, "t": t, "x": x, "rl_quadrature": lhs, "ek_form": rhs, "abs_diff": abs(lhs - rhs)}
    _emit(report, args)
    return 0


# -- parser -------------------------------------------------------------------


def _common(p, nodes=64):
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format (default: json)")
    p.add_argument("--nodes", type=int, default=nodes, help=f"Gauss-Jacobi nodes (default: {nodes})")


def _series_flags(p):
    d = SeriesControl()
    p.add_argument("--max-terms", type=int, default=d.max_terms, help=f"series term budget per axis (default: {d.max_terms})")
    p.add_argument("--tol", type=float, default=d.tol, help=f"relative tail tolerance (default: {d.tol})")
    p.add_argument("--small-run", type=int, default=d.small_run, help=f"consecutive small terms to stop (default: {d.small_run})")


def build_parser():
    parser = argparse.ArgumentParser(prog="fracsym", description="Riemann-Liouville operators and Lie symmetries of fractional PDEs. FRACSYM_TRUNCATION sets the default jet order.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-rl", help="evaluate RL^p_a f at a point")
    p.add_argument("--expr", required=True, help="expression in the operator variable")
    p.add_argument("--order", type=float, required=True, help="order p (negative for integrals)")
    p.add_argument("--a", type=float, default=0.0, help="lower terminal (default: 0)")
    p.add_argument("--at", type=float, required=True, help="evaluation point x > a")
    p.add_argument("--var", default="x", help="operator variable (default: x)")
    p.add_argument("--bind", default="", help="other variables, e.g. 't=1,y=2'")
    p.add_argument("--method", choices=("auto", "power", "series", "quadrature"), default="auto", help="evaluator (default: auto)")
    p.add_argument("--strict", action="store_true", help="exit 4 when the series does not converge")
    _series_flags(p)
    _common(p)
    p.set_defaults(func=cmd_eval_rl)

    p = sub.add_parser("prolong", help="prolongation coefficient of a vector field on the jet of a section")
    p.add_argument("--axes", required=True, help="comma-separated axis names, e.g. 't,x'")
    p.add_argument("--xi", action="append", help="xi component 'axis=expr' (repeatable)")
    p.add_argument("--phi", default="0", help="phi coefficient (default: 0)")
    p.add_argument("--dep", default="u", help="dependent variable (default: u)")
    p.add_argument("--section", required=True, help="section u = f(axes) supplying the jet")
    p.add_argument("--at", required=True, help="base point, e.g. 't=1,x=0.5'")
    p.add_argument("--sigma", help="classical target as axis names, e.g. 'x,x'; omit for the fractional one")
    p.add_argument("--order", type=float, default=0.5, help="fractional order (default: 0.5)")
    p.add_argument("--a", type=float, default=0.0, help="terminal (default: 0)")
    p.add_argument("--frac-axis", help="axis of the fractional operator (default: last axis)")
    p.add_argument("--mode", choices=("auto", "jet", "section"), default="jet", help="fractional evaluator (default: jet)")
    p.add_argument("--K", type=int, help="jet truncation (default: FRACSYM_TRUNCATION or 12)")
    _series_flags(p)
    _common(p)
    p.set_defaults(func=cmd_prolong)

    p = sub.add_parser("check-symmetry", help="Lie condition of a field on a certified solution")
    p.add_argument("--equation", required=True, help="equation JSON file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--generator", choices=("v1", "v2", "v3", "v3_printed"), help="diffusion generator id")
    g.add_argument("--field", help="field JSON (inline or a path)")
    p.add_argument("--sample", help="'builtin' or an expression solving the equation")
    p.add_argument("--box", help="sample box, e.g. 't=0.1:2,x=0:2'")
    p.add_argument("--points", type=int, default=32, help="probe points (default: 32)")
    p.add_argument("--seed", type=int, default=0, help="probe sequence seed (default: 0)")
    p.add_argument("--tol", type=float, default=1e-6, help="pass threshold on max residual (default: 1e-6)")
    p.add_argument("--mode", choices=("auto", "jet", "section"), default="auto", help="fractional prolongation evaluator (default: auto)")
    p.add_argument("--max-terms", type=int, default=SeriesControl().max_terms, help="series term budget (default: 40)")
    p.add_argument("--small-run", type=int, default=SeriesControl().small_run, help="consecutive small terms (default: 3)")
    p.add_argument("--series-tol", type=float, default=SeriesControl().tol, help="relative series tail tolerance (default: 1e-10)")
    _common(p)
    p.set_defaults(func=cmd_check_symmetry)

    p = sub.add_parser("reduce", help="invariants and reduced equation for a generator")
    p.add_argument("--equation", required=True, help="equation JSON file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--generator", choices=("v1", "v2", "v3"), help="diffusion generator id")
    g.add_argument("--field", help="scaling field JSON (inline or a path)")
    p.add_argument("--at", help="point for the transversality rank (default: all ones)")
    p.add_argument("--points", type=int, default=8, help="verification probes (default: 8)")
    p.add_argument("--seed", type=int, default=0, help="probe sequence seed (default: 0)")
    _common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("ek", help="generalized Erdelyi-Kober operator")
    p.add_argument("--expr", required=True, help="integrand f")
    p.add_argument("--mu", type=float, required=True, help="exponent mu > -1")
    p.add_argument("--alpha", default="", help="scaled variables and exponents, e.g. 'z=0.5'")
    p.add_argument("--at", default="", help="values of the variables, e.g. 'z=1'")
    p.add_argument("--identity", type=float, nargs=3, metavar=("P", "T", "X"), help="also check the RL scaling identity for f(x t^-alpha)")
    _common(p, nodes=128)
    p.set_defaults(func=cmd_ek)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ParseError as err:
        print(f"parse error: {err.diagnostic()}", file=sys.stderr)
        return EXIT_PARSE
    except CertificationError as err:
        print(f"certification failed: {err}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (StrictFailure, SeriesDivergenceError, TruncationError) as err:
        print(f"not converged: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (DomainError, TerminalError) as err:
        print(f"domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    except (PreconditionError, KeyError) as err:
        print(f"precondition failed: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    except EvaluationError as err:
        print(f"domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILED
    return code


if __name__ == "__main__":
    sys.exit(main())
