"""Lie-condition checks, finite flows and reduction ranks for fractional PDEs.

An :class:`Equation` is a residual expression over the axes, the jet
coordinates of ``u`` and RL operator slots ``RL[p, axis](u)`` (or
``RL[p1, x1, p2, x2](u)`` for a mixed operator).  The Lie condition is tested
numerically on a known solution: every slot is treated as an independent
coordinate, each coordinate receives its prolongation coefficient, and the
prolonged field applied to the residual is evaluated at probe points.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from . import expr as ex
from .errors import CertificationError, PreconditionError, TerminalError
from .fracop import AxisSpec, FracSpec, SeriesControl, rl_section
from .jet import JetSpace, canon, default_truncation, jet_of
from .parse import parse
from .prolong import VectorField, classical_phi_sigma, general_phi_p

CERTIFY_TOL = 1e-8
CERTIFY_POINTS = 64
PROBE_MARGIN = 0.1


@dataclass(frozen=True)
class Axis:
    name: str
    terminal: float = 0.0
    order: object = None  # order of the operator on this axis, if any


@dataclass
class Equation:
    """Residual E(x, u, u^sigma, RL slots) = 0 with its axis table."""

    axes: tuple
    residual: object
    params: dict = field(default_factory=dict)
    dep: str = "u"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple(a if isinstance(a, Axis) else Axis(**a) for a in self.axes)
        if isinstance(self.residual, str):
            self.source = self.residual
            self.residual = parse(self.residual)
        else:
            self.source = ex.to_text(self.residual)
        if self.params:
            self.residual = ex.substitute(self.residual, {k: ex.as_expr(v) for k, v in self.params.items()})
        self.space = JetSpace(tuple(a.name for a in self.axes), self.dep)
        self._build_slots()

    @property
    def axis_names(self):
        return self.space.axes

    def terminal(self, name):
        for a in self.axes:
            if a.name == name:
                return a.terminal
        raise KeyError(name)

    def _slot_spec(self, s):
        if s.kind != "RL":
            raise PreconditionError(f"only RL slots can be prolonged, found {s.kind}")
        if s.arg != ex.Var(self.dep):
            raise PreconditionError(f"operator slots must act on {self.dep}, found {ex.to_text(s.arg)}")
        if len(s.params) % 2:
            raise PreconditionError("RL slot parameters come in (order, axis) pairs")
        triples = []
        for k in range(0, len(s.params), 2):
            order, axis = s.params[k], s.params[k + 1]
            if not isinstance(axis, ex.Var) or axis.name not in self.space.axes:
                raise PreconditionError(f"unknown operator axis {ex.to_text(axis)}")
            if order.free_vars:
                raise PreconditionError(f"operator order {ex.to_text(order)} is not a number (missing params?)")
            triples.append((axis.name, ex.evaluate(order), self.terminal(axis.name)))
        return FracSpec.of(*triples)

    def _build_slots(self):
        slots = ex.slots_of(self.residual)
        self.slots = []
        mapping = {}
        for j, s in enumerate(slots, start=1):
            name = f"RL_{j}"
            self.slots.append((name, s, self._slot_spec(s)))
            mapping[s] = ex.Var(name)
        self.symbolic = ex.rebuild(self.residual, lambda n: mapping.get(n) if isinstance(n, ex.Slot) else None)
        self.jet_order = max(self.space.order_of(self.symbolic), 0)

    def fractional_axes(self):
        out = []
        for _, _, spec in self.slots:
            for a in spec.axes:
                if not a.is_identity and a.name not in out:
                    out.append(a.name)
        return out

    def evolution(self, time="t"):
        """(c, rest) with E = c*u_t + rest and rest free of u_t, or None."""
        if time not in self.space.axes:
            return None
        ut = self.space.coord((self.space.axis_index(time),))
        e = self.symbolic
        c = ex.differentiate(e, ut)
        if c.free_vars or ex.is_zero(c):
            return None
        rest = ex.sub(e, ex.mul(c, ex.Var(ut)))
        if ut in rest.free_vars:
            return None
        return c, rest, ut

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        axes = [Axis(a["name"], float(a.get("a", 0.0)), a.get("p")) for a in data["axes"]]
        meta = {k: v for k, v in data.items() if k not in ("axes", "residual", "params")}
        return cls(tuple(axes), data["residual"], dict(data.get("params", {})), data.get("dep", "u"), meta)

    def to_json(self):
        out = {
            "axes": [{"name": a.name, "a": a.terminal, "p": a.order} for a in self.axes],
            "residual": ex.to_text(self.residual),
            "params": {},
        }
        out.update(self.meta)
        return out

    # -- evaluation on a sample ----------------------------------------------

    def slot_values(self, f, point, nodes=64):
        return {name: rl_section(f, spec, point, nodes) for name, _, spec in self.slots}

    def residual_at(self, f, point, nodes=64):
        """E evaluated on the section u = f at a point."""
        jet = jet_of(f, point, max(self.jet_order, 1), axes=self.space.axes, dep=self.dep)
        env = jet.bindings()
        env.update(self.slot_values(f, point, nodes))
        return ex.evaluate(self.symbolic, env)


@dataclass
class SolutionSample:
    """A closed-form solution u = expr on a box of the axes."""

    expr: object
    box: dict
    name: str = ""
    note: str = ""

    def __post_init__(self):
        self.expr = ex.as_expr(self.expr)
        self.box = {k: (float(v[0]), float(v[1])) for k, v in self.box.items()}


def probe_points(box, n, seed=0, terminals=None, margin=PROBE_MARGIN, axes=None):
    """n points from a scrambled Halton sequence over the box.

    Coordinates on axes listed in ``terminals`` stay at least ``margin`` above
    their terminal.
    """
    axes = tuple(axes) if axes is not None else tuple(box)
    lo, hi = [], []
    for a in axes:
        l, h = box[a]
        if terminals and a in terminals:
            l = max(l, terminals[a] + margin)
        if not h > l:
            raise PreconditionError(f"empty probe range on axis {a!r}")
        lo.append(l)
        hi.append(h)
    sampler = qmc.Halton(d=len(axes), scramble=True, seed=seed)
    pts = qmc.scale(sampler.random(n), lo, hi)
    return [dict(zip(axes, (float(v) for v in row))) for row in pts]


def _terminals(eq):
    return {a: eq.terminal(a) for a in eq.fractional_axes()}


def certify(eq, sample, n=CERTIFY_POINTS, tol=CERTIFY_TOL, seed=0, nodes=64):
    """Max |E| of the sample over n probe points; raises CertificationError above tol."""
    pts = probe_points(sample.box, n, seed, _terminals(eq), axes=eq.axis_names)
    worst = 0.0
    for pt in pts:
        worst = max(worst, abs(eq.residual_at(sample.expr, pt, nodes)))
    if not worst <= tol:
        raise CertificationError(f"sample {sample.name or ex.to_text(sample.expr)} has residual {worst:.3e} > {tol:.1e}")
    return worst


def check_terminal_constraint(v, eq, points=()):
    """xi^i must vanish on x_i = a_i for every fractional axis i."""
    for axis in eq.fractional_axes():
        xi = v.xi_of(axis)
        on_terminal = ex.substitute(xi, {axis: ex.const(Fraction(eq.terminal(axis)).limit_denominator(10**9))})
        if ex.is_zero(on_terminal):
            continue
        if not on_terminal.free_vars:
            raise TerminalError(f"xi^{axis} = {ex.to_text(xi)} does not vanish at {axis} = {eq.terminal(axis)}")
        for pt in points:
            env = dict(pt)
            env[axis] = eq.terminal(axis)
            env.setdefault(v.dep, 1.0)
            if abs(ex.evaluate(on_terminal, env)) > 1e-12:
                raise TerminalError(f"xi^{axis} does not vanish at {axis} = {eq.terminal(axis)}")


def _eq_jet(eq, f, point, extra):
    return jet_of(f, point, eq.jet_order + extra, axes=eq.axis_names, dep=eq.dep)


def lie_residual(eq, v, sample, points, ctl=None, mode="auto", time="t", nodes=64, K=None):
    """pr v[E] on the sample at each point, restricted to E = 0.

    Slots are independent coordinates receiving the general fractional
    prolongation coefficient.  ``mode="jet"`` evaluates it from jet data
    alone, truncated at ``K`` (default: :func:`default_truncation`); the
    default uses the sample itself for the fractional terms.  For an evolution equation c*u_t + rest = 0 the
    value of u_t in the jet is replaced by -rest/c evaluated on the sample,
    so the restriction to the solution manifold is exact.
    """
    if v.axes != eq.axis_names:
        raise PreconditionError(f"field axes {v.axes} do not match equation axes {eq.axis_names}")
    check_terminal_constraint(v, eq, points)
    E = eq.symbolic
    sp = eq.space
    coords = {}
    for name in E.free_vars:
        sigma = sp.sigma_of(name)
        if sigma is not None:
            coords[name] = sigma
    dE = {name: ex.differentiate(E, name) for name in E.free_vars}
    classical = {name: classical_phi_sigma(v, sigma) for name, sigma in coords.items() if sigma}
    evo = eq.evolution(time)
    if mode == "jet":
        extra = max((K or default_truncation()) - eq.jet_order, 1)
    else:
        extra = 1
    out = []
    for pt in points:
        jet = _eq_jet(eq, sample.expr, pt, extra)
        env = jet.bindings()
        env.update(eq.slot_values(sample.expr, pt, nodes))
        if evo is not None:
            c, rest, ut = evo
            env[ut] = -ex.evaluate(rest, env) / ex.evaluate(c, env)
        total = 0.0
        for axis, xi in zip(v.axes, v.xi):
            if axis in dE:
                total += ex.evaluate(xi, env) * ex.evaluate(dE[axis], env)
        if v.dep in dE:
            total += ex.evaluate(v.phi, env) * ex.evaluate(dE[v.dep], env)
        for name, coef in classical.items():
            total += ex.evaluate(coef, env) * ex.evaluate(dE[name], env)
        for name, _, spec in eq.slots:
            if name in dE:
                total += general_phi_p(v, spec, jet, ctl, mode, nodes) * ex.evaluate(dE[name], env)
        out.append(total)
    return out


# -- finite flows -------------------------------------------------------------


@dataclass(frozen=True)
class AffineFlow:
    """Field with xi^i = a_i + b_i x_i and phi = c u + d (constants)."""

    a: tuple
    b: tuple
    c: float
    d: float

    @staticmethod
    def _move(x, a, b, eps):
        if b == 0:
            return ex.add(x, ex.const(a * eps))
        g = math.exp(b * eps)
        return ex.add(ex.mul(ex.const(g), x), ex.const(a / b * (g - 1)))

    @staticmethod
    def _move_value(x, a, b, eps):
        if b == 0:
            return x + a * eps
        g = math.exp(b * eps)
        return g * x + a / b * (g - 1)


def _constant(e, what):
    if e.free_vars:
        raise PreconditionError(f"{what} = {ex.to_text(e)} is not constant; field not in the closed-form flow catalog")
    return ex.evaluate(e)


def affine_flow(v):
    a, b = [], []
    for axis, xi in zip(v.axes, v.xi):
        if not xi.free_vars <= {axis}:
            raise PreconditionError(f"xi^{axis} depends on other variables; field not in the catalog")
        b_i = _constant(ex.differentiate(xi, axis), f"d xi^{axis}/d{axis}")
        a_i = _constant(ex.substitute(xi, {axis: 0}), f"xi^{axis}(0)")
        a.append(a_i)
        b.append(b_i)
    phi = v.phi
    if not phi.free_vars <= {v.dep}:
        raise PreconditionError("phi depends on the base variables; field not in the catalog")
    c = _constant(ex.differentiate(phi, v.dep), "d phi/du")
    d = _constant(ex.substitute(phi, {v.dep: 0}), "phi(0)")
    return AffineFlow(tuple(a), tuple(b), c, d)


def apply_flow(v, eps, sample, terminals=None):
    """Image of a solution under exp(eps v) for translations and scalings.

    ``terminals`` maps fractional axes to their terminals; the flow must fix
    each of them.
    """
    flow = affine_flow(v)
    for axis, t in (terminals or {}).items():
        i = v.axes.index(axis)
        if abs(flow.a[i] + flow.b[i] * t) > 1e-14:
            raise TerminalError(f"flow moves the terminal {axis} = {t} (xi^{axis}({t}) != 0)")
    back = {}
    box = {}
    for i, axis in enumerate(v.axes):
        back[axis] = AffineFlow._move(ex.Var(axis), flow.a[i], flow.b[i], -eps)
        if axis in sample.box:
            lo, hi = sample.box[axis]
            lo2, hi2 = (AffineFlow._move_value(w, flow.a[i], flow.b[i], eps) for w in (lo, hi))
            box[axis] = (min(lo2, hi2), max(lo2, hi2))
    moved = ex.substitute(sample.expr, back)
    new = AffineFlow._move(moved, flow.d, flow.c, eps)
    return SolutionSample(new, box, f"exp({eps}*v){sample.name}", sample.note)


# -- reduction ----------------------------------------------------------------


def transversality_rank(fields, at, rtol=1e-10):
    """(rank of the xi block, rank of [xi | phi]) at a point."""
    if not fields:
        return 0, 0
    env = dict(at)
    rows_xi, rows_all = [], []
    for v in fields:
        xi = [ex.evaluate(c, env) for c in v.xi]
        rows_xi.append(xi)
        rows_all.append(xi + [ex.evaluate(v.phi, env)])

    def rank(m):
        m = np.asarray(m, dtype=float)
        s = np.linalg.svd(m, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > rtol * s[0]))

    return rank(rows_xi), rank(rows_all)


@dataclass(frozen=True)
class Invariants:
    invariants: tuple
    reference: object
    vertical: bool
    exponents: dict

    def texts(self):
        return [ex.to_text(z) for z in self.invariants]


def _exact(value):
    fr = Fraction(value).limit_denominator(10**6)
    return ex.Const(fr) if abs(float(fr) - value) <= 1e-15 * max(1.0, abs(value)) else ex.Const(float(value))


def _scaling_coefficients(v):
    coeffs = {}
    for axis, xi in zip(v.axes, v.xi):
        c = ex.differentiate(xi, axis)
        if c.free_vars or not ex.is_zero(ex.sub(xi, ex.mul(c, ex.Var(axis)))):
            raise PreconditionError(f"xi^{axis} = {ex.to_text(xi)} is not a diagonal scaling")
        coeffs[axis] = c
    cu = ex.differentiate(v.phi, v.dep)
    if cu.free_vars or not ex.is_zero(ex.sub(v.phi, ex.mul(cu, ex.Var(v.dep)))):
        raise PreconditionError(f"phi = {ex.to_text(v.phi)} is not a diagonal scaling")
    coeffs[v.dep] = cu
    return coeffs


def invariants_of_scaling(v, time="t"):
    """Monomial invariants of c_t t d/dt + sum c_i x_i d/dx_i + c_u u d/du.

    The reference variable is ``time`` when it scales, else the first axis
    that does; every other variable w yields w * ref^(-c_w/c_ref).  A purely
    vertical field has the base variables as invariants and is flagged.
    """
    coeffs = _scaling_coefficients(v)
    order = list(v.axes)
    if time in order:
        order.remove(time)
        order.insert(0, time)
    ref = next((a for a in order if not ex.is_zero(coeffs[a])), None)
    if ref is None:
        vertical = not ex.is_zero(coeffs[v.dep])
        return Invariants(tuple(ex.Var(a) for a in v.axes), None, vertical, {})
    out, exps = [], {}
    for w in list(v.axes) + [v.dep]:
        if w == ref:
            continue
        e = ex.neg(ex.div(coeffs[w], coeffs[ref]))
        if not e.free_vars:
            e = _exact(ex.evaluate(e)) if not isinstance(e, ex.Const) else e
        exps[w] = e
        out.append(ex.mul(ex.Var(w), ex.power(ex.Var(ref), e)))
    invs = tuple(out)
    for z in invs:
        if not ex.is_zero(v.apply(z)):
            residue = v.apply(z)
            probe = {n: 1.3 for n in residue.free_vars}
            if abs(ex.evaluate(residue, probe)) > 1e-12:
                raise AssertionError(f"{ex.to_text(z)} is not invariant")
    return Invariants(invs, ref, False, exps)
