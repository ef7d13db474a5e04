"""The anomalous-diffusion equation u_t = sum_i alpha_i u^beta_i RL^{p_i}_{0,x_i} u.

Everything the symmetry analysis of this equation produces is executable
here: the equation itself, its three point symmetries, the determining
relations, exact solutions used as certified samples, the similarity
reductions and the generalized Erdelyi-Kober operator that appears when an
RL time derivative acts on a self-similar function.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_jacobi

from . import expr as ex
from .errors import DomainError, EvaluationError, PreconditionError
from .fracop import FracSpec, rl_quadrature, rl_section
from .prolong import VectorField
from .special import bracket, gamma, is_integer, recip_gamma
from .symmetry import (
    Axis,
    Equation,
    SolutionSample,
    certify,
    invariants_of_scaling,
    lie_residual,
    probe_points,
)

TIME = "t"


def _c(value):
    """Exact rational constant when the float is one, else a decimal."""
    value = float(value)
    fr = Fraction(value).limit_denominator(10**6)
    if abs(float(fr) - value) <= 1e-15 * max(1.0, abs(value)):
        return ex.Const(fr)
    return ex.Const(value)


@dataclass(frozen=True)
class DiffusionSpec:
    alpha: tuple
    beta: tuple
    p: tuple
    axes: tuple = None

    def __post_init__(self):
        alpha, beta, p = (tuple(float(v) for v in seq) for seq in (self.alpha, self.beta, self.p))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "p", p)
        n = len(p)
        if n < 1 or len(alpha) != n or len(beta) != n:
            raise ValueError("alpha, beta and p need one entry per space axis")
        for q in p:
            if not q > 0 or is_integer(q):
                raise ValueError(f"orders must be positive non-integers, got {q}")
        if any(a == 0 for a in alpha):
            raise ValueError("alpha_i must be nonzero")
        if any(b == 0 for b in beta) and not all(b == 0 for b in beta):
            raise ValueError("beta_i must be all nonzero, or all zero for the linear equation")
        axes = self.axes
        if axes is None:
            axes = ("x",) if n == 1 else tuple(f"x{i + 1}" for i in range(n))
        axes = tuple(axes)
        if len(axes) != n or TIME in axes:
            raise ValueError(f"need {n} space axis names distinct from {TIME!r}")
        object.__setattr__(self, "axes", axes)

    @property
    def N(self):
        return len(self.p)

    @property
    def linear(self):
        return all(b == 0 for b in self.beta)

    @property
    def all_axes(self):
        return (TIME,) + self.axes

    @classmethod
    def single(cls, alpha=1.0, beta=1.0, p=0.5):
        return cls((alpha,), (beta,), (p,))

    @classmethod
    def from_json(cls, data):
        return cls(tuple(data["alpha"]), tuple(data["beta"]), tuple(data["p"]), tuple(data["axes"]) if "axes" in data else None)

    def to_json(self):
        return {"alpha": list(self.alpha), "beta": list(self.beta), "p": list(self.p), "axes": list(self.axes)}


def build_equation(spec):
    """Equation u_t - sum_i alpha_i u^beta_i RL[p_i, x_i](u) with terminals 0."""
    u = ex.Var("u")
    terms = []
    for a, b, p, x in zip(spec.alpha, spec.beta, spec.p, spec.axes):
        slot = ex.slot("RL", [_c(p), ex.Var(x)], u)
        terms.append(ex.mul(_c(a), ex.power(u, _c(b)), slot))
    residual = ex.sub(ex.Var("u_t"), ex.add(*terms))
    axes = [Axis(TIME, 0.0, None)] + [Axis(x, 0.0, p) for x, p in zip(spec.axes, spec.p)]
    return Equation(tuple(axes), residual, {}, "u", {"family": "diffusion", "diffusion": spec.to_json()})


def equation_json(spec):
    """Equation file contents for the CLI."""
    terms = " - ".join(f"alpha{i + 1}*u^beta{i + 1}*RL[p{i + 1},{x}](u)" for i, x in enumerate(spec.axes))
    params = {}
    for i in range(spec.N):
        params[f"alpha{i + 1}"] = spec.alpha[i]
        params[f"beta{i + 1}"] = spec.beta[i]
        params[f"p{i + 1}"] = spec.p[i]
    return {
        "axes": [{"name": TIME, "a": 0.0, "p": None}] + [{"name": x, "a": 0.0, "p": p} for x, p in zip(spec.axes, spec.p)],
        "residual": f"u_t - {terms}",
        "params": params,
        "family": "diffusion",
        "diffusion": spec.to_json(),
    }


# -- generators ---------------------------------------------------------------


def _field(spec, xi, phi, name):
    return VectorField.of(spec.all_axes, xi, phi, name=name)


def generators(spec, gamma_solution=None):
    """Point symmetries of the equation.

    Nonlinear case: v1 = d/dt, v2 = t d/dt + sum x_i/p_i d/dx_i and
    v3 = u d/du + sum beta_i x_i/p_i d/dx_i.  For the linear equation (all
    beta_i = 0) v3 reduces to u d/du and, given a solution gamma, gamma d/du
    is added.
    """
    v1 = _field(spec, {TIME: 1}, 0, "v1")
    v2 = _field(spec, dict({TIME: ex.Var(TIME)}, **{x: ex.mul(_c(1 / p), ex.Var(x)) for x, p in zip(spec.axes, spec.p)}), 0, "v2")
    xi3 = {x: ex.mul(_c(b / p), ex.Var(x)) for x, b, p in zip(spec.axes, spec.beta, spec.p) if b != 0}
    v3 = _field(spec, xi3, ex.Var("u"), "v3")
    out = [v1, v2, v3]
    if spec.linear and gamma_solution is not None:
        out.append(_field(spec, {}, ex.as_expr(gamma_solution), "v_gamma"))
    return out


def printed_v3(spec):
    """v3 with the opposite sign on the x-components (kept as a negative control)."""
    xi3 = {x: ex.mul(_c(-b / p), ex.Var(x)) for x, b, p in zip(spec.axes, spec.beta, spec.p) if b != 0}
    return _field(spec, xi3, ex.Var("u"), "v3_printed")


def generator(spec, name):
    for v in generators(spec):
        if v.name == name:
            return v
    raise KeyError(f"unknown generator {name!r}; expected v1, v2 or v3")


# -- determining relations ----------------------------------------------------


@dataclass(frozen=True)
class Relation:
    name: str
    expr: object
    exact_zero: bool
    numeric: float

    @property
    def holds(self):
        return self.exact_zero or self.numeric <= 1e-12

    def to_json(self):
        return {"relation": self.name, "expr": ex.to_text(self.expr), "exact_zero": self.exact_zero, "max_abs": self.numeric, "holds": self.holds}


def check_determining_relations(spec, v, n_max=4, seed=0):
    """Evaluate the determining relations for n = 1..n_max.

    For each space axis x_i:
        (n+1)/(p_i-n) d^{n+1}phi/dx_i^n du - d^{n+1}xi^i/dx_i^{n+1} = 0,
        d^n tau/dx_i^n = 0 and d^n xi^j/dx_i^n = 0 for j != i.
    A relation whose tree is not literally zero is also sampled at random
    points so non-polynomial coefficients get a numeric verdict.
    """
    rng = np.random.default_rng(seed)
    names = list(spec.all_axes) + ["u"]
    pts = [dict(zip(names, rng.uniform(0.2, 2.0, len(names)))) for _ in range(8)]
    out = []

    def record(name, e):
        if ex.is_zero(e):
            out.append(Relation(name, e, True, 0.0))
            return
        worst = 0.0
        for pt in pts:
            try:
                worst = max(worst, abs(ex.evaluate(e, pt)))
            except EvaluationError:
                worst = math.inf
        out.append(Relation(name, e, False, worst))

    tau = v.xi_of(TIME)
    for i, (x, p) in enumerate(zip(spec.axes, spec.p)):
        xi_i = v.xi_of(x)
        for n in range(1, n_max + 1):
            mixed = ex.differentiate(v.phi, "u")
            mixed = ex.differentiate(mixed, x, n)
            e = ex.sub(ex.mul(_c((n + 1) / (p - n)), mixed), ex.differentiate(xi_i, x, n + 1))
            record(f"phi/xi^{x} relation, n={n}", e)
            record(f"d^{n} tau/d{x}^{n}", ex.differentiate(tau, x, n))
            for y in spec.axes:
                if y != x:
                    record(f"d^{n} xi^{y}/d{x}^{n}", ex.differentiate(v.xi_of(y), x, n))
    return out


VIOLATING_MONOMIALS = ("x^2 d/dx", "x d/dt", "x*u d/du", "x^3 d/dx", "x^2*u d/du")


def perturbed_fields(spec, base, count=5, seed=0, scale=0.1):
    """``base`` plus small multiples of monomials the relations forbid."""
    rng = np.random.default_rng(seed)
    x = ex.Var(spec.axes[0])
    u = ex.Var("u")
    monomials = [
        {"xi": {spec.axes[0]: ex.power(x, ex.Const(2))}},
        {"xi": {TIME: x}},
        {"phi": ex.mul(x, u)},
        {"xi": {spec.axes[0]: ex.power(x, ex.Const(3))}},
        {"phi": ex.mul(ex.power(x, ex.Const(2)), u)},
    ]
    out = []
    for k in range(count):
        m = monomials[k % len(monomials)]
        c = _c(round(scale * rng.uniform(0.5, 1.5), 6))
        extra = VectorField.of(spec.all_axes, {a: ex.mul(c, e) for a, e in m.get("xi", {}).items()}, ex.mul(c, m.get("phi", ex.ZERO)))
        f = base + extra
        out.append(VectorField(f.axes, f.xi, f.phi, f.dep, f"{base.name}+{ex.to_text(c)}*[{VIOLATING_MONOMIALS[k % 5]}]"))
    return out


# -- exact solutions ----------------------------------------------------------


def _lambda(p, beta):
    g = p / beta
    return gamma(g + 1) * recip_gamma(g - p + 1)


def separable_solution(spec, C=None, b=0.5, box=None):
    """Exact solution x^{p/beta} (C - alpha beta lambda t)^{-1/beta} (N = 1).

    For beta = 1 the term b*x^{p-1}, which the operator annihilates, is added
    to the profile.  C defaults to a value keeping the time factor positive
    on the box.
    """
    if spec.N != 1:
        raise PreconditionError("the separable family is built for one space axis")
    if spec.linear:
        raise PreconditionError("the separable family needs beta != 0")
    alpha, beta, p = spec.alpha[0], spec.beta[0], spec.p[0]
    x, t = ex.Var(spec.axes[0]), ex.Var(TIME)
    box = box or {TIME: (0.1, 2.0), spec.axes[0]: (0.0, 2.0)}
    rate = alpha * beta * _lambda(p, beta)
    if C is None:
        C = 1.0 + 2.0 * abs(rate) * box[TIME][1]
    profile = ex.power(x, _c(p / beta))
    if beta == 1.0 and b:
        profile = ex.add(profile, ex.mul(_c(b), ex.power(x, _c(p - 1))))
    time_factor = ex.power(ex.sub(_c(C), ex.mul(_c(rate), t)), _c(-1.0 / beta))
    return SolutionSample(ex.mul(profile, time_factor), box, "separable", f"C={C}, b={b if beta == 1.0 else 0}")


def linear_solution(spec, c=1.0, box=None):
    """u = c (sqrt(pi) + t x^{-1/2}) solves u_t = RL^{1/2} u (alpha = 1, p = 1/2)."""
    if not (spec.N == 1 and spec.linear and spec.p[0] == 0.5 and spec.alpha[0] == 1.0):
        raise PreconditionError("closed form only for u_t = RL^{1/2}_x u")
    x, t = ex.Var(spec.axes[0]), ex.Var(TIME)
    e = ex.mul(_c(c), ex.add(ex.sqrt(ex.NamedConst("pi")), ex.mul(t, ex.power(x, ex.Const(Fraction(-1, 2))))))
    return SolutionSample(e, box or {TIME: (0.1, 2.0), spec.axes[0]: (0.0, 2.0)}, "linear")


def builtin_sample(spec):
    if spec.linear:
        return linear_solution(spec)
    return separable_solution(spec)


# -- reports ------------------------------------------------------------------


def symmetry_report(spec, v, sample=None, n_points=32, seed=0, tol=1e-6, ctl=None, certify_sample=True):
    """Lie residuals of ``v`` on a certified sample, as a JSON-ready dict."""
    eq = build_equation(spec)
    sample = sample or builtin_sample(spec)
    cert = certify(eq, sample, seed=seed) if certify_sample else None
    terms = {a: 0.0 for a in spec.axes}
    pts = probe_points(sample.box, n_points, seed, terms, axes=eq.axis_names)
    res = lie_residual(eq, v, sample, pts, ctl)
    worst = max(abs(r) for r in res)
    return {
        "generator": v.name or v.text(),
        "field": v.to_json(),
        "sample": ex.to_text(sample.expr),
        "certification_residual": cert,
        "probe_points": pts,
        "residuals": res,
        "max_residual": worst,
        "truncation": "section",
        "tolerances": {"lie": tol, "certification": 1e-8},
        "pass": worst <= tol,
    }


# -- reductions ---------------------------------------------------------------


@dataclass
class ReducedProblem:
    generator: str
    variables: dict
    ansatz: str
    residual: object
    flags: list = field(default_factory=list)
    equation: object = None  # set when every slot is an RL slot

    def residual_text(self):
        return ex.to_text(self.residual) + " = 0"

    def slot_kinds(self):
        """Kinds of all operator slots, including ones nested inside others."""
        out = []
        todo = list(ex.slots_of(self.residual))
        while todo:
            s = todo.pop(0)
            out.append(s.kind)
            todo.extend(ex.slots_of(s.arg))
        return sorted(out)

    def to_json(self):
        return {
            "generator": self.generator,
            "variables": {k: ex.to_text(v) for k, v in self.variables.items()},
            "ansatz": self.ansatz,
            "reduced_residual": self.residual_text(),
            "flags": list(self.flags),
        }


def reduce_by_v1(spec):
    """Stationary reduction u = v(x_1..x_N): sum alpha_i v^beta_i RL^{p_i} v = 0."""
    v = ex.Var("v")
    terms = [ex.mul(_c(a), ex.power(v, _c(b)), ex.slot("RL", [_c(p), ex.Var(x)], v)) for a, b, p, x in zip(spec.alpha, spec.beta, spec.p, spec.axes)]
    axes = tuple(Axis(x, 0.0, p) for x, p in zip(spec.axes, spec.p))
    eq = Equation(axes, ex.add(*terms), {}, "v")
    return ReducedProblem("v1", {x: ex.Var(x) for x in spec.axes}, "u = v(" + ", ".join(spec.axes) + ")", eq.residual, [], eq)


def _z_names(spec):
    return ("z",) if spec.N == 1 else tuple(f"z{i + 1}" for i in range(spec.N))


def reduce_by_v2(spec):
    """Similarity reduction by v2 with invariants z_i = x_i t^{-1/p_i}.

    u = v(z) turns the equation into
        sum_i [ (1/p_i) z_i dv/dz_i + alpha_i v^beta_i RL^{p_i}_{0,z_i} v ] = 0.
    """
    zs = _z_names(spec)
    t = ex.Var(TIME)
    variables = {z: ex.mul(ex.Var(x), ex.power(t, _c(-1.0 / p))) for z, x, p in zip(zs, spec.axes, spec.p)}
    v = ex.Var("v")
    space_terms = []
    for z, a, b, p in zip(zs, spec.alpha, spec.beta, spec.p):
        vz = ex.Var(f"v_{z}")
        space_terms.append(ex.mul(_c(1 / p), ex.Var(z), vz))
        space_terms.append(ex.mul(_c(a), ex.power(v, _c(b)), ex.slot("RL", [_c(p), ex.Var(z)], v)))
    axes = tuple(Axis(z, 0.0, p) for z, p in zip(zs, spec.p))
    eq = Equation(axes, ex.add(*space_terms), {}, "v")
    inv = invariants_of_scaling(generator(spec, "v2"))
    flags = ["invariants z_i = x_i*t^(-1/p_i) (checked: v2(z_i) = 0)"]
    return ReducedProblem("v2", variables, "u = v(" + ", ".join(ex.to_text(e) for e in variables.values()) + ")", eq.residual, flags + [f"invariants of v2: {', '.join(inv.texts())}"], eq)


def similarity_solution_v2(spec, z0=1.0):
    """Power solution v = c z^{p/beta} of the v2-reduced problem (N = 1).

    c is found by root finding on the reduced residual at z = z0; the lift
    u(t, x) = v(x t^{-1/p}) is returned together with c.
    """
    if spec.N != 1 or spec.linear:
        raise PreconditionError("power similarity solution is built for N = 1 and beta != 0")
    reduced = reduce_by_v2(spec)
    eq = reduced.equation
    alpha, beta, p = spec.alpha[0], spec.beta[0], spec.p[0]
    z = ex.Var("z")
    shape = ex.power(z, _c(p / beta))

    def residual(c):
        return eq.residual_at(ex.mul(ex.Const(float(c)), shape), {"z": z0})

    # c^beta = -1/(alpha beta lambda) seeds the bracket
    c_pow = -1.0 / (alpha * beta * _lambda(p, beta))
    if c_pow < 0 and not (float(beta).is_integer() and int(beta) % 2 == 1):
        raise PreconditionError("c^beta would be negative; no real power solution for these parameters")
    c_guess = math.copysign(abs(c_pow) ** (1.0 / beta), c_pow)
    lo, hi = sorted((0.5 * c_guess, 1.5 * c_guess))
    c = brentq(residual, lo, hi, xtol=1e-15, rtol=1e-15)
    lift = ex.substitute(ex.mul(ex.Const(c), shape), {"z": reduced.variables["z"]})
    return c, lift, reduced


def reduce_by_v3(spec):
    """Reduction by v3 written in the printed form, with operator slots.

    Invariants v = x_1^{-p_1/beta_1} u and z_i = x_i x_1^{-beta_i p_1/(beta_1 p_i)}.
    The reduced residual keeps the Erdelyi-Kober slot EK[mu, exponents] and the
    Euler-type product slot EULER[c_0..c_[p], k] standing for
    prod_j (c_j - k z_2 d/dz_2).  Its literal factor 1/2 and the missing
    alpha_1 are reproduced and flagged, not corrected.
    """
    if spec.N < 2:
        raise PreconditionError("the v3 reduction needs at least two space axes")
    b1, p1 = spec.beta[0], spec.p[0]
    if b1 == 0:
        raise PreconditionError("the v3 reduction divides by beta_1")
    x1 = ex.Var(spec.axes[0])
    zs = ("t",) + tuple(f"z{i + 1}" for i in range(1, spec.N))
    variables = {"v": ex.mul(ex.power(x1, _c(-p1 / b1)), ex.Var("u"))}
    ratios = []
    for i in range(1, spec.N):
        r = spec.beta[i] * p1 / (b1 * spec.p[i])
        ratios.append(r)
        variables[zs[i]] = ex.mul(ex.Var(spec.axes[i]), ex.power(x1, _c(-r)))
    p = p1
    n = bracket(p)
    mu = n - p
    b2p2 = spec.beta[1] / spec.p[1]
    z2 = ex.Var(zs[1])
    v = ex.Var("v")
    inner = ex.mul(ex.power(z2, _c(-b2p2)), v)
    ek = ex.slot("EK", [_c(mu)] + [_c(r) for r in ratios], inner)
    euler = ex.slot("EULER", [_c(1 - p + j) for j in range(n + 1)] + [_c(0.5 * ratios[0])], ek)
    rhs = [ex.mul(ex.power(z2, _c(b2p2)), euler)]
    for i in range(1, spec.N):
        rhs.append(ex.mul(_c(spec.alpha[i]), ex.power(v, _c(spec.beta[i])), ex.slot("RL", [_c(spec.p[i]), ex.Var(zs[i])], v)))
    residual = ex.sub(ex.Var("v_t"), ex.add(*rhs))
    ansatz = f"u = {ex.to_text(ex.power(x1, _c(p1 / b1)))}*v({', '.join(zs)})"
    flags = [
        "factor 1/2 in the Euler product reproduced as printed; its origin is not derived",
        "alpha_1 does not appear in the printed reduced equation",
        f"[p] read as floor(p_1) = {n}",
    ]
    return ReducedProblem("v3", variables, ansatz, residual, flags)


# -- Erdelyi-Kober operator ----------------------------------------------------


def ek_operator(f, mu, alphas, at, nodes=64):
    """int_1^inf (w-1)^mu / Gamma(mu+1) f(z_i w^alpha_i) w^(-mu-2) dw.

    ``alphas`` maps the scaled variables of f to their exponents; other
    variables are read from ``at``.  With w = 1/s the integral becomes
    int_0^1 (1-s)^mu / Gamma(mu+1) f(z_i s^-alpha_i) ds, done by Gauss-Jacobi.
    Raises DomainError when the integrand grows too fast as s -> 0.
    """
    if not mu > -1:
        raise DomainError(f"mu = {mu} must exceed -1")
    f = ex.as_expr(f)
    alphas = dict(alphas)

    def integrand(s):
        s = np.asarray(s, dtype=float)
        env = dict(at)
        for name, a in alphas.items():
            env[name] = at[name] * s ** (-a)
        return ex.evaluate_array(f, env) * np.ones_like(s)

    if any(a != 0 for a in alphas.values()):
        probe = np.logspace(-3, -7, 5)
        try:
            vals = np.abs(integrand(probe))
        except DomainError:
            raise DomainError("integrand not finite near w = infinity") from None
        if np.any(vals > 0):
            logs = np.log(np.maximum(vals, 1e-300))
            slope = -np.polyfit(np.log(probe), logs, 1)[0]
            if slope >= 1.0 and vals[-1] > 1e-300:
                raise DomainError(f"integrand grows like w^{slope:.2f} at infinity; the operator does not converge")
    s, w = roots_jacobi(nodes, mu, 0.0)
    s = 0.5 * (s + 1.0)
    vals = integrand(s)
    return float(0.5 ** (mu + 1) * np.dot(w, vals) * recip_gamma(mu + 1))


def ek_scaling_identity(g, alpha, p, t, x, var="z", nodes=128):
    """Both sides of the RL time derivative of a self-similar function.

    For f(t) = g(x t^-alpha):
        RL^p_t f = t^-p prod_{j=0}^{[p]} (1 - p + j - alpha z d/dz) K^{[p]-p}[g](z),
    z = x t^-alpha, with K the operator above (exponent alpha).  Returns
    (quadrature value of the left side, right side).
    """
    g = ex.as_expr(g)
    w = ex.Var(var)
    n = bracket(p)
    h = g
    for j in range(n + 1):
        h = ex.sub(ex.mul(_c(1 - p + j), h), ex.mul(_c(alpha), w, ex.differentiate(h, var)))
    z = x * t ** (-alpha)
    rhs = t ** (-p) * ek_operator(h, n - p, {var: alpha}, {var: z}, nodes)
    f = ex.substitute(g, {var: ex.mul(_c(x), ex.power(ex.Var("t"), _c(-alpha)))})
    lhs = rl_quadrature(f, FracSpec.single("t", p), {"t": t}, nodes)
    return lhs, rhs
