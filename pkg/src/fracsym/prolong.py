"""Prolongation of point vector fields to classical and fractional jet coordinates.

A field ``v = sum_i xi^i(x, u) d/dx_i + phi(x, u) d/du`` acts on u^sigma by
the classical coefficient phi^sigma and on RL^p u by the general fractional
coefficient

    phi^p = Dfrac^p (phi - sum_i xi^i u_{x_i}) + sum_i xi^i d/dx_i RL^p u,

where Dfrac^p is the fractional total derivative of :mod:`fracsym.jet`.
The one- and two-axis corollaries and the Osler split of Dfrac^p phi are
provided as independent evaluators of the same quantity.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import PreconditionError, TruncationError
from .fracop import AxisSpec, FracSpec, SeriesControl, _TailRule, as_spec, rl_section, rl_series
from .jet import (
    JetPoint,
    JetSpace,
    canon,
    extend,
    frac_total_derivative,
    indices_upto,
    total_derivative,
    total_derivative_multi,
)
from .special import gen_binomial, recip_gamma


@dataclass(frozen=True)
class VectorField:
    """Coefficients (xi^1..xi^N, phi) of a point vector field on (x, u) space."""

    axes: tuple
    xi: tuple
    phi: object
    dep: str = "u"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "xi", tuple(ex.as_expr(c) for c in self.xi))
        object.__setattr__(self, "phi", ex.as_expr(self.phi))
        if len(self.xi) != len(self.axes):
            raise ValueError("one xi coefficient per axis is required")
        allowed = set(self.axes) | {self.dep}
        for c in self.xi + (self.phi,):
            if not c.free_vars <= allowed:
                extra = sorted(c.free_vars - allowed)
                raise ValueError(f"coefficients may only depend on {sorted(allowed)}, found {extra}")

    @classmethod
    def of(cls, axes, xi=None, phi=0, dep="u", name=""):
        """Build from a dict or list of xi coefficients (strings are parsed)."""
        axes = tuple(axes)
        if xi is None:
            xi = {}
        if isinstance(xi, dict):
            unknown = set(xi) - set(axes)
            if unknown:
                raise ValueError(f"xi given for unknown axes {sorted(unknown)}")
            xi = [xi.get(a, 0) for a in axes]
        return cls(axes, tuple(xi), phi, dep, name)

    @property
    def space(self):
        return JetSpace(self.axes, self.dep)

    def xi_of(self, axis):
        return self.xi[self.axes.index(axis)]

    def scaled(self, c):
        k = ex.as_expr(c)
        return VectorField(self.axes, tuple(ex.mul(k, x) for x in self.xi), ex.mul(k, self.phi), self.dep)

    def __add__(self, other):
        if other.axes != self.axes or other.dep != self.dep:
            raise ValueError("fields live on different spaces")
        xi = tuple(ex.add(a, b) for a, b in zip(self.xi, other.xi))
        return VectorField(self.axes, xi, ex.add(self.phi, other.phi), self.dep)

    def characteristic(self):
        """Q = phi - sum_i xi^i u_{x_i}."""
        sp = self.space
        return ex.sub(self.phi, ex.add(*(ex.mul(x, sp.var((i,))) for i, x in enumerate(self.xi))))

    def apply(self, f):
        """v(f) for a function f of (x, u)."""
        f = ex.as_expr(f)
        parts = [ex.mul(x, ex.differentiate(f, a)) for a, x in zip(self.axes, self.xi)]
        parts.append(ex.mul(self.phi, ex.differentiate(f, self.dep)))
        return ex.add(*parts)

    def text(self):
        terms = []
        for a, x in zip(self.axes, self.xi):
            if not ex.is_zero(x):
                terms.append(f"({ex.to_text(x)})*d/d{a}")
        if not ex.is_zero(self.phi):
            terms.append(f"({ex.to_text(self.phi)})*d/d{self.dep}")
        return " + ".join(terms) if terms else "0"

    def to_json(self):
        return {
            "axes": list(self.axes),
            "xi": {a: ex.to_text(x) for a, x in zip(self.axes, self.xi)},
            "phi": ex.to_text(self.phi),
            "name": self.name,
        }

    @classmethod
    def from_json(cls, data, dep="u"):
        return cls.of(data["axes"], dict(data.get("xi", {})), data.get("phi", "0"), data.get("dep", dep), data.get("name", ""))


# -- classical prolongation ---------------------------------------------------


def classical_phi_sigma(v, sigma, K=None):
    """phi^sigma = D^sigma Q + sum_i xi^i u^{sigma+i} as a jet expression.

    ``sigma`` is a multi-index of axis positions or axis names.
    """
    sp = v.space
    sigma = canon(sp.axis_index(s) if isinstance(s, str) else s for s in sigma)
    if not sigma:
        raise ValueError("classical prolongation needs |sigma| >= 1")
    if K is not None and len(sigma) + 1 > K:
        raise TruncationError(f"phi^sigma needs jet order {len(sigma) + 1} > K={K}")
    out = total_derivative_multi(v.characteristic(), sigma, sp)
    extra = [ex.mul(x, sp.var(extend(sigma, i))) for i, x in enumerate(v.xi)]
    return ex.add(out, *extra)


# -- general fractional prolongation -----------------------------------------


def _d_coefficient(p, a, x, k):
    # d/dx of binom(p,k) (x-a)^{k-p} / Gamma(k-p+1)
    c = gen_binomial(p, k)
    if c == 0.0:
        return 0.0
    g = recip_gamma(k - p)
    if g == 0.0:
        return 0.0
    return c * (x - a) ** (k - p - 1) * g


def _spec_for(spec, space):
    spec = as_spec(spec)
    for a in spec.axes:
        if a.name not in space.axes:
            raise ValueError(f"operator axis {a.name!r} is not an axis of the jet")
    return spec


def d_rl_u(spec, at, axis, ctl=None):
    """d/dx_i of the series for RL^p u, differentiated term by term on jet data."""
    spec = _spec_for(spec, at.space)
    sp = at.space
    i = sp.axis_index(axis)
    moved = frac_total_derivative(sp.var((i,)), spec, at, ctl).value
    if axis in spec.names and not spec.axis(axis).is_identity:
        own = frac_total_derivative(sp.var(()), spec, at, ctl, coefficients={axis: _d_coefficient}).value
        return own + moved
    return moved


def compose(g, section, space):
    """Substitute the section's derivatives for the jet coordinates in g."""
    g = ex.as_expr(g)
    mapping = {}
    for name in g.free_vars:
        sigma = space.sigma_of(name)
        if sigma is not None:
            mapping[name] = ex.diff(section, *(space.axes[i] for i in sigma))
    return ex.substitute(g, mapping)


def _with_order(spec, axis, delta):
    if axis in spec.names:
        return spec.shifted(axis, delta)
    return FracSpec(spec.axes + (AxisSpec(axis, float(delta), 0.0),))


def general_phi_p(v, spec, at, ctl=None, mode="jet", nodes=64):
    """General fractional prolongation coefficient phi^p evaluated at a jet point.

    ``mode="jet"`` uses only jet data: the fractional total derivative of the
    characteristic plus the term-by-term x_i-derivative of the series for
    RL^p u.  ``mode="section"`` evaluates the same formula on the section
    carried by the jet point (exact power-sum or quadrature RL values), which
    is what slowly convergent series need.  ``mode="auto"`` picks section
    mode when a section is available.
    """
    spec = _spec_for(spec, at.space)
    if mode == "auto":
        mode = "section" if at.section is not None else "jet"
    if mode == "section":
        return _general_section(v, spec, at, nodes)
    if mode != "jet":
        raise ValueError(f"unknown mode {mode!r}")
    env = at.bindings()
    value = frac_total_derivative(v.characteristic(), spec, at, ctl).value
    for axis, xi in zip(v.axes, v.xi):
        if ex.is_zero(xi):
            continue
        value += ex.evaluate(xi, env) * d_rl_u(spec, at, axis, ctl)
    return value


def _general_section(v, spec, at, nodes):
    if at.section is None:
        raise PreconditionError("section mode needs a jet point built from a section")
    sp = at.space
    f = at.section
    point = at.point()
    env = dict(point)
    env[sp.dep] = at.value(())
    q = compose(v.characteristic(), f, sp)
    value = rl_section(q, spec, point, nodes)
    for axis, xi in zip(v.axes, v.xi):
        if ex.is_zero(xi):
            continue
        value += ex.evaluate(xi, env) * rl_section(f, _with_order(spec, axis, 1.0), point, nodes)
    return value


# -- one-axis corollary -------------------------------------------------------


def _single_axis(at, p, a, axis=None):
    axis = axis or at.space.axes[0]
    return FracSpec.single(axis, p, a)


def rl_u(at, p, a=0.0, axis=None, ctl=None):
    """RL^p u on jet data (the series evaluated on the jet)."""
    return frac_total_derivative(at.space.var(()), _single_axis(at, p, a, axis), at, ctl).value


def corollary_phi_p_1d(v, p, a, at, ctl=None):
    """phi^p = Dfrac^p phi - sum_{n>=0} binom(p, n+1) D^{n+1} xi RL^{p-n} u.

    Agrees with :func:`general_phi_p` only for fields obeying the terminal
    constraint xi(a, u) = 0; a translation along the axis does not.
    """
    if len(v.axes) != 1:
        raise PreconditionError("the one-axis corollary needs N = 1")
    ctl = ctl or SeriesControl()
    sp = at.space
    axis = sp.axes[0]
    env = at.bindings()
    value = frac_total_derivative(v.phi, _single_axis(at, p, a), at, ctl).value
    xi = v.xi[0]
    rule = _TailRule(ctl, 0)
    dxi = xi
    total = 0.0
    for n in range(at.K):
        dxi = total_derivative(dxi, 0, sp)
        c = gen_binomial(p, n + 1)
        term = 0.0
        if c != 0.0 and not ex.is_zero(dxi):
            term = c * ex.evaluate(dxi, env) * rl_u(at, p - n, a, axis, ctl)
        total += term
        if ex.is_zero(dxi) or c == 0.0 and float(p).is_integer():
            break
        if rule.push(n, term, total):
            break
        if sp.order_of(dxi) >= at.K:
            break
    return value - total


# -- Osler decomposition ------------------------------------------------------


def _taylor(at, axis_index, K):
    """Taylor coefficients u^{(k)}/k! along one axis."""
    sigma = ()
    out = []
    for k in range(K + 1):
        out.append(at.value(sigma) / math.factorial(k))
        sigma = sigma + (axis_index,)
    return np.array(out)


def _power_derivatives(at, axis_index, K, jmax):
    """d^m/dx^m (u^j) at the jet for m <= K, j <= jmax, via Taylor products."""
    c = _taylor(at, axis_index, K)
    table = np.zeros((jmax + 1, K + 1))
    acc = np.zeros(K + 1)
    acc[0] = 1.0
    for j in range(jmax + 1):
        table[j] = acc * np.array([math.factorial(m) for m in range(K + 1)], dtype=float)
        acc = np.convolve(acc, c)[: K + 1]
    return table


def _frozen_rl(h, spec, at, ctl):
    """RL of h(x, u) with u held at its jet value (partial operator only)."""
    env = at.point()
    env[at.space.dep] = at.value(())
    return rl_series(h, spec, env, ctl).value


def mu_p(phi, p, at, ctl=None, axis=None):
    """The nonlinear remainder mu^p of the Osler split (terminal 0)."""
    ctl = ctl or SeriesControl()
    sp = at.space
    axis = axis or sp.axes[0]
    i = sp.axis_index(axis)
    x = at.base[i]
    u0 = at.value(())
    dep = sp.dep
    K = at.K
    powd = _power_derivatives(at, i, K, K)
    env = at.point()
    env[dep] = u0
    partial = {}

    def dphi(nx, nu):
        key = (nx, nu)
        if key not in partial:
            e = ex.differentiate(phi, dep, nu) if nu else phi
            if nx:
                e = ex.differentiate(e, axis, nx)
            partial[key] = ex.evaluate(e, env)
        return partial[key]

    rule = _TailRule(ctl, 2)
    total = 0.0
    for n in range(2, K + 1):
        cn = gen_binomial(p, n) * x ** (n - p) * recip_gamma(n + 1 - p)
        inner = 0.0
        if cn != 0.0:
            for m in range(2, n + 1):
                cm = math.comb(n, m)
                for k in range(2, m + 1):
                    d = dphi(n - m, k)
                    if d == 0.0:
                        continue
                    s = 0.0
                    for r in range(k):
                        s += math.comb(k, r) * (-u0) ** r * powd[k - r, m]
                    inner += cm * s * d / math.factorial(k)
        term = cn * inner
        total += term
        if rule.push(n, term, total):
            break
    return float(total)


@dataclass(frozen=True)
class OslerSplit:
    frozen: float
    minus_u_rl_phi_u: float
    linear: float
    mu: float

    @property
    def total(self):
        return self.frozen + self.minus_u_rl_phi_u + self.linear + self.mu

    def to_json(self):
        return {
            "pure_x": self.frozen,
            "minus_u_rl_phi_u": self.minus_u_rl_phi_u,
            "linear_in_u": self.linear,
            "mu": self.mu,
            "total": self.total,
        }


def osler_expand_phi(phi, p, at, ctl=None, axis=None):
    """Split Dfrac^p phi(x, u) into the four groups of the Osler expansion.

    Terminal 0 and p > 0 are assumed.  ``frozen`` is the RL operator of phi
    with u held fixed, ``linear`` collects d_u phi RL^p u and the sums over
    RL^{p-k} u, and ``mu`` is the nonlinear remainder.
    """
    if p <= 0:
        raise PreconditionError("the Osler split is stated for p > 0")
    ctl = ctl or SeriesControl()
    phi = ex.as_expr(phi)
    sp = at.space
    axis = axis or sp.axes[0]
    dep = sp.dep
    spec = FracSpec.single(axis, p, 0.0)
    env = at.point()
    env[dep] = at.value(())
    phi_u = ex.differentiate(phi, dep)
    frozen = _frozen_rl(phi, spec, at, ctl)
    second = -at.value(()) * _frozen_rl(phi_u, spec, at, ctl)
    linear = ex.evaluate(phi_u, env) * rl_u(at, p, 0.0, axis, ctl)
    rule = _TailRule(ctl, 1)
    acc = 0.0
    d = phi_u
    for k in range(1, at.K + 1):
        d = ex.differentiate(d, axis)
        c = gen_binomial(p, k)
        term = 0.0
        if c != 0.0 and not ex.is_zero(d):
            term = c * ex.evaluate(d, env) * rl_u(at, p - k, 0.0, axis, ctl)
        acc += term
        if ex.is_zero(d) or rule.push(k, term, acc):
            break
    mu = mu_p(phi, p, at, ctl, axis)
    return OslerSplit(frozen, second, linear + acc, mu)


# -- two-axis corollary -------------------------------------------------------


def corollary_phi_p_2d(v, p, at, ctl=None, x_axis=None, t_axis=None):
    """phi^{0,p}: the coefficient for RL^p acting on the time axis of an (x, t) field.

    ``v`` has xi for the space axis, tau for the time axis, and phi.  The
    time terminal is 0.
    """
    if len(v.axes) != 2:
        raise PreconditionError("the two-axis corollary needs N = 2")
    if p <= 0:
        raise PreconditionError("the two-axis corollary is stated for p > 0")
    ctl = ctl or SeriesControl()
    sp = at.space
    x_axis = x_axis or sp.axes[0]
    t_axis = t_axis or sp.axes[1]
    ix, it = sp.axis_index(x_axis), sp.axis_index(t_axis)
    xi, tau, phi = v.xi[v.axes.index(x_axis)], v.xi[v.axes.index(t_axis)], v.phi
    dep = sp.dep
    env = at.bindings()
    u0 = at.value(())
    spec = FracSpec.single(t_axis, p, 0.0)
    phi_u = ex.differentiate(phi, dep)
    dtau = total_derivative(tau, it, sp)

    def rl_t(q, g=None):
        g = sp.var(()) if g is None else g
        return frac_total_derivative(g, FracSpec.single(t_axis, q, 0.0), at, ctl).value

    value = _frozen_rl(phi, spec, at, ctl)
    value += rl_t(p) * (ex.evaluate(phi_u, env) - p * ex.evaluate(dtau, env))
    value -= u0 * _frozen_rl(phi_u, spec, at, ctl)

    rule = _TailRule(ctl, 1)
    acc = 0.0
    d_phi_u = phi_u
    d_tau = dtau
    d_xi = xi
    for n in range(1, at.K):
        d_phi_u = ex.differentiate(d_phi_u, t_axis)
        d_tau = total_derivative(d_tau, it, sp)
        d_xi = total_derivative(d_xi, it, sp)
        a1 = gen_binomial(p, n) * ex.evaluate(d_phi_u, env)
        a2 = gen_binomial(p, n + 1) * ex.evaluate(d_tau, env)
        a3 = gen_binomial(p, n) * ex.evaluate(d_xi, env)
        term = 0.0
        if a1 - a2 != 0.0:
            term += (a1 - a2) * rl_t(p - n)
        if a3 != 0.0:
            term -= a3 * rl_t(p - n, sp.var((ix,)))
        acc += term
        if rule.push(n, term, acc):
            break
        if max(sp.order_of(d_tau), sp.order_of(d_xi)) >= at.K - 1:
            break
    value += acc
    value += mu_p(phi, p, at, ctl, t_axis)
    return value


# -- packaged coefficients ----------------------------------------------------


@dataclass(frozen=True)
class ProlongedCoefficient:
    """A prolongation coefficient tagged by what it acts on."""

    tag: tuple
    field: VectorField
    symbolic: object = None

    def evaluate(self, at, ctl=None, mode="jet"):
        if self.tag[0] == "classical":
            return at.evaluate(self.symbolic)
        return general_phi_p(self.field, self.tag[1], at, ctl, mode)


def prolonged(v, target):
    """ProlongedCoefficient for a multi-index (classical) or a FracSpec (fractional)."""
    if isinstance(target, (FracSpec, AxisSpec)):
        return ProlongedCoefficient(("fractional", as_spec(target)), v)
    sigma = tuple(target)
    return ProlongedCoefficient(("classical", sigma), v, classical_phi_sigma(v, sigma))
