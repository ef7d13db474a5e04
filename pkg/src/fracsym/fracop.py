"""Riemann-Liouville operators of one and several variables.

Three evaluators are provided:

* :func:`rl_series` -- the expansion of the operator into classical
  derivatives with Gamma-weighted coefficients, truncated by a tail rule;
* :func:`rl_quadrature` / :func:`rl_mixed` -- Gauss-Jacobi quadrature of the
  defining integral (for positive orders after moving the outer derivatives
  onto the integrand, see :func:`rl_quadrature`);
* :func:`rl_power_sum` -- exact evaluation for finite sums of (possibly
  fractional) powers of the operator variables, via the power rule.

:func:`rl_section` picks the exact evaluator when it applies and falls back
to quadrature otherwise.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from . import expr as ex
from .errors import (
    DomainError,
    EvaluationError,
    PreconditionError,
    SeriesDivergenceError,
    TerminalError,
)
from .special import bracket, gen_binomial, is_integer, recip_gamma

DEFAULT_NODES = 64


@dataclass(frozen=True)
class AxisSpec:
    name: str
    order: float
    terminal: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.order):
            raise ValueError(f"order on axis {self.name!r} must be finite")

    @property
    def is_identity(self):
        return is_integer(self.order) and round(self.order) == 0


@dataclass(frozen=True)
class FracSpec:
    """Orders and lower terminals of a (possibly mixed) RL operator."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(a if isinstance(a, AxisSpec) else AxisSpec(*a) for a in self.axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ValueError(f"axis names must be distinct: {names}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def single(cls, name, order, terminal=0.0):
        return cls((AxisSpec(name, float(order), float(terminal)),))

    @classmethod
    def of(cls, *triples):
        return cls(tuple(AxisSpec(n, float(p), float(a)) for n, p, a in triples))

    def __len__(self):
        return len(self.axes)

    def __iter__(self):
        return iter(self.axes)

    def axis(self, name):
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def names(self):
        return tuple(a.name for a in self.axes)

    def shifted(self, name, delta):
        """Same spec with the order on ``name`` moved by ``delta``."""
        return FracSpec(tuple(AxisSpec(a.name, a.order + delta, a.terminal) if a.name == name else a for a in self.axes))

    def reordered(self, names):
        return FracSpec(tuple(self.axis(n) for n in names))


def as_spec(spec):
    if isinstance(spec, FracSpec):
        return spec
    if isinstance(spec, AxisSpec):
        return FracSpec((spec,))
    return FracSpec(tuple(spec))


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the derivative series.

    Summation stops once ``small_run`` consecutive terms are below
    ``tol`` times the running sum, or after ``max_terms`` terms per axis.
    """

    max_terms: int = 40
    tol: float = 1e-10
    small_run: int = 3

    def __post_init__(self):
        if self.max_terms < 1 or self.tol <= 0 or self.small_run < 1:
            raise ValueError(f"invalid series control {self}")


@dataclass(frozen=True)
class SeriesResult:
    value: float
    tail: float
    converged: bool
    terms: int
    heuristic: bool = False

    def __float__(self):
        return self.value


def series_coefficient(p, a, x, k):
    """Weight of the k-th classical derivative in the series for RL^p_a at x."""
    c = gen_binomial(p, k)
    if c == 0.0:
        return 0.0
    g = recip_gamma(k - p + 1)
    if g == 0.0:
        return 0.0
    return c * (x - a) ** (k - p) * g


def _check_terminal(name, x, a):
    if not x > a:
        raise TerminalError(f"point {name}={x} is not above the terminal {a}")


class _TailRule:
    """Running tail test shared by the series evaluators."""

    def __init__(self, ctl, start):
        self.ctl = ctl
        self.start = start
        self.small = 0
        self.growing = 0
        self.prev = None
        self.recent = []
        self.done = False

    def push(self, k, term, total):
        mag = abs(term)
        self.recent = (self.recent + [mag])[-self.ctl.small_run:]
        if k >= self.start:
            if mag <= self.ctl.tol * abs(total):
                self.small += 1
            else:
                self.small = 0
            if k > 10 and self.prev is not None and mag > self.prev > 0:
                self.growing += 1
            else:
                self.growing = 0
            if self.growing >= self.ctl.small_run:
                raise SeriesDivergenceError(f"series not convergent at this point (terms growing at k={k})")
            self.done = self.small >= self.ctl.small_run
        self.prev = mag
        return self.done

    @property
    def tail(self):
        return max(self.recent) if self.recent else 0.0


def _series(f, axes, env, ctl):
    """Nested series over ``axes``; returns (value, tail, converged, terms)."""
    if not axes:
        return ex.evaluate(f, env), 0.0, True, 1
    axis, rest = axes[0], axes[1:]
    if axis.is_identity:
        return _series(f, rest, env, ctl)
    p, a = axis.order, axis.terminal
    x = env[axis.name]
    _check_terminal(axis.name, x, a)
    rule = _TailRule(ctl, max(0, bracket(p) + 1))
    total, tail, converged, count = 0.0, 0.0, False, 0
    inner_ok = True
    deriv = f
    for k in range(ctl.max_terms):
        c = series_coefficient(p, a, x, k)
        term = 0.0
        if c != 0.0 and not ex.is_zero(deriv):
            value, inner_tail, ok, n = _series(deriv, rest, env, ctl)
            inner_ok = inner_ok and ok
            tail = max(tail, abs(c) * inner_tail)
            count += n
            term = c * value
        total += term
        if ex.is_zero(deriv) and k >= rule.start:
            converged = True
            rule.recent = [0.0]
            break
        if rule.push(k, term, total):
            converged = True
            break
        deriv = ex.differentiate(deriv, axis.name)
    return total, max(tail, rule.tail), converged and inner_ok, count


def rl_series(f, spec, at, ctl=None):
    """RL operator of ``f`` at ``at`` by the truncated derivative series.

    Raises TerminalError if a coordinate is not above its terminal and
    SeriesDivergenceError if the terms keep growing.  A result that hit the
    term budget before meeting the tail rule is returned with
    ``converged=False``.  Series with negative orders are flagged
    ``heuristic``; quadrature is authoritative there.
    """
    spec = as_spec(spec)
    ctl = ctl or SeriesControl()
    f = ex.as_expr(f)
    value, tail, converged, terms = _series(f, spec.axes, dict(at), ctl)
    heuristic = any(a.order < 0 and not a.is_identity for a in spec.axes)
    return SeriesResult(value, tail, converged, terms, heuristic)


# -- quadrature ---------------------------------------------------------------


@lru_cache(maxsize=256)
def _jacobi_rule(n, alpha, beta=0.0):
    s, w = roots_jacobi(n, alpha, beta)
    return s, w


def _values_at(f, axis_name, taus, rest, env, nodes):
    """f with ``axis_name`` set to each of ``taus``, remaining axes applied."""
    if not rest:
        bindings = dict(env)
        bindings[axis_name] = taus
        return ex.evaluate_array(f, bindings) * np.ones_like(taus)
    out = np.empty_like(taus)
    for j, tau in enumerate(taus):
        sub = dict(env)
        sub[axis_name] = float(tau)
        out[j] = _nested(f, rest, sub, nodes)
    return out


def _boundary_value(g, name, a, h, rest, env, nodes):
    """g at the terminal, or its one-sided limit when g is not defined there.

    Functions such as exp(-1/sqrt(t)) extend continuously to the terminal but
    cannot be evaluated on it; the limit is read off at two nearby points and
    accepted only when they agree.
    """
    sub = dict(env)
    sub[name] = a
    try:
        return _nested(g, rest, sub, nodes)
    except DomainError:
        pass
    vals = []
    for eps in (1e-12, 1e-10):
        sub[name] = a + eps * h
        try:
            vals.append(_nested(g, rest, sub, nodes))
        except DomainError:
            vals.append(math.nan)
    v1, v2 = vals
    if not (math.isfinite(v1) and math.isfinite(v2)) or abs(v1 - v2) > 1e-8 * max(1.0, abs(v1)):
        raise DomainError(f"f is singular at the terminal {name}={a}; its boundary value has no limit")
    return v1


def _nested(f, axes, env, nodes):
    if not axes:
        return ex.evaluate(f, env)
    axis, rest = axes[0], axes[1:]
    p, a, name = axis.order, axis.terminal, axis.name
    if is_integer(p) and round(p) >= 0:
        k = int(round(p))
        g = ex.differentiate(f, name, k) if k else f
        return _nested(g, rest, env, nodes)
    x = env[name]
    _check_terminal(name, x, a)
    h = x - a
    if p < 0:
        s, w = _jacobi_rule(nodes, -p - 1.0)
        taus = a + 0.5 * h * (1.0 + s)
        vals = _values_at(f, name, taus, rest, env, nodes)
        return recip_gamma(-p) * (0.5 * h) ** (-p) * float(np.dot(w, vals))
    n = bracket(p)
    boundary = 0.0
    g = f
    for j in range(n + 1):
        boundary += _boundary_value(g, name, a, h, rest, env, nodes) * h ** (j - p) * recip_gamma(j - p + 1)
        g = ex.differentiate(g, name)
    s, w = _jacobi_rule(nodes, n - p)
    taus = a + 0.5 * h * (1.0 + s)
    vals = _values_at(g, name, taus, rest, env, nodes)
    integral = (0.5 * h) ** (n - p + 1) * float(np.dot(w, vals))
    return boundary + recip_gamma(n + 1 - p) * integral


def rl_quadrature(f, spec, at, nodes=DEFAULT_NODES):
    """Single-axis RL operator by Gauss-Jacobi quadrature.

    Negative orders integrate the defining integral directly.  Positive
    orders use the equivalent form

        sum_{j<=n} f^(j)(a) (x-a)^(j-p) / Gamma(j-p+1)
            + 1/Gamma(n+1-p) * int_a^x (x-t)^(n-p) f^(n+1)(t) dt,   n = floor(p),

    whose derivatives are exact symbolic ones, so ``f`` must be analytic on
    ``[a, x]``.
    """
    spec = as_spec(spec)
    if len(spec) != 1:
        raise PreconditionError("rl_quadrature takes a single axis; use rl_mixed for several")
    axis = spec.axes[0]
    if is_integer(axis.order) and round(axis.order) >= 0:
        raise PreconditionError(f"order {axis.order} is a nonnegative integer; differentiate instead")
    return _nested(ex.as_expr(f), spec.axes, dict(at), nodes)


def rl_mixed(f, spec, at, nodes=DEFAULT_NODES, order=None):
    """Mixed RL operator by applying the single-axis quadrature axis by axis.

    ``order`` lists axis names from outermost to innermost application;
    for analytic ``f`` the result does not depend on it.
    """
    spec = as_spec(spec)
    if order is not None:
        spec = spec.reordered(order)
    return _nested(ex.as_expr(f), spec.axes, dict(at), nodes)


# -- exact power sums ---------------------------------------------------------


class NotPowerSum(EvaluationError):
    pass


def _ps_key(exps):
    return tuple(round(e, 12) for e in exps)


def _ps_mul(a, b):
    out = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = _ps_key(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, 0.0) + ca * cb
    return out


def _ps_add(a, b):
    out = dict(a)
    for k, c in b.items():
        out[k] = out.get(k, 0.0) + c
    return out


def power_sum(f, names, env):
    """Write ``f`` as a finite sum of monomials prod_i names[i]^e_i.

    Variables outside ``names`` are taken from ``env``.  Returns a dict from
    exponent tuples to coefficients; raises NotPowerSum when ``f`` is not of
    that form.
    """
    names = tuple(names)
    zero = (0.0,) * len(names)
    memo = {}

    def scalar(node):
        return {zero: ex.evaluate(node, env)}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key][1]
        if not (n.free_vars & set(names)):
            r = scalar(n)
        elif isinstance(n, ex.Var):
            i = names.index(n.name)
            r = {tuple(1.0 if j == i else 0.0 for j in range(len(names))): 1.0}
        elif isinstance(n, ex.Add):
            r = {}
            for t in n.terms:
                r = _ps_add(r, go(t))
        elif isinstance(n, ex.Mul):
            r = {zero: 1.0}
            for f_ in n.factors:
                r = _ps_mul(r, go(f_))
        elif isinstance(n, ex.Pow):
            if n.exp.free_vars & set(names):
                raise NotPowerSum("exponent depends on an operator variable")
            q = ex.evaluate(n.exp, env)
            base = {k: c for k, c in go(n.base).items() if c != 0.0}
            if len(base) == 1:
                (k, c), = base.items()
                if c < 0 and not float(q).is_integer():
                    raise NotPowerSum("negative coefficient raised to a fractional power")
                r = {_ps_key(e * q for e in k): c ** q}
            elif float(q).is_integer() and 0 <= q <= 24:
                r = {zero: 1.0}
                for _ in range(int(q)):
                    r = _ps_mul(r, base)
            else:
                raise NotPowerSum("non-monomial base with a non-integer power")
        else:
            raise NotPowerSum(f"{type(n).__name__} node is not a power sum")
        memo[key] = (n, r)
        return r

    return go(ex.as_expr(f))


def rl_power_sum(f, spec, at):
    """Exact RL operator of a finite power sum via the power rule.

    Applies only to terminals at 0 and exponents above -1 on every fractional
    axis; raises NotPowerSum otherwise.
    """
    spec = as_spec(spec)
    active = [a for a in spec.axes if not a.is_identity]
    for a in active:
        if a.terminal != 0.0:
            raise NotPowerSum("power rule only implemented for terminal 0")
        _check_terminal(a.name, at[a.name], a.terminal)
    names = [a.name for a in active]
    ps = power_sum(f, names, at)
    total = 0.0
    for exps, c in ps.items():
        if c == 0.0:
            continue
        term = c
        for a, e in zip(active, exps):
            p = a.order
            if e <= -1.0 and not (is_integer(p) and p >= 0):
                raise NotPowerSum(f"exponent {e} is not integrable at the terminal")
            # Gamma(e+1)/Gamma(e-p+1) as a ratio of reciprocals keeps integer
            # e with e - p + 1 <= 0 exactly zero
            rg = recip_gamma(e - p + 1)
            if rg == 0.0:
                term = 0.0
                break
            term *= rg / recip_gamma(e + 1) * at[a.name] ** (e - p)
        total += term
    return total


def rl_section(f, spec, at, nodes=DEFAULT_NODES):
    """RL operator of a closed-form section: exact when possible, else quadrature."""
    spec = as_spec(spec)
    f = ex.as_expr(f)
    # integer orders are plain derivatives; taking them first leaves the
    # power rule only the fractional axes to handle
    fractional = []
    for a in spec.axes:
        if is_integer(a.order) and round(a.order) >= 0:
            if a.order:
                f = ex.differentiate(f, a.name, int(round(a.order)))
        else:
            fractional.append(a)
    spec = FracSpec(tuple(fractional))
    try:
        return rl_power_sum(f, spec, at)
    except (NotPowerSum, DomainError):
        pass
    if all(a.is_identity for a in spec.axes):
        return ex.evaluate(f, at)
    return _nested(ex.as_expr(f), spec.axes, dict(at), nodes)
