"""Truncated jet coordinates, total derivatives and the fractional total derivative.

A jet coordinate u^sigma is named after its multi-index: ``u`` for the
empty index and ``u_`` followed by the axis names otherwise (``u_xxt``), or
joined by underscores when some axis name is longer than one character
(``u_x1_x1_x2``).  Multi-indices are sorted tuples of 0-based axis positions.
"""

import os
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

from . import expr as ex
from .errors import TerminalError, TruncationError
from .fracop import FracSpec, SeriesControl, SeriesResult, _TailRule, as_spec, series_coefficient
from .special import bracket, gen_binomial, recip_gamma

DEFAULT_TRUNCATION = 12


def default_truncation():
    """Jet truncation order, overridable through ``FRACSYM_TRUNCATION``."""
    raw = os.environ.get("FRACSYM_TRUNCATION")
    if raw is None or raw.strip() == "":
        return DEFAULT_TRUNCATION
    k = int(raw)
    if k < 1:
        raise ValueError(f"FRACSYM_TRUNCATION must be a positive integer, got {raw!r}")
    return k


# -- multi-indices ------------------------------------------------------------


def canon(sigma):
    return tuple(sorted(sigma))


def counts(sigma, n):
    """k_i(sigma) for i = 0..n-1."""
    out = [0] * n
    for i in sigma:
        out[i] += 1
    return tuple(out)


def from_counts(ks):
    return tuple(i for i, k in enumerate(ks) for _ in range(k))


def extend(sigma, i):
    return canon(sigma + (i,))


def indices_upto(n, K):
    """All canonical multi-indices over n axes with 0 <= |sigma| <= K, by order."""
    out = [()]
    for order in range(1, K + 1):
        out.extend(combinations_with_replacement(range(n), order))
    return out


# -- jet space ----------------------------------------------------------------


@dataclass(frozen=True)
class JetSpace:
    """Names of the independent variables and of the dependent variable."""

    axes: tuple
    dep: str = "u"

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if len(set(self.axes)) != len(self.axes):
            raise ValueError(f"axis names must be distinct: {self.axes}")

    @property
    def n(self):
        return len(self.axes)

    @property
    def compact(self):
        return all(len(a) == 1 for a in self.axes)

    def axis_index(self, name):
        return self.axes.index(name)

    def coord(self, sigma):
        """Variable name of u^sigma."""
        sigma = canon(sigma)
        if not sigma:
            return self.dep
        names = [self.axes[i] for i in sigma]
        if self.compact:
            return f"{self.dep}_{''.join(names)}"
        return f"{self.dep}_" + "_".join(names)

    def var(self, sigma):
        return ex.Var(self.coord(sigma))

    def sigma_of(self, name):
        """Multi-index of a coordinate name, or None if it is not one."""
        if name == self.dep:
            return ()
        prefix = self.dep + "_"
        if not name.startswith(prefix):
            return None
        rest = name[len(prefix):]
        parts = list(rest) if self.compact else rest.split("_")
        if not parts or any(p not in self.axes for p in parts):
            return None
        sigma = canon(self.axis_index(p) for p in parts)
        return sigma if self.coord(sigma) == name else None

    def order_of(self, e):
        """Highest jet order referenced by ``e`` (-1 if u does not appear)."""
        best = -1
        for name in ex.as_expr(e).free_vars:
            s = self.sigma_of(name)
            if s is not None:
                best = max(best, len(s))
        return best


# -- jet points ---------------------------------------------------------------


@dataclass(frozen=True)
class JetPoint:
    """Base point, truncated jet values and optionally the section they came from."""

    space: JetSpace
    base: tuple
    values: dict
    K: int
    section: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("truncation order must be at least 1")
        object.__setattr__(self, "base", tuple(float(b) for b in self.base))
        if len(self.base) != self.space.n:
            raise ValueError("one base value per axis is required")
        missing = [s for s in indices_upto(self.space.n, self.K) if s not in self.values]
        if missing:
            raise ValueError(f"jet is missing coordinates, e.g. {self.space.coord(missing[0])}")

    @property
    def axes(self):
        return self.space.axes

    def point(self):
        return dict(zip(self.space.axes, self.base))

    def value(self, sigma):
        sigma = canon(sigma)
        if len(sigma) > self.K:
            raise TruncationError(f"{self.space.coord(sigma)} exceeds the jet truncation K={self.K}")
        return self.values[sigma]

    def bindings(self):
        b = self.point()
        for sigma, v in self.values.items():
            b[self.space.coord(sigma)] = v
        return b

    def evaluate(self, g):
        g = ex.as_expr(g)
        order = self.space.order_of(g)
        if order > self.K:
            raise TruncationError(f"expression needs jet order {order} > K={self.K}")
        return ex.evaluate(g, self.bindings())

    def restrict(self, K):
        if K > self.K:
            raise TruncationError(f"cannot restrict a K={self.K} jet to order {K}")
        vals = {s: v for s, v in self.values.items() if len(s) <= K}
        return JetPoint(self.space, self.base, vals, K, self.section)

    def to_json(self):
        u = {}
        for sigma in sorted(self.values, key=lambda s: (len(s), s)):
            u[",".join(str(i + 1) for i in sigma)] = self.values[sigma]
        return {"x": list(self.base), "K": self.K, "u": u}

    @classmethod
    def from_json(cls, data, axes=None, dep="u"):
        base = data["x"]
        axes = tuple(axes) if axes is not None else tuple(f"x{i + 1}" for i in range(len(base)))
        values = {}
        for key, v in data["u"].items():
            sigma = canon(int(t) - 1 for t in key.split(",")) if key else ()
            if any(i < 0 or i >= len(axes) for i in sigma):
                raise ValueError(f"jet key {key!r} refers to a missing axis")
            values[sigma] = float(v)
        return cls(JetSpace(axes, dep), base, values, int(data["K"]))


def jet_of(f, at, K=None, axes=None, dep="u"):
    """Jet of the section u = f(x) at ``at`` up to order K."""
    f = ex.as_expr(f)
    K = default_truncation() if K is None else K
    axes = tuple(axes) if axes is not None else tuple(at)
    space = JetSpace(axes, dep)
    point = {a: float(at[a]) for a in axes}
    env = dict(at)
    derivs = {(): f}
    values = {}
    for sigma in indices_upto(space.n, K):
        if sigma:
            parent = derivs[sigma[:-1]]
            derivs[sigma] = ex.differentiate(parent, axes[sigma[-1]])
        values[sigma] = ex.evaluate(derivs[sigma], env)
    return JetPoint(space, tuple(point[a] for a in axes), values, K, f)


# -- total derivatives --------------------------------------------------------

_TOTAL_CACHE = {}


def total_derivative(g, axis, space, K=None):
    """D_i g = dg/dx_i + sum_sigma u^{sigma+i} dg/du^sigma.

    With ``K`` given, raises TruncationError when g already references a
    coordinate of order K (its derivative would leave the jet).
    """
    g = ex.as_expr(g)
    i = space.axis_index(axis) if isinstance(axis, str) else axis
    name = space.axes[i]
    key = (g, i, space)
    hit = _TOTAL_CACHE.get(key)
    if hit is None:
        parts = [ex.differentiate(g, name)]
        for v in sorted(g.free_vars):
            sigma = space.sigma_of(v)
            if sigma is None:
                continue
            dv = ex.differentiate(g, v)
            if not ex.is_zero(dv):
                parts.append(ex.mul(space.var(extend(sigma, i)), dv))
        hit = ex.add(*parts)
        if len(_TOTAL_CACHE) > 100_000:
            _TOTAL_CACHE.clear()
        _TOTAL_CACHE[key] = hit
    if K is not None and space.order_of(g) >= K:
        raise TruncationError(f"total derivative needs jet order {space.order_of(g) + 1} > K={K}")
    return hit


def total_derivative_multi(g, sigma, space, K=None):
    """D^sigma g for a multi-index sigma."""
    for i in sigma:
        g = total_derivative(g, i, space, K)
    return g


def frac_total_derivative(g, spec, at, ctl=None, strict=False, coefficients=None):
    """Fractional total derivative of a jet expression, evaluated on a jet point.

    Nested over the axes of ``spec`` with the tail rule of :func:`rl_series`,
    using total derivatives in place of partial ones.  Running out of jet
    orders ends the sum; the result is then flagged ``converged=False``
    (or TruncationError is raised with ``strict=True``).

    ``coefficients`` maps axis names to replacement weight functions
    ``(p, a, x, k) -> float``; the prolongation uses it for the x-derivative
    of the weights.
    """
    spec = as_spec(spec)
    ctl = ctl or SeriesControl()
    space = at.space
    env = at.bindings()
    g = ex.as_expr(g)

    def nest(h, axes):
        if not axes:
            return ex.evaluate(h, env), 0.0, True
        axis, rest = axes[0], axes[1:]
        if axis.is_identity:
            return nest(h, rest)
        p, a = axis.order, axis.terminal
        i = space.axis_index(axis.name)
        x = at.base[i]
        if not x > a:
            raise TerminalError(f"point {axis.name}={x} is not above the terminal {a}")
        coef = (coefficients or {}).get(axis.name, series_coefficient)
        rule = _TailRule(ctl, max(0, bracket(p) + 1))
        total, tail, ok = 0.0, 0.0, True
        converged = False
        cur = h
        for k in range(ctl.max_terms):
            c = coef(p, a, x, k)
            term = 0.0
            if c != 0.0 and not ex.is_zero(cur):
                v, t, inner_ok = nest(cur, rest)
                ok = ok and inner_ok
                tail = max(tail, abs(c) * t)
                term = c * v
            total += term
            if ex.is_zero(cur) and k >= rule.start:
                converged = True
                rule.recent = [0.0]
                break
            if rule.push(k, term, total):
                converged = True
                break
            if space.order_of(cur) >= at.K:
                if strict:
                    raise TruncationError(f"fractional total derivative needs more than K={at.K} jet orders")
                break
            cur = total_derivative(cur, i, space)
        return total, max(tail, rule.tail), converged and ok

    value, tail, converged = nest(g, spec.axes)
    heuristic = any(a.order < 0 and not a.is_identity for a in spec.axes)
    return SeriesResult(value, tail, converged, 0, heuristic)


# -- infinite-system expansion ------------------------------------------------


@dataclass(frozen=True)
class SystemRow:
    """One row of the chain: omega_k = d omega_{k-1}/dx and z_k = z_{k-1} - increment."""

    k: int
    omega: object
    increment: object

    def text(self):
        return f"omega_{self.k} = d(omega_{self.k - 1})/dx;  z_{self.k} = z_{self.k - 1} - ({ex.to_text(self.increment)})"


def expand_to_system(p, a, K, axis="x", dep="u"):
    """Rows k = 1..K of the chain turning the series into an infinite ODE system.

    z_0 - z_K is the series truncated after K terms; the remainder z_K is the
    tail that the truncation discards.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    space = JetSpace((axis,), dep)
    x = ex.Var(axis)
    rows = []
    for k in range(1, K + 1):
        omega_prev = space.var((0,) * (k - 1))
        c = gen_binomial(p, k - 1) * recip_gamma(k - p)
        if c == 0.0:
            inc = ex.ZERO
        else:
            inc = ex.mul(ex.Const(c), ex.power(ex.sub(x, ex.Const(a)), ex.Const(k - p - 1)), omega_prev)
        rows.append(SystemRow(k, space.var((0,) * k), inc))
    return rows


def system_partial_sum(rows, at):
    """z_0 - z_K on a jet point (the truncated series value)."""
    return sum(at.evaluate(r.increment) for r in rows)
