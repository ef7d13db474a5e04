"""Immutable expression trees with exact symbolic differentiation.

Trees are always built through the smart constructors (:func:`add`,
:func:`mul`, :func:`power`, :func:`func`, ...), which keep them in a canonical
form: nested sums and products are flattened, numeric constants are folded,
like terms and like powers are collected, and commutative children are sorted
by a structural key.  Structural equality of canonical trees is therefore a
usable (if incomplete) equality test.

Negation is not a separate node: ``-e`` is the product ``(-1)*e``.
Integer and ratio literals are stored as :class:`fractions.Fraction`,
decimal literals as ``float``.
"""

import math
from fractions import Fraction

import numpy as np

from . import special
from .errors import DifferentiationError, DomainError, EvaluationError, UnboundVariableError

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt", "gamma", "erf")
NAMED_CONSTANTS = {"pi": math.pi}
# Operator slots: RL[order, axis](arg), EK[mu, alpha_1, ...](arg),
# EULER[shift, scale, axis](arg) == (shift - scale*axis*d/daxis) arg.
SLOT_KINDS = ("RL", "EK", "EULER")


def _num(value):
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value}")
        return value + 0.0  # folds -0.0 into 0.0
    if isinstance(value, np.integer):
        return Fraction(int(value))
    if isinstance(value, np.floating):
        return _num(float(value))
    raise TypeError(f"cannot make a constant from {value!r}")


class Expr:
    __slots__ = ("_hash", "_key", "_free")

    def _fields(self):
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return self._hash

    @property
    def free_vars(self):
        return self._free

    @property
    def sort_key(self):
        return self._key

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = _num(value)
        self._hash = hash(("Const", self.value))
        self._key = (0, float(self.value))
        self._free = frozenset()

    def _fields(self):
        return (self.value,)


class NamedConst(Expr):
    __slots__ = ("name",)

    def __init__(self, name):
        if name not in NAMED_CONSTANTS:
            raise ValueError(f"unknown named constant {name!r}")
        self.name = name
        self._hash = hash(("NamedConst", name))
        self._key = (1, name)
        self._free = frozenset()

    def _fields(self):
        return (self.name,)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name
        self._hash = hash(("Var", name))
        self._key = (2, name)
        self._free = frozenset((name,))

    def _fields(self):
        return (self.name,)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        self.base = base
        self.exp = exp
        self._hash = hash(("Pow", base, exp))
        self._key = (3, base._key, exp._key)
        self._free = base._free | exp._free

    def _fields(self):
        return (self.base, self.exp)


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        self.factors = tuple(factors)
        self._hash = hash(("Mul", self.factors))
        self._key = (4, tuple(f._key for f in self.factors))
        self._free = frozenset().union(*(f._free for f in self.factors))

    def _fields(self):
        return self.factors


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = tuple(terms)
        self._hash = hash(("Add", self.terms))
        self._key = (5, tuple(t._key for t in self.terms))
        self._free = frozenset().union(*(t._free for t in self.terms))

    def _fields(self):
        return self.terms


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg
        self._hash = hash(("Func", name, arg))
        self._key = (6, name, arg._key)
        self._free = arg._free

    def _fields(self):
        return (self.name, self.arg)


class Slot(Expr):
    """An operator applied to an expression, evaluated by an external resolver."""

    __slots__ = ("kind", "params", "arg")

    def __init__(self, kind, params, arg):
        if kind not in SLOT_KINDS:
            raise ValueError(f"unknown operator slot {kind!r}")
        self.kind = kind
        self.params = tuple(params)
        self.arg = arg
        self._hash = hash(("Slot", kind, self.params, arg))
        self._key = (7, kind, tuple(p._key for p in self.params), arg._key)
        self._free = arg._free.union(*(p._free for p in self.params))

    def _fields(self):
        return (self.kind, self.params, self.arg)


ZERO = Const(0)
ONE = Const(1)
MINUS_ONE = Const(-1)
HALF = Const(Fraction(1, 2))


def as_expr(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        from .parse import parse

        return parse(value)
    return Const(value)


def const(value):
    return Const(value)


def var(name):
    return Var(name)


def is_const(e, value=None):
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


def is_zero(e):
    return isinstance(e, Const) and e.value == 0


# -- canonical constructors -------------------------------------------------


def _split_coeff(term):
    if isinstance(term, Mul) and isinstance(term.factors[0], Const):
        rest = term.factors[1:]
        return term.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), term


def _scale(rest, k):
    if k == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Const(k),) + rest.factors)
    return Mul((Const(k), rest))


def add(*args):
    flat = []
    for a in args:
        a = as_expr(a)
        if isinstance(a, Add):
            flat.extend(a.terms)
        elif isinstance(a, Mul) and len(a.factors) == 2 and isinstance(a.factors[0], Const) and isinstance(a.factors[1], Add):
            # a numeric multiple of a sum is spread over the sum's terms
            k = a.factors[0]
            flat.extend(mul(k, t) for t in a.factors[1].terms)
        else:
            flat.append(a)
    c = Fraction(0)
    collected = {}
    for t in flat:
        if isinstance(t, Const):
            c = c + t.value
            continue
        k, rest = _split_coeff(t)
        collected[rest] = collected.get(rest, 0) + k
    out = [_scale(rest, k) for rest, k in collected.items() if k != 0]
    if c != 0:
        out.append(Const(c))
    if not out:
        return Const(c)
    if len(out) == 1:
        return out[0]
    out.sort(key=lambda e: e._key)
    return Add(out)


def mul(*args):
    flat = []
    for a in args:
        a = as_expr(a)
        if isinstance(a, Mul):
            flat.extend(a.factors)
        else:
            flat.append(a)
    coeff = Fraction(1)
    groups = {}
    for f in flat:
        if isinstance(f, Const):
            coeff = coeff * f.value
        elif isinstance(f, Pow):
            groups.setdefault(f.base, []).append(f.exp)
        else:
            groups.setdefault(f, []).append(ONE)
    if coeff == 0:
        return Const(coeff)
    factors = []
    regroup = False
    for base, exps in groups.items():
        p = power(base, add(*exps)) if len(exps) > 1 else power(base, exps[0])
        if isinstance(p, Const):
            coeff = coeff * p.value
        else:
            regroup = regroup or isinstance(p, Mul)
            factors.append(p)
    if regroup:
        return mul(Const(coeff), *factors)
    if coeff == 0:
        return Const(coeff)
    if not factors:
        return Const(coeff)
    factors.sort(key=lambda e: e._key)
    if coeff == 1:
        return factors[0] if len(factors) == 1 else Mul(factors)
    return Mul([Const(coeff)] + factors)


def _exact_root(q, n):
    """Exact n-th root of a positive Fraction, or None."""
    num = round(q.numerator ** (1.0 / n))
    den = round(q.denominator ** (1.0 / n))
    for a in (num - 1, num, num + 1):
        if a >= 0 and a ** n == q.numerator:
            for b in (den - 1, den, den + 1):
                if b > 0 and b ** n == q.denominator:
                    return Fraction(a, b)
    return None


def _fold_power(b, e):
    """Numeric b**e when it can be represented, else None."""
    if isinstance(b, Fraction) and isinstance(e, Fraction):
        if e.denominator == 1:
            if b == 0 and e < 0:
                return None
            return b ** int(e)
        if b > 0 and e.denominator <= 64:
            root = _exact_root(b, e.denominator)
            if root is not None:
                return root ** e.numerator
        return None
    bf, ef = float(b), float(e)
    if bf > 0:
        try:
            return bf ** ef
        except OverflowError:
            return None
    if bf == 0:
        return 0.0 if ef > 0 else None
    if float(ef).is_integer():
        return bf ** int(ef)
    return None


def _is_integer_value(v):
    return isinstance(v, Fraction) and v.denominator == 1


def power(base, exp):
    base, exp = as_expr(base), as_expr(exp)
    if isinstance(exp, Const):
        e = exp.value
        if e == 0:
            return ONE
        if e == 1:
            return base
        if isinstance(base, Const):
            folded = _fold_power(base.value, e)
            if folded is not None:
                return Const(folded)
            return Pow(base, exp)
        if _is_integer_value(e):
            if isinstance(base, Pow):
                return power(base.base, mul(base.exp, exp))
            if isinstance(base, Mul):
                return mul(*(power(f, exp) for f in base.factors))
    if isinstance(base, Const):
        if base.value == 1:
            return ONE
    return Pow(base, exp)


def neg(e):
    return mul(MINUS_ONE, e)


def sub(a, b):
    return add(a, neg(as_expr(b)))


def div(a, b):
    return mul(a, power(b, MINUS_ONE))


_FUNC_FOLDS = {
    ("exp", 0): 1,
    ("log", 1): 0,
    ("sin", 0): 0,
    ("cos", 0): 1,
    ("sqrt", 0): 0,
    ("sqrt", 1): 1,
    ("erf", 0): 0,
    ("gamma", 1): 1,
    ("gamma", 2): 1,
}


def func(name, arg):
    arg = as_expr(arg)
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Const) and isinstance(arg.value, Fraction):
        folded = _FUNC_FOLDS.get((name, arg.value))
        if folded is not None:
            return Const(folded)
    return Func(name, arg)


def slot(kind, params, arg):
    return Slot(kind, tuple(as_expr(p) for p in params), as_expr(arg))


def exp(a):
    return func("exp", a)


def log(a):
    return func("log", a)


def sin(a):
    return func("sin", a)


def cos(a):
    return func("cos", a)


def sqrt(a):
    return func("sqrt", a)


def gamma(a):
    return func("gamma", a)


def erf(a):
    return func("erf", a)


# -- traversal ---------------------------------------------------------------


def rebuild(e, leaf):
    """Bottom-up rebuild through the canonical constructors.

    ``leaf(node)`` may return a replacement for any node (checked before
    recursing); returning ``None`` keeps recursing.
    """
    memo = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key][1]
        r = leaf(n)
        if r is None:
            if isinstance(n, (Const, NamedConst, Var)):
                r = n
            elif isinstance(n, Add):
                r = add(*(go(t) for t in n.terms))
            elif isinstance(n, Mul):
                r = mul(*(go(f) for f in n.factors))
            elif isinstance(n, Pow):
                r = power(go(n.base), go(n.exp))
            elif isinstance(n, Func):
                r = func(n.name, go(n.arg))
            elif isinstance(n, Slot):
                r = Slot(n.kind, tuple(go(p) for p in n.params), go(n.arg))
            else:
                raise TypeError(f"not an expression node: {n!r}")
        memo[key] = (n, r)
        return r

    return go(e)


def substitute(e, mapping):
    """Replace variables by expressions (or numbers) given in ``mapping``."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    if not (e.free_vars & repl.keys()):
        return e
    return rebuild(e, lambda n: repl.get(n.name) if isinstance(n, Var) else (n if not (n.free_vars & repl.keys()) else None))


def slots_of(e):
    """All distinct operator slots in ``e`` (outermost first, no duplicates)."""
    found = []
    seen = set()

    def go(n):
        if isinstance(n, Slot):
            if n not in seen:
                seen.add(n)
                found.append(n)
            return
        for child in _children(n):
            go(child)

    go(e)
    return found


def _children(n):
    if isinstance(n, Add):
        return n.terms
    if isinstance(n, Mul):
        return n.factors
    if isinstance(n, Pow):
        return (n.base, n.exp)
    if isinstance(n, Func):
        return (n.arg,)
    if isinstance(n, Slot):
        return n.params + (n.arg,)
    return ()


def node_count(e):
    return 1 + sum(node_count(c) for c in _children(e))


# -- differentiation ---------------------------------------------------------

_DIFF_CACHE = {}
_DIFF_CACHE_LIMIT = 200_000


def _d(e, v):
    if v not in e._free:
        return ZERO
    key = (e, v)
    hit = _DIFF_CACHE.get(key)
    if hit is not None:
        return hit
    if isinstance(e, Var):
        r = ONE
    elif isinstance(e, Add):
        r = add(*(_d(t, v) for t in e.terms))
    elif isinstance(e, Mul):
        parts = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _d(f, v)
            if not is_zero(df):
                parts.append(mul(*fs[:i], df, *fs[i + 1:]))
        r = add(*parts)
    elif isinstance(e, Pow):
        b, x = e.base, e.exp
        if v not in x._free:
            r = mul(x, power(b, add(x, MINUS_ONE)), _d(b, v))
        else:
            r = mul(e, add(mul(_d(x, v), log(b)), mul(x, _d(b, v), power(b, MINUS_ONE))))
    elif isinstance(e, Func):
        a = e.arg
        da = _d(a, v)
        name = e.name
        if name == "exp":
            outer = e
        elif name == "log":
            outer = power(a, MINUS_ONE)
        elif name == "sin":
            outer = cos(a)
        elif name == "cos":
            outer = neg(sin(a))
        elif name == "sqrt":
            outer = mul(HALF, power(e, MINUS_ONE))
        elif name == "erf":
            outer = mul(Const(2), power(NamedConst("pi"), Const(Fraction(-1, 2))), exp(neg(power(a, Const(2)))))
        else:
            raise DifferentiationError("derivative of gamma with a non-constant argument needs digamma, which is not in the function set")
        r = mul(outer, da)
    elif isinstance(e, Slot):
        raise DifferentiationError(f"cannot differentiate operator slot {to_text(e)} with respect to {v!r}")
    else:
        raise TypeError(f"not an expression node: {e!r}")
    if len(_DIFF_CACHE) > _DIFF_CACHE_LIMIT:
        _DIFF_CACHE.clear()
    _DIFF_CACHE[key] = r
    return r


def differentiate(e, v, n=1):
    """Exact n-th partial derivative of ``e`` with respect to variable ``v``."""
    if n < 1 or int(n) != n:
        raise ValueError(f"derivative order must be a positive integer, got {n}")
    e = as_expr(e)
    name = v.name if isinstance(v, Var) else v
    for _ in range(int(n)):
        e = _d(e, name)
    return e


def diff(e, *spec):
    """``diff(e, 'x', 'x', 'y')`` differentiates successively."""
    for v in spec:
        e = differentiate(e, v)
    return e


# -- evaluation --------------------------------------------------------------


def _pow_scalar(b, e):
    if b == 0 and e < 0:
        raise DomainError("division by zero")
    if b < 0 and not float(e).is_integer():
        raise DomainError(f"negative base {b} with non-integer exponent {e}")
    try:
        return math.pow(b, e)
    except OverflowError:
        raise DomainError(f"overflow in {b}**{e}") from None


def _func_scalar(name, a):
    if name == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            raise DomainError(f"exp overflow at {a}") from None
    if name == "log":
        if a <= 0:
            raise DomainError(f"log of nonpositive value {a}")
        return math.log(a)
    if name == "sqrt":
        if a < 0:
            raise DomainError(f"sqrt of negative value {a}")
        return math.sqrt(a)
    if name == "sin":
        return math.sin(a)
    if name == "cos":
        return math.cos(a)
    if name == "erf":
        return math.erf(a)
    if name == "gamma":
        return special.gamma(a)
    raise ValueError(name)


def evaluate(e, bindings=None, slots=None):
    """Evaluate at a point.  ``slots(node, bindings)`` resolves operator slots."""
    env = dict(bindings or {})
    memo = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key][1]
        if isinstance(n, Const):
            r = float(n.value)
        elif isinstance(n, Var):
            try:
                r = float(env[n.name])
            except KeyError:
                raise UnboundVariableError(n.name) from None
        elif isinstance(n, NamedConst):
            r = NAMED_CONSTANTS[n.name]
        elif isinstance(n, Add):
            r = math.fsum(go(t) for t in n.terms)
        elif isinstance(n, Mul):
            r = 1.0
            for f in n.factors:
                r *= go(f)
        elif isinstance(n, Pow):
            r = _pow_scalar(go(n.base), go(n.exp))
        elif isinstance(n, Func):
            r = _func_scalar(n.name, go(n.arg))
        elif isinstance(n, Slot):
            if slots is None:
                raise EvaluationError(f"no resolver for operator slot {to_text(n)}")
            r = float(slots(n, env))
        else:
            raise TypeError(f"not an expression node: {n!r}")
        memo[key] = (n, r)
        return r

    return go(as_expr(e))


_NP_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}


def evaluate_array(e, bindings):
    """Vectorized evaluation over numpy arrays (broadcasting bindings).

    Domain problems surface as a DomainError if any entry of the result is
    not finite.
    """
    from scipy.special import erf as _erf

    env = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    memo = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key][1]
        if isinstance(n, Const):
            r = np.float64(n.value)
        elif isinstance(n, Var):
            try:
                r = env[n.name]
            except KeyError:
                raise UnboundVariableError(n.name) from None
        elif isinstance(n, NamedConst):
            r = np.float64(NAMED_CONSTANTS[n.name])
        elif isinstance(n, Add):
            r = go(n.terms[0])
            for t in n.terms[1:]:
                r = r + go(t)
        elif isinstance(n, Mul):
            r = go(n.factors[0])
            for f in n.factors[1:]:
                r = r * go(f)
        elif isinstance(n, Pow):
            r = np.power(go(n.base), go(n.exp))
        elif isinstance(n, Func):
            a = go(n.arg)
            if n.name == "erf":
                r = _erf(a)
            elif n.name == "gamma":
                r = special.gamma(a)
            else:
                r = _NP_FUNCS[n.name](a)
        elif isinstance(n, Slot):
            raise EvaluationError(f"operator slot {to_text(n)} in vectorized evaluation")
        else:
            raise TypeError(f"not an expression node: {n!r}")
        memo[key] = (n, r)
        return r

    with np.errstate(all="ignore"):
        out = go(as_expr(e))
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        raise DomainError("non-finite value in vectorized evaluation")
    return out


# -- printing ----------------------------------------------------------------

_ADD, _MUL, _POW, _ATOM = 1, 2, 3, 4


def _const_text(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator), (_ATOM if v >= 0 else _MUL)
        return f"{v.numerator}/{v.denominator}", _MUL
    return repr(float(v)), (_ATOM if v >= 0 else _MUL)


def _is_negative(term):
    if isinstance(term, Const):
        return term.value < 0
    if isinstance(term, Mul) and isinstance(term.factors[0], Const):
        return term.factors[0].value < 0
    return False


def _wrap(text, prec, need):
    return f"({text})" if prec < need else text


def _fmt(e):
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, (Var, NamedConst)):
        return e.name, _ATOM
    if isinstance(e, Func):
        return f"{e.name}({_fmt(e.arg)[0]})", _ATOM
    if isinstance(e, Slot):
        params = ", ".join(_fmt(p)[0] for p in e.params)
        return f"{e.kind}[{params}]({_fmt(e.arg)[0]})", _ATOM
    if isinstance(e, Pow):
        bt, bp = _fmt(e.base)
        et, ep = _fmt(e.exp)
        base = _wrap(bt, bp, _ATOM)
        plain_exp = ep == _ATOM and not (isinstance(e.exp, Const) and e.exp.value < 0)
        return f"{base}^{et if plain_exp else '(' + et + ')'}", _POW
    if isinstance(e, Mul):
        coeff = Fraction(1)
        fs = e.factors
        if isinstance(fs[0], Const):
            coeff, fs = fs[0].value, fs[1:]
        num, den = [], []
        for f in fs:
            if isinstance(f, Pow) and isinstance(f.exp, Const) and f.exp.value < 0 and not isinstance(f.base, Const):
                den.append(power(f.base, Const(-f.exp.value)))
            else:
                num.append(f)
        sign = "-" if coeff < 0 else ""
        mag = -coeff if coeff < 0 else coeff
        parts = []
        if mag != 1 or not num:
            parts.append(_const_text(mag)[0])
        parts.extend(_wrap(*_fmt(f), _MUL + 1) for f in num)
        text = sign + "*".join(parts)
        for d in den:
            text += "/" + _wrap(*_fmt(d), _POW)
        return text, _MUL
    if isinstance(e, Add):
        out = ""
        for i, t in enumerate(e.terms):
            if i == 0:
                out = _fmt(t)[0]
            elif _is_negative(t):
                out += " - " + _wrap(*_fmt(neg(t)), _MUL)
            else:
                out += " + " + _fmt(t)[0]
        return out, _ADD
    raise TypeError(f"not an expression node: {e!r}")


def to_text(e):
    """Source text that parses back to the same canonical tree."""
    return _fmt(as_expr(e))[0]
