"""Scalar fields over named coordinates with exact differentiation.

The expression AST is the substrate for every symbolic object in the
toolkit: distribution coefficients, differential-form components, vector
fields, diffeomorphisms.  Trees are canonicalized at construction
(flattening, constant folding, like-term collection, stable operand
order) so that algebraically obvious cancellations collapse to the
literal zero field.  On top of the pure expression nodes there is one
opaque numeric leaf, `SplineLeaf`, which wraps an interpolant of sampled
data and knows its own exact derivatives; smoothing pipelines use it to
feed grid data through the same exterior-calculus code paths as closed
forms.

Evaluation is vectorized: an environment maps coordinate names to
scalars or numpy arrays.  The single deliberate evaluation convention is
that a product with a zero factor is zero even when another factor is
infinite, which makes terms like s*log(s) evaluate to 0 at s = 0.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import EvalDomainError, ParseError

__all__ = [
    "Field", "Const", "Coord", "Add", "Mul", "Pow", "Log", "Exp", "Sin",
    "Cos", "SplineLeaf", "add", "mul", "pow_", "neg", "sub", "div", "log",
    "exp", "sin", "cos", "const", "coord", "parse_field", "is_zero_field",
    "expand", "eval_fields", "ZERO", "ONE",
]

_EXPAND_CAP = 50_000


class Field:
    """Base class; operators build canonicalized nodes."""

    __slots__ = ("_key", "free_vars")

    def diff(self, var: str) -> "Field":
        raise NotImplementedError

    def evaluate(self, env):
        raise NotImplementedError

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, _as_field(other))

    def __radd__(self, other):
        return add(_as_field(other), self)

    def __sub__(self, other):
        return sub(self, _as_field(other))

    def __rsub__(self, other):
        return sub(_as_field(other), self)

    def __mul__(self, other):
        return mul(self, _as_field(other))

    def __rmul__(self, other):
        return mul(_as_field(other), self)

    def __truediv__(self, other):
        return div(self, _as_field(other))

    def __rtruediv__(self, other):
        return div(_as_field(other), self)

    def __pow__(self, other):
        return pow_(self, _as_field(other))

    def __neg__(self):
        return neg(self)

    def __eq__(self, other):
        return isinstance(other, Field) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"<field {self}>"


def _as_field(x):
    if isinstance(x, Field):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Const(float(x))
    raise TypeError(f"cannot interpret {x!r} as a field")


class Const(Field):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)
        self._key = (0, self.value)
        self.free_vars = frozenset()

    def diff(self, var):
        return ZERO

    def evaluate(self, env):
        return self.value

    def __str__(self):
        return _fmt_number(self.value)


class Coord(Field):
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name
        self._key = (1, name)
        self.free_vars = frozenset((name,))

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvalDomainError(f"unbound coordinate {self.name!r}") from None

    def __str__(self):
        return self.name


_spline_counter = itertools.count()


class SplineLeaf(Field):
    """Opaque interpolated function of one or two coordinates.

    Derivative leaves are interned per base so that mixed partials taken
    in either order are the *same* object; sums of the form
    d_x d_y f - d_y d_x f therefore cancel structurally, which keeps
    d(d(omega)) = 0 exact for forms with interpolated coefficients.
    """

    __slots__ = ("evaluator", "vars", "orders", "label", "_base_id", "_derived")

    def __init__(self, evaluator, vars, orders=None, label="spline",
                 _base_id=None):
        self.evaluator = evaluator
        self.vars = tuple(vars)
        self.orders = tuple(orders) if orders is not None else (0,) * len(self.vars)
        self.label = label
        self._base_id = next(_spline_counter) if _base_id is None else _base_id
        self._derived = {}
        self._key = (2, self._base_id, self.orders)
        self.free_vars = frozenset(self.vars)

    def diff(self, var):
        if var not in self.vars:
            return ZERO
        i = self.vars.index(var)
        orders = list(self.orders)
        orders[i] += 1
        orders = tuple(orders)
        leaf = self._derived.get(orders)
        if leaf is None:
            leaf = SplineLeaf(self.evaluator, self.vars, orders, self.label,
                              _base_id=self._base_id)
            leaf._derived = self._derived  # share the interning table
            self._derived[orders] = leaf
        return leaf

    def evaluate(self, env):
        args = [np.asarray(env[v], dtype=float) for v in self.vars]
        return self.evaluator.ev(args, self.orders)

    def __str__(self):
        tag = "".join(f"_d{v}{o}" if o else "" for v, o in zip(self.vars, self.orders))
        return f"{self.label}{tag}({', '.join(self.vars)})"


class Add(Field):
    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = tuple(terms)
        self._key = (3,) + tuple(t._key for t in self.terms)
        self.free_vars = frozenset().union(*(t.free_vars for t in self.terms))

    def diff(self, var):
        return add(*(t.diff(var) for t in self.terms))

    def evaluate(self, env):
        out = self.terms[0].evaluate(env)
        for t in self.terms[1:]:
            out = out + t.evaluate(env)
        return out

    def __str__(self):
        parts = [str(self.terms[0])]
        for t in self.terms[1:]:
            s = str(t)
            parts.append(f"- {s[1:].lstrip()}" if s.startswith("-") else f"+ {s}")
        return " ".join(parts)


class Mul(Field):
    __slots__ = ("factors",)

    def __init__(self, factors):
        self.factors = tuple(factors)
        self._key = (4,) + tuple(f._key for f in self.factors)
        self.free_vars = frozenset().union(*(f.free_vars for f in self.factors))

    def diff(self, var):
        terms = []
        for i, f in enumerate(self.factors):
            df = f.diff(var)
            if df is ZERO or df == ZERO:
                continue
            rest = self.factors[:i] + (df,) + self.factors[i + 1:]
            terms.append(mul(*rest))
        return add(*terms) if terms else ZERO

    def evaluate(self, env):
        vals = [f.evaluate(env) for f in self.factors]
        zero_mask = False
        for v in vals:
            zero_mask = zero_mask | (np.asarray(v) == 0.0)
        with np.errstate(all="ignore"):
            out = vals[0]
            for v in vals[1:]:
                out = out * v
        # 0 * anything = 0, including 0 * inf: continuity guard for s*log(s)
        if np.any(zero_mask):
            out = np.where(zero_mask, 0.0, out)
            if out.ndim == 0:
                out = float(out)
        return out

    def __str__(self):
        if (isinstance(self.factors[0], Const) and self.factors[0].value == -1.0
                and len(self.factors) == 2):
            return f"-{_paren(self.factors[1], 20)}"
        return "*".join(_paren(f, 20) for f in self.factors)


class Pow(Field):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = exponent
        self._key = (5, base._key, exponent._key)
        self.free_vars = base.free_vars | exponent.free_vars

    def diff(self, var):
        b, e = self.base, self.exponent
        db = b.diff(var)
        if isinstance(e, Const):
            if db == ZERO:
                return ZERO
            return mul(e, pow_(b, Const(e.value - 1.0)), db)
        de = e.diff(var)
        inner = add(mul(de, log(b)), mul(e, db, pow_(b, Const(-1.0))))
        return mul(self, inner)

    def evaluate(self, env):
        b = np.asarray(self.base.evaluate(env), dtype=float)
        e = self.exponent.evaluate(env)
        e_arr = np.asarray(e, dtype=float)
        integral = np.all(e_arr == np.round(e_arr))
        if not integral and np.any(b < 0.0):
            raise EvalDomainError("fractional power of a negative base")
        if np.any((b == 0.0) & (e_arr < 0.0)):
            raise EvalDomainError("zero base raised to a negative power")
        with np.errstate(all="ignore"):
            out = np.power(b, e_arr)
        return float(out) if out.ndim == 0 else out

    def __str__(self):
        return f"{_paren(self.base, 30)}^{_paren(self.exponent, 30)}"


class _Unary(Field):
    __slots__ = ("arg",)
    _rank = None
    _name = None

    def __init__(self, arg):
        self.arg = arg
        self._key = (self._rank, arg._key)
        self.free_vars = arg.free_vars

    def __str__(self):
        return f"{self._name}({self.arg})"


class Log(_Unary):
    __slots__ = ()
    _rank, _name = 6, "log"

    def diff(self, var):
        da = self.arg.diff(var)
        if da == ZERO:
            return ZERO
        return mul(da, pow_(self.arg, Const(-1.0)))

    def evaluate(self, env):
        a = np.asarray(self.arg.evaluate(env), dtype=float)
        if np.any(a < 0.0):
            raise EvalDomainError("log of a negative value")
        with np.errstate(divide="ignore"):
            out = np.log(a)
        return float(out) if out.ndim == 0 else out


class Exp(_Unary):
    __slots__ = ()
    _rank, _name = 7, "exp"

    def diff(self, var):
        da = self.arg.diff(var)
        if da == ZERO:
            return ZERO
        return mul(self, da)

    def evaluate(self, env):
        with np.errstate(over="ignore"):
            out = np.exp(np.asarray(self.arg.evaluate(env), dtype=float))
        return float(out) if out.ndim == 0 else out


class Sin(_Unary):
    __slots__ = ()
    _rank, _name = 8, "sin"

    def diff(self, var):
        da = self.arg.diff(var)
        if da == ZERO:
            return ZERO
        return mul(cos(self.arg), da)

    def evaluate(self, env):
        out = np.sin(np.asarray(self.arg.evaluate(env), dtype=float))
        return float(out) if out.ndim == 0 else out


class Cos(_Unary):
    __slots__ = ()
    _rank, _name = 9, "cos"

    def diff(self, var):
        da = self.arg.diff(var)
        if da == ZERO:
            return ZERO
        return mul(Const(-1.0), sin(self.arg), da)

    def evaluate(self, env):
        out = np.cos(np.asarray(self.arg.evaluate(env), dtype=float))
        return float(out) if out.ndim == 0 else out


ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------------------
# smart constructors


def const(v):
    return Const(v)


def coord(name):
    return Coord(name)


def add(*terms):
    """Canonical sum: flatten, fold constants, collect like terms."""
    const_acc = 0.0
    buckets = {}  # rest-key -> [coeff, rest-field]
    stack = list(terms)
    while stack:
        t = stack.pop(0)
        t = _as_field(t)
        if isinstance(t, Add):
            stack = list(t.terms) + stack
            continue
        if isinstance(t, Const):
            const_acc += t.value
            continue
        c, rest = _split_coeff(t)
        b = buckets.get(rest._key)
        if b is None:
            buckets[rest._key] = [c, rest]
        else:
            b[0] += c
    out = []
    for c, rest in sorted(buckets.values(), key=lambda b: b[1]._key):
        if c == 0.0:
            continue
        out.append(rest if c == 1.0 else mul(Const(c), rest))
    if const_acc != 0.0 or not out:
        out.insert(0, Const(const_acc))
    if len(out) == 1:
        return out[0]
    return Add(out)


def _split_coeff(f):
    """Split a field into (constant coefficient, remaining factor)."""
    if isinstance(f, Mul) and isinstance(f.factors[0], Const):
        rest = f.factors[1:]
        rest = rest[0] if len(rest) == 1 else Mul(rest)
        return f.factors[0].value, rest
    return 1.0, f


def mul(*factors):
    """Canonical product: flatten, fold constants, merge equal-base powers."""
    const_acc = 1.0
    powers = {}  # base-key -> [exponent-sum (float) or None, base, exp-field]
    order = []
    stack = list(factors)
    while stack:
        f = stack.pop(0)
        f = _as_field(f)
        if isinstance(f, Mul):
            stack = list(f.factors) + stack
            continue
        if isinstance(f, Const):
            const_acc *= f.value
            continue
        if isinstance(f, Pow) and isinstance(f.exponent, Const):
            base, e = f.base, f.exponent.value
        else:
            base, e = f, 1.0
        entry = powers.get(base._key)
        if entry is None:
            powers[base._key] = [e, base]
            order.append(base._key)
        else:
            entry[0] += e
    if const_acc == 0.0:
        return ZERO
    out = []
    for k in sorted(order):
        e, base = powers[k]
        if e == 0.0:
            continue
        out.append(base if e == 1.0 else Pow(base, Const(e)))
    if not out:
        return Const(const_acc)
    if const_acc != 1.0:
        out.insert(0, Const(const_acc))
    if len(out) == 1:
        return out[0]
    return Mul(out)


def pow_(base, exponent):
    base = _as_field(base)
    exponent = _as_field(exponent)
    if isinstance(exponent, Const):
        if exponent.value == 0.0:
            return ONE
        if exponent.value == 1.0:
            return base
        if isinstance(base, Const):
            b, e = base.value, exponent.value
            if b < 0.0 and e != round(e):
                raise EvalDomainError("fractional power of a negative constant")
            if b == 0.0 and e < 0.0:
                raise EvalDomainError("zero constant raised to a negative power")
            return Const(b ** e)
        if isinstance(base, Pow) and isinstance(base.exponent, Const):
            c1, c2 = base.exponent.value, exponent.value
            # (b^c1)^c2 = b^(c1*c2) is wrong for even c1 with fractional c2
            # (it would drop the absolute value), so only fold safe cases
            even_inner = c1 == round(c1) and int(round(c1)) % 2 == 0
            if not (even_inner and c2 != round(c2)):
                return pow_(base.base, Const(c1 * c2))
    return Pow(base, exponent)


def neg(f):
    return mul(Const(-1.0), _as_field(f))


def sub(a, b):
    return add(_as_field(a), neg(b))


def div(a, b):
    return mul(_as_field(a), pow_(b, Const(-1.0)))


def log(f):
    f = _as_field(f)
    if isinstance(f, Const):
        if f.value < 0.0:
            raise EvalDomainError("log of a negative constant")
        return Const(-math.inf) if f.value == 0.0 else Const(math.log(f.value))
    return Log(f)


def exp(f):
    f = _as_field(f)
    if isinstance(f, Const):
        return Const(math.exp(f.value))
    return Exp(f)


def sin(f):
    f = _as_field(f)
    if isinstance(f, Const):
        return Const(math.sin(f.value))
    return Sin(f)


def cos(f):
    f = _as_field(f)
    if isinstance(f, Const):
        return Const(math.cos(f.value))
    return Cos(f)


# ---------------------------------------------------------------------------
# expansion / structural zero test


def expand(f):
    """Rewrite into a collected sum of products (distributing over sums)."""
    f = _as_field(f)
    if isinstance(f, (Const, Coord, SplineLeaf)):
        return f
    if isinstance(f, Add):
        return add(*(expand(t) for t in f.terms))
    if isinstance(f, Mul):
        factor_sums = []
        size = 1
        for fac in f.factors:
            ef = expand(fac)
            terms = list(ef.terms) if isinstance(ef, Add) else [ef]
            size *= len(terms)
            if size > _EXPAND_CAP:
                raise EvalDomainError("expansion too large")
            factor_sums.append(terms)
        pieces = [mul(*combo) for combo in itertools.product(*factor_sums)]
        return add(*pieces)
    if isinstance(f, Pow):
        base = expand(f.base)
        e = f.exponent
        if (isinstance(e, Const) and e.value == round(e.value)
                and 2 <= e.value <= 8 and isinstance(base, Add)):
            out = base
            for _ in range(int(e.value) - 1):
                out = expand(mul(out, base))
            return out
        return pow_(base, expand(e))
    if isinstance(f, Log):
        return log(expand(f.arg))
    if isinstance(f, Exp):
        return exp(expand(f.arg))
    if isinstance(f, Sin):
        return sin(expand(f.arg))
    if isinstance(f, Cos):
        return cos(expand(f.arg))
    raise TypeError(f"cannot expand {type(f).__name__}")


def is_zero_field(f, structural_only=False):
    """True when the field is identically zero (after expansion)."""
    f = _as_field(f)
    if isinstance(f, Const):
        return f.value == 0.0
    if structural_only:
        return False
    g = expand(f)
    return isinstance(g, Const) and g.value == 0.0


# ---------------------------------------------------------------------------
# evaluation helpers


def eval_fields(fields, env):
    """Evaluate a nested list/tuple of fields at a broadcast environment.

    Returns an array with the structure shape appended after the broadcast
    shape, e.g. a matrix of fields over N points gives shape (N, r, c).
    """
    arr = np.asarray(fields, dtype=object)
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
    out = np.empty(shape + arr.shape, dtype=float)
    for idx in np.ndindex(arr.shape):
        out[(...,) + idx] = np.broadcast_to(arr[idx].evaluate(env), shape)
    return out


# ---------------------------------------------------------------------------
# parsing and printing

_FUNCTIONS = {"log": log, "exp": exp, "sin": sin, "cos": cos}


def _fmt_number(v):
    if v == math.floor(v) and abs(v) < 1e16 and math.isfinite(v):
        return str(int(v))
    return repr(v)


def _precedence(f):
    if isinstance(f, Add):
        return 10
    if isinstance(f, Mul):
        return 20
    if isinstance(f, Pow):
        return 30
    if isinstance(f, Const) and (f.value < 0 or f.value == math.inf):
        return 15
    return 100


def _paren(f, parent_prec):
    s = str(f)
    return f"({s})" if _precedence(f) < parent_prec else s


class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.i = 0

    def _scan(self):
        t, n = self.text, len(self.text)
        i = 0
        while i < n:
            c = t[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/^(),":
                self.tokens.append((c, c, i))
                i += 1
                continue
            if c.isdigit() or (c == "." and i + 1 < n and t[i + 1].isdigit()):
                j = i
                while j < n and (t[j].isdigit() or t[j] == "."):
                    j += 1
                if j < n and t[j] in "eE":
                    k = j + 1
                    if k < n and t[k] in "+-":
                        k += 1
                    if k < n and t[k].isdigit():
                        j = k
                        while j < n and t[j].isdigit():
                            j += 1
                self.tokens.append(("num", t[i:j], i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (t[j].isalnum() or t[j] == "_"):
                    j += 1
                self.tokens.append(("ident", t[i:j], i))
                i = j
                continue
            raise ParseError(f"unexpected character {c!r}", i)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok


def parse_field(text):
    """Parse an expression over named coordinates into a Field.

    Grammar: numbers, identifiers, + - * / ^ (right-assoc), parentheses,
    and the functions log, exp, sin, cos.  Any other identifier is a
    coordinate name.
    """
    tz = _Tokenizer(text)
    f = _parse_sum(tz)
    kind, val, pos = tz.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {val!r}", pos)
    return f


def _parse_sum(tz):
    f = _parse_term(tz)
    while True:
        kind, _, _ = tz.peek()
        if kind == "+":
            tz.next()
            f = add(f, _parse_term(tz))
        elif kind == "-":
            tz.next()
            f = sub(f, _parse_term(tz))
        else:
            return f


def _parse_term(tz):
    f = _parse_unary(tz)
    while True:
        kind, _, _ = tz.peek()
        if kind == "*":
            tz.next()
            f = mul(f, _parse_unary(tz))
        elif kind == "/":
            tz.next()
            f = div(f, _parse_unary(tz))
        else:
            return f


def _parse_unary(tz):
    kind, _, _ = tz.peek()
    if kind == "-":
        tz.next()
        return neg(_parse_unary(tz))
    if kind == "+":
        tz.next()
        return _parse_unary(tz)
    return _parse_power(tz)


def _parse_power(tz):
    base = _parse_atom(tz)
    kind, _, _ = tz.peek()
    if kind == "^":
        tz.next()
        return pow_(base, _parse_unary(tz))
    return base


def _parse_atom(tz):
    kind, val, pos = tz.next()
    if kind == "num":
        return Const(float(val))
    if kind == "ident":
        nkind, _, _ = tz.peek()
        if nkind == "(":
            if val not in _FUNCTIONS:
                raise ParseError(f"unknown function {val!r}", pos)
            tz.next()
            arg = _parse_sum(tz)
            ckind, cval, cpos = tz.next()
            if ckind != ")":
                raise ParseError(f"expected ')', got {cval!r}", cpos)
            return _FUNCTIONS[val](arg)
        return Coord(val)
    if kind == "(":
        f = _parse_sum(tz)
        ckind, cval, cpos = tz.next()
        if ckind != ")":
            raise ParseError(f"expected ')', got {cval!r}", cpos)
        return f
    raise ParseError(f"unexpected token {val!r}", pos)
