"""Immutable expression trees for fields on R^3.

Expressions are hash-consed: structurally equal trees are the same Python
object, so equality is identity and common subexpressions are shared for
free. Everything here is pure; nodes may be shared between threads.

Grammar (no implicit multiplication, whitespace ignored)::

    expr  := term (("+"|"-") term)*
    term  := unary (("*"|"/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | IDENT | IDENT "(" expr ("," expr)? ")" | "(" expr ")"
"""

from __future__ import annotations

import math
import re
import threading
import weakref
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError, MissingBinding, UnknownIdentifier

VARIABLES = ("x", "y", "z", "u", "v", "t")
UNARY_FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs", "sign")
BINARY_FUNCTIONS = ("atan2",)
CONSTANTS = {"pi": math.pi, "e": math.e}

_TABLE: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_LOCK = threading.Lock()


def _intern(key, cls, **fields):
    with _LOCK:
        node = _TABLE.get(key)
        if node is None:
            node = object.__new__(cls)
            for name, value in fields.items():
                object.__setattr__(node, name, value)
            _TABLE[key] = node
        return node


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("__weakref__",)

    def __setattr__(self, name, value):
        raise AttributeError("expression nodes are immutable")

    def __delattr__(self, name):
        raise AttributeError("expression nodes are immutable")

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

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

    def __str__(self):
        return to_text(self)


class Const(Expr):
    __slots__ = ("value",)

    def __new__(cls, value):
        value = float(value) + 0.0  # folds -0.0 into 0.0
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        return _intern(("c", value), cls, value=value)

    def __repr__(self):
        return f"Const({self.value!r})"


class Var(Expr):
    __slots__ = ("name",)

    def __new__(cls, name):
        if name not in VARIABLES:
            raise UnknownIdentifier(f"unknown variable {name!r}")
        return _intern(("v", name), cls, name=name)

    def __repr__(self):
        return f"Var({self.name!r})"


class Unary(Expr):
    __slots__ = ("op", "arg")

    def __new__(cls, op, arg):
        if op != "neg" and op not in UNARY_FUNCTIONS:
            raise ValueError(f"unknown unary op {op!r}")
        return _intern(("u", op, id(arg)), cls, op=op, arg=arg)

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __new__(cls, op, left, right):
        if op not in _BINARY_SYMBOL:
            raise ValueError(f"unknown binary op {op!r}")
        return _intern(("b", op, id(left), id(right)), cls, op=op, left=left, right=right)

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


class Call2(Expr):
    __slots__ = ("op", "left", "right")

    def __new__(cls, op, left, right):
        if op not in BINARY_FUNCTIONS:
            raise ValueError(f"unknown two-argument function {op!r}")
        return _intern(("f", op, id(left), id(right)), cls, op=op, left=left, right=right)

    def __repr__(self):
        return f"Call2({self.op!r}, {self.left!r}, {self.right!r})"


Constant = Const
Variable = Var

_BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}

ZERO = Const(0.0)
ONE = Const(1.0)
TWO = Const(2.0)
X, Y, Z = Var("x"), Var("y"), Var("z")


def as_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return Const(obj)
    raise TypeError(f"cannot convert {type(obj).__name__} to Expr")


# ---------------------------------------------------------------------------
# scalar primitives (shared by evaluation and constant folding)


def _s_div(a, b):
    if b == 0.0:
        raise EvalDomainError("division by zero")
    return a / b


def _s_ln(a):
    if a <= 0.0:
        raise EvalDomainError(f"ln of non-positive argument {a!r}")
    return math.log(a)


def _s_sqrt(a):
    if a < 0.0:
        raise EvalDomainError(f"sqrt of negative argument {a!r}")
    return math.sqrt(a)


def _s_pow(a, b):
    if a < 0.0 and b != math.floor(b):
        raise EvalDomainError(f"negative base {a!r} to non-integer power {b!r}")
    if a == 0.0 and b < 0.0:
        raise EvalDomainError("zero to a negative power")
    try:
        return math.pow(a, b)
    except OverflowError:
        raise EvalDomainError(f"overflow in {a!r}^{b!r}") from None


def _s_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        raise EvalDomainError(f"overflow in exp({a!r})") from None


def _s_sign(a):
    return 0.0 if a == 0.0 else math.copysign(1.0, a)


_SCALAR = {
    "neg": lambda a: -a,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": _s_exp,
    "ln": _s_ln,
    "sqrt": _s_sqrt,
    "abs": abs,
    "sign": _s_sign,
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _s_div,
    "pow": _s_pow,
    "atan2": math.atan2,
}


def _fold(op, *args):
    """Constant-fold, or return None if the result is outside the domain."""
    try:
        value = _SCALAR[op](*args)
    except EvalDomainError:
        return None
    if not math.isfinite(value):
        return None
    return Const(value)


# ---------------------------------------------------------------------------
# smart constructors: constant folding and 0/1/sign elimination


def _cval(e):
    return e.value if isinstance(e, Const) else None


def _is_neg(e):
    return isinstance(e, Unary) and e.op == "neg"


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if _is_neg(a):
        return a.arg
    return Unary("neg", a)


def add(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        folded = _fold("add", ca, cb)
        if folded is not None:
            return folded
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    if _is_neg(b):
        return sub(a, b.arg)
    if _is_neg(a):
        return sub(b, a.arg)
    if cb is not None and cb < 0.0:
        return sub(a, Const(-cb))
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        folded = _fold("sub", ca, cb)
        if folded is not None:
            return folded
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    if a is b:
        return ZERO
    if _is_neg(b):
        return add(a, b.arg)
    if cb is not None and cb < 0.0:
        return add(a, Const(-cb))
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        folded = _fold("mul", ca, cb)
        if folded is not None:
            return folded
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    if _is_neg(a):
        return neg(mul(a.arg, b))
    if _is_neg(b):
        return neg(mul(a, b.arg))
    if cb is not None:
        return mul(b, a)
    if ca is not None:
        if ca < 0.0:
            return neg(mul(Const(-ca), b))
        if isinstance(b, Binary) and b.op == "mul" and isinstance(b.left, Const):
            folded = _fold("mul", ca, b.left.value)
            if folded is not None:
                return mul(folded, b.right)
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        folded = _fold("div", ca, cb)
        if folded is not None:
            return folded
    if cb == 1.0:
        return a
    if cb == -1.0:
        return neg(a)
    if ca == 0.0 and cb != 0.0:
        return ZERO
    if _is_neg(a):
        return neg(div(a.arg, b))
    if _is_neg(b):
        return neg(div(a, b.arg))
    if a is b:
        return ONE
    return Binary("div", a, b)


def power(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        folded = _fold("pow", ca, cb)
        if folded is not None:
            return folded
    if cb == 0.0:
        return ONE
    if cb == 1.0:
        return a
    if ca == 1.0:
        return ONE
    return Binary("pow", a, b)


def func(op: str, a: Expr) -> Expr:
    if op == "neg":
        return neg(a)
    if isinstance(a, Const):
        folded = _fold(op, a.value)
        if folded is not None:
            return folded
    return Unary(op, a)


def atan2(a: Expr, b: Expr) -> Expr:
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return _fold("atan2", ca, cb) or Call2("atan2", a, b)
    return Call2("atan2", a, b)


_SMART_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": power}


def _walk(e: Expr, leaf: Callable[[Expr], Expr], memo: dict) -> Expr:
    """Rebuild ``e`` bottom-up through the smart constructors."""
    done = memo.get(e)
    if done is not None:
        return done
    if isinstance(e, (Const, Var)):
        out = leaf(e)
    elif isinstance(e, Unary):
        out = func(e.op, _walk(e.arg, leaf, memo))
    elif isinstance(e, Binary):
        out = _SMART_BINARY[e.op](_walk(e.left, leaf, memo), _walk(e.right, leaf, memo))
    else:
        out = atan2(_walk(e.left, leaf, memo), _walk(e.right, leaf, memo))
    memo[e] = out
    return out


def simplify(e: Expr) -> Expr:
    """Constant folding plus 0/1 and sign elimination. Idempotent."""
    return _walk(e, lambda leaf: leaf, {})


def substitute(e: Expr, var: str, replacement) -> Expr:
    """Replace every occurrence of variable ``var`` and simplify the result."""
    replacement = as_expr(replacement)
    return _walk(e, lambda leaf: replacement if isinstance(leaf, Var) and leaf.name == var else leaf, {})


def variables(e: Expr) -> frozenset:
    seen, names, stack = set(), set(), [e]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, (Binary, Call2)):
            stack.extend((node.left, node.right))
    return frozenset(names)


def node_count(e: Expr) -> int:
    """Number of distinct nodes in the expression DAG."""
    seen, stack = set(), [e]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, (Binary, Call2)):
            stack.extend((node.left, node.right))
    return len(seen)


# ---------------------------------------------------------------------------
# differentiation


def diff(e, var: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``var``, simplified."""
    if var not in VARIABLES:
        raise UnknownIdentifier(f"unknown variable {var!r}")
    return _diff(simplify(as_expr(e)), var, {})


def _diff(e: Expr, var: str, memo: dict) -> Expr:
    done = memo.get(e)
    if done is not None:
        return done
    if isinstance(e, Const):
        out = ZERO
    elif isinstance(e, Var):
        out = ONE if e.name == var else ZERO
    elif isinstance(e, Unary):
        out = _diff_unary(e, _diff(e.arg, var, memo))
    elif isinstance(e, Binary):
        out = _diff_binary(e, var, memo)
    else:  # atan2(a, b): (b da - a db) / (a^2 + b^2)
        a, b = e.left, e.right
        da, db = _diff(a, var, memo), _diff(b, var, memo)
        out = div(sub(mul(b, da), mul(a, db)), add(power(a, TWO), power(b, TWO)))
    memo[e] = out
    return out


def _diff_unary(e: Unary, da: Expr) -> Expr:
    if da is ZERO:
        return ZERO
    a, op = e.arg, e.op
    if op == "neg":
        return neg(da)
    if op == "sin":
        return mul(func("cos", a), da)
    if op == "cos":
        return neg(mul(func("sin", a), da))
    if op == "tan":
        return div(da, power(func("cos", a), TWO))
    if op == "exp":
        return mul(e, da)
    if op == "ln":
        return div(da, a)
    if op == "sqrt":
        return div(da, mul(TWO, e))
    if op == "abs":
        return mul(func("sign", a), da)
    return ZERO  # sign: derivative taken as 0 everywhere


def _diff_binary(e: Binary, var: str, memo: dict) -> Expr:
    a, b, op = e.left, e.right, e.op
    da, db = _diff(a, var, memo), _diff(b, var, memo)
    if op == "add":
        return add(da, db)
    if op == "sub":
        return sub(da, db)
    if op == "mul":
        return add(mul(da, b), mul(a, db))
    if op == "div":
        if db is ZERO:
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, TWO))
    # pow
    if isinstance(b, Const):
        if da is ZERO:
            return ZERO
        return mul(mul(b, power(a, Const(b.value - 1.0))), da)
    if isinstance(a, Const):
        return mul(mul(e, func("ln", a)), db)
    return mul(e, add(mul(db, func("ln", a)), div(mul(b, da), a)))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e, binding: Mapping[str, float]) -> float:
    """Evaluate in IEEE double precision; domain violations raise EvalDomainError."""
    e = as_expr(e)
    missing = variables(e) - set(binding)
    if missing:
        raise MissingBinding(f"no value bound for {', '.join(sorted(missing))}")
    memo: dict = {}

    def ev(node):
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = node.value
        elif isinstance(node, Var):
            out = float(binding[node.name])
        elif isinstance(node, Unary):
            out = _SCALAR[node.op](ev(node.arg))
        else:
            out = _SCALAR[node.op](ev(node.left), ev(node.right))
        memo[node] = out
        return out

    return ev(e)


def _v_check(mask, message):
    if np.any(mask):
        raise EvalDomainError(message)


def _v_div(a, b):
    _v_check(np.asarray(b) == 0.0, "division by zero")
    return a / b


def _v_ln(a):
    _v_check(np.asarray(a) <= 0.0, "ln of non-positive argument")
    return np.log(a)


def _v_sqrt(a):
    _v_check(np.asarray(a) < 0.0, "sqrt of negative argument")
    return np.sqrt(a)


def _v_pow(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _v_check((a < 0.0) & (b != np.floor(b)), "negative base to non-integer power")
    _v_check((a == 0.0) & (b < 0.0), "zero to a negative power")
    return np.power(a, b)


def _v_ipow(a, k):
    if k < 0:
        _v_check(np.asarray(a) == 0.0, "zero to a negative power")
        return 1.0 / np.asarray(a, dtype=float) ** (-k)
    return np.asarray(a, dtype=float) ** k


def _s_ipow(a, k):
    if k < 0:
        if a == 0.0:
            raise EvalDomainError("zero to a negative power")
        return 1.0 / a ** (-k)
    return a ** k


_NUMPY_NS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "ln": _v_ln,
    "sqrt": _v_sqrt, "abs": np.abs, "sign": np.sign, "atan2": np.arctan2,
    "_div": _v_div, "_pow": _v_pow, "_ipow": _v_ipow,
}
_MATH_NS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": _s_exp, "ln": _s_ln,
    "sqrt": _s_sqrt, "abs": abs, "sign": _s_sign, "atan2": math.atan2,
    "_div": _s_div, "_pow": _s_pow, "_ipow": _s_ipow,
}


def _codegen(exprs: Sequence[Expr], args: Sequence[str]) -> str:
    names: dict = {}
    lines = []

    def ref(node):
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Var):
            return node.name
        return names[node]

    # iterative post-order so deep trees do not hit the recursion limit
    for root in exprs:
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if isinstance(node, (Const, Var)) or node in names:
                continue
            if not expanded:
                stack.append((node, True))
                if isinstance(node, Unary):
                    stack.append((node.arg, False))
                else:
                    stack.append((node.right, False))
                    stack.append((node.left, False))
                continue
            if isinstance(node, Unary):
                a = ref(node.arg)
                code = f"-{a}" if node.op == "neg" else f"{node.op}({a})"
            elif isinstance(node, Call2):
                code = f"{node.op}({ref(node.left)}, {ref(node.right)})"
            else:
                a, b = ref(node.left), ref(node.right)
                if node.op == "div":
                    code = f"_div({a}, {b})"
                elif node.op == "pow":
                    k = _cval(node.right)
                    if k is not None and k == int(k) and abs(k) < 2**31:
                        code = f"_ipow({a}, {int(k)})"
                    else:
                        code = f"_pow({a}, {b})"
                else:
                    code = f"({a} {_BINARY_SYMBOL[node.op]} {b})"
            name = f"_t{len(names)}"
            names[node] = name
            lines.append(f"    {name} = {code}")
    outs = ", ".join(ref(e) for e in exprs)
    return f"def _compiled({', '.join(args)}):\n" + "\n".join(lines) + f"\n    return ({outs},)\n"


def _build(exprs, args, namespace):
    source = _codegen(exprs, args)
    scope = dict(namespace)
    exec(compile(source, "<jacobi3-expr>", "exec"), scope)
    return scope["_compiled"]


class CompiledExprs:
    """A batch of expressions compiled with shared subexpressions.

    Calling with an ``(N, len(args))`` array returns an ``(len(exprs), N)``
    array. ``scalar(*values)`` evaluates at one point with plain floats.
    """

    def __init__(self, exprs: Iterable, args: Sequence[str] = ("x", "y", "z")):
        self.exprs = tuple(as_expr(e) for e in exprs)
        self.args = tuple(args)
        extra = set().union(*(variables(e) for e in self.exprs)) - set(self.args) if self.exprs else set()
        if extra:
            raise MissingBinding(f"expression uses unbound variables {sorted(extra)}")
        self._vec = _build(self.exprs, self.args, _NUMPY_NS)
        self._scalar = _build(self.exprs, self.args, _MATH_NS)

    def __len__(self):
        return len(self.exprs)

    def scalar(self, *values: float) -> tuple:
        try:
            return self._scalar(*values)
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvalDomainError(str(exc), values) from None
        except EvalDomainError as exc:
            raise EvalDomainError(str(exc), values) from None

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != len(self.args):
            raise ValueError(f"expected points with {len(self.args)} columns, got {pts.shape}")
        cols = [pts[:, i] for i in range(len(self.args))]
        try:
            with np.errstate(divide="raise", over="raise", invalid="raise"):
                outs = self._vec(*cols)
        except (EvalDomainError, FloatingPointError, ZeroDivisionError) as exc:
            self._locate(pts, exc)
        result = np.empty((len(self.exprs), pts.shape[0]))
        for i, out in enumerate(outs):
            result[i] = out
        return result

    def _locate(self, pts, exc):
        for p in pts:
            self.scalar(*p)  # raises with the offending point attached
        raise EvalDomainError(f"{exc} (not reproducible pointwise)")


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _fmt_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return 3
    if isinstance(e, Const) and e.value < 0:
        return 3
    return 5


def to_text(e: Expr) -> str:
    """Render in the input grammar; ``parse(to_text(parse(s)))`` is ``parse(s)``."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_text(e.arg)
            # -(2) must not print as the literal -2
            wrap = _prec(e.arg) < 3 or (isinstance(e.arg, Const) and e.arg.value >= 0)
            return f"-({inner})" if wrap else f"-{inner}"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Call2):
        return f"{e.op}({to_text(e.left)}, {to_text(e.right)})"
    p = _PREC[e.op]
    left, right = to_text(e.left), to_text(e.right)
    if e.op == "pow":
        if _prec(e.left) < 5:
            left = f"({left})"
        if _prec(e.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p or _prec(e.right) == 3:
        right = f"({right})"
    sep = f" {_BINARY_SYMBOL[e.op]} " if p == 1 else _BINARY_SYMBOL[e.op]
    return f"{left}{sep}{right}"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)


class _Parser:
    def __init__(self, source: str, allowed: frozenset):
        self.source = source
        self.allowed = allowed
        self.tokens = self._tokenize()
        self.pos = 0

    def _offset(self, index: int) -> int:
        return len(self.source[:index].encode("utf-8"))

    def _error(self, message, index, cls=ExprSyntaxError):
        return cls(message, self.source, self._offset(index))

    def _tokenize(self):
        tokens, i, src = [], 0, self.source
        while i < len(src):
            m = _TOKEN.match(src, i)
            if m is None:
                raise self._error(f"unexpected character {src[i]!r}", i)
            if m.lastgroup != "ws":
                tokens.append((m.lastgroup, m.group(), i))
            i = m.end()
        tokens.append(("end", "", len(src)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, tok, at = self.take()
        if tok != text or kind == "end":
            found = "end of input" if kind == "end" else repr(tok)
            raise self._error(f"expected {text!r}, found {found}", at)

    def parse(self) -> Expr:
        e = self.expr()
        kind, tok, at = self.peek()
        if kind != "end":
            raise self._error(f"unexpected {tok!r} (no implicit multiplication)", at)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            if self.peek()[0] == "num" and self.tokens[self.pos + 1][:2] != ("op", "^"):
                # a signed literal is a constant; -2^2 stays -(2^2)
                return Const(-float(self.take()[1]))
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Binary("pow", base, self.unary())
        return base

    def atom(self):
        kind, tok, at = self.take()
        if kind == "num":
            return Const(float(tok))
        if kind == "op" and tok == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            is_call = self.peek()[:2] == ("op", "(")
            if tok in UNARY_FUNCTIONS or tok in BINARY_FUNCTIONS:
                if not is_call:
                    raise self._error(f"function {tok!r} needs an argument list", self.peek()[2])
                self.take()
                first = self.expr()
                if self.peek()[:2] == ("op", ","):
                    self.take()
                    comma = self.tokens[self.pos - 1][2]
                    second = self.expr()
                    self.expect(")")
                    if tok not in BINARY_FUNCTIONS:
                        raise self._error(f"{tok!r} takes one argument", comma)
                    return Call2(tok, first, second)
                close = self.peek()[2]
                self.expect(")")
                if tok in BINARY_FUNCTIONS:
                    raise self._error(f"{tok!r} takes two arguments", close)
                return Unary(tok, first)
            if is_call:
                known = tok in CONSTANTS or tok in self.allowed
                raise self._error(f"{tok!r} is not a function", at,
                                  ExprSyntaxError if known else UnknownIdentifier)
            if tok in CONSTANTS:
                return Const(CONSTANTS[tok])
            if tok in self.allowed:
                return Var(tok)
            raise self._error(f"unknown identifier {tok!r}", at, UnknownIdentifier)
        found = "end of input" if kind == "end" else repr(tok)
        raise self._error(f"unexpected {found}", at)


def parse(source: str, variables: Iterable[str] = VARIABLES) -> Expr:
    """Parse expression text into an (unsimplified) tree.

    ``variables`` restricts which coordinate names are accepted; anything
    else raises UnknownIdentifier.
    """
    allowed = frozenset(variables)
    bad = allowed - set(VARIABLES)
    if bad:
        raise ValueError(f"variables outside the alphabet: {sorted(bad)}")
    return _Parser(source, allowed).parse()
