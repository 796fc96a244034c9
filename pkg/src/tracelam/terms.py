"""Core calculus: terms, values, evaluation contexts and redex decomposition.

Terms are immutable. Booleans are the reals ``0.0`` (false) and ``1.0`` (true).
Reals are IEEE doubles.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

from .sexpr import Number, ParseError, SList, Symbol, read_one


class OpenTermError(ValueError):
    """An operation that requires a closed term met a free variable."""


@dataclass(frozen=True, slots=True)
class Const:
    value: float

    def __post_init__(self):
        if type(self.value) is not float:
            object.__setattr__(self, "value", float(self.value))

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Lam:
    param: str
    body: "Term"

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class App:
    fn: "Term"
    arg: "Term"

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class Draw:
    dist: str
    args: tuple = ()

    def __post_init__(self):
        if type(self.args) is not tuple:
            object.__setattr__(self, "args", tuple(self.args))
        _check_args(self)

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class Prim:
    prim: str
    args: tuple = ()

    def __post_init__(self):
        if type(self.args) is not tuple:
            object.__setattr__(self, "args", tuple(self.args))
        _check_args(self)

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class If:
    cond: "Term"
    then: "Term"
    else_: "Term"

    def __post_init__(self):
        if type(self.cond) not in _VALUE_TYPES:
            raise TypeError(f"if scrutinee must be a value, got {self.cond!r}")

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class Score:
    arg: "Term"

    def __post_init__(self):
        if type(self.arg) not in _VALUE_TYPES:
            raise TypeError(f"score argument must be a value, got {self.arg!r}")

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True)
class Fail:
    def __str__(self) -> str:
        return "fail"


Term = Union[Const, Var, Lam, App, Draw, Prim, If, Score, Fail]
Value = Union[Const, Var, Lam]
GeneralizedValue = Union[Const, Lam, Fail]

FAIL = Fail()
TRUE = Const(1.0)
FALSE = Const(0.0)

_VALUE_TYPES = (Const, Var, Lam)


def is_value(t: Term) -> bool:
    return type(t) in _VALUE_TYPES


def is_generalized_value(t: Term) -> bool:
    """True for closed-value shapes and ``fail``. Variables are not generalized values."""
    return type(t) in (Const, Lam, Fail)


def let(name: str, bound: Term, body: Term) -> Term:
    """``let x = M in N`` is sugar for ``(λx.N) M``."""
    return App(Lam(name, body), bound)


def seq(first: Term, second: Term, dummy: str = "%_") -> Term:
    """``M; N`` is sugar for ``(λ⋆.N) M`` with ``⋆`` not free in ``N``."""
    assert dummy not in free_vars(second)
    return App(Lam(dummy, second), first)


def _check_args(t: Term) -> None:
    for a in t.args:
        if not is_value(a):
            raise TypeError(f"{type(t).__name__} arguments must be values, got {a!r}")


# ---------------------------------------------------------------- free variables / substitution


def free_vars(t: Term) -> frozenset[str]:
    out: set[str] = set()
    stack: list[tuple[Term, frozenset[str]]] = [(t, frozenset())]
    while stack:
        term, bound = stack.pop()
        tt = type(term)
        if tt is Var:
            if term.name not in bound:
                out.add(term.name)
        elif tt is Lam:
            stack.append((term.body, bound | {term.param}))
        elif tt is App:
            stack.append((term.fn, bound))
            stack.append((term.arg, bound))
        elif tt is Draw or tt is Prim:
            stack.extend((a, bound) for a in term.args)
        elif tt is If:
            stack.append((term.cond, bound))
            stack.append((term.then, bound))
            stack.append((term.else_, bound))
        elif tt is Score:
            stack.append((term.arg, bound))
    return frozenset(out)


def is_closed(t: Term) -> bool:
    return not free_vars(t)


_fresh_counter = itertools.count()


def _fresh(name: str, avoid: frozenset[str]) -> str:
    while True:
        cand = f"{name.split('~')[0]}~{next(_fresh_counter)}"
        if cand not in avoid:
            return cand


def subst(body: Term, var: str, val: Term) -> Term:
    """Capture-avoiding substitution ``body{val/var}``.

    With a closed ``val`` no capture can happen, so binders are only renamed
    when ``val`` itself has free variables.
    """
    fv = free_vars(val) if type(val) is not Const else frozenset()
    return _subst(body, var, val, fv)


def _subst(t: Term, x: str, v: Term, fv: frozenset[str]) -> Term:
    tt = type(t)
    if tt is Var:
        return v if t.name == x else t
    if tt is Const or tt is Fail:
        return t
    if tt is Lam:
        if t.param == x:
            return t
        if t.param in fv and x in free_vars(t.body):
            new = _fresh(t.param, fv | free_vars(t.body))
            renamed = _subst(t.body, t.param, Var(new), frozenset({new}))
            return Lam(new, _subst(renamed, x, v, fv))
        b = _subst(t.body, x, v, fv)
        return t if b is t.body else Lam(t.param, b)
    if tt is App:
        f = _subst(t.fn, x, v, fv)
        a = _subst(t.arg, x, v, fv)
        return t if (f is t.fn and a is t.arg) else App(f, a)
    if tt is Draw or tt is Prim:
        args = tuple(_subst(a, x, v, fv) for a in t.args)
        if all(a is b for a, b in zip(args, t.args)):
            return t
        return tt(t.dist if tt is Draw else t.prim, args)
    if tt is If:
        c = _subst(t.cond, x, v, fv)
        m = _subst(t.then, x, v, fv)
        n = _subst(t.else_, x, v, fv)
        return t if (c is t.cond and m is t.then and n is t.else_) else If(c, m, n)
    if tt is Score:
        a = _subst(t.arg, x, v, fv)
        return t if a is t.arg else Score(a)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------- erroneous redexes


def _is_unit_score(v: Term) -> bool:
    return type(v) is Const and 0.0 < v.value <= 1.0


def is_erroneous(t: Term) -> bool:
    """Whether ``t`` is one of the five stuck shapes that reduce to ``fail``."""
    tt = type(t)
    if tt is App:
        return type(t.fn) is Const
    if tt is Draw or tt is Prim:
        for a in t.args:
            if type(a) is Var:
                raise OpenTermError(f"free variable {a.name!r}")
        return any(type(a) is Lam for a in t.args)
    if tt is If:
        c = t.cond
        if type(c) is Var:
            raise OpenTermError(f"free variable {c.name!r}")
        return not (type(c) is Const and (c.value == 0.0 or c.value == 1.0))
    if tt is Score:
        if type(t.arg) is Var:
            raise OpenTermError(f"free variable {t.arg.name!r}")
        return not _is_unit_score(t.arg)
    return False


# ---------------------------------------------------------------- evaluation contexts


@dataclass(frozen=True, slots=True)
class Hole:
    def __str__(self) -> str:
        return "[]"


@dataclass(frozen=True, slots=True)
class AppL:
    """``E M``: the hole is in function position."""

    ctx: "EvalContext"
    arg: Term


@dataclass(frozen=True, slots=True)
class AppR:
    """``(λx.M) E``: the hole is in argument position of an abstraction."""

    fn: Lam
    ctx: "EvalContext"


EvalContext = Union[Hole, AppL, AppR]
HOLE = Hole()


def plug(ctx: EvalContext, t: Term) -> Term:
    frames = []
    while type(ctx) is not Hole:
        frames.append(ctx)
        ctx = ctx.ctx
    for fr in reversed(frames):
        t = App(t, fr.arg) if type(fr) is AppL else App(fr.fn, t)
    return t


def compose(outer: EvalContext, inner: EvalContext) -> EvalContext:
    """``(E ∘ E')`` with ``(E ∘ E')[M] == E[E'[M]]``."""
    frames = []
    while type(outer) is not Hole:
        frames.append(outer)
        outer = outer.ctx
    out = inner
    for fr in reversed(frames):
        out = AppL(out, fr.arg) if type(fr) is AppL else AppR(fr.fn, out)
    return out


class RedexKind(enum.Enum):
    BETA = "beta"
    DRAW = "draw"
    PRIM = "prim"
    SCORE = "score"
    FAIL = "fail"
    IF_TRUE = "if-true"
    IF_FALSE = "if-false"
    ERROR = "error"


class Redex(NamedTuple):
    context: EvalContext
    term: Term
    kind: RedexKind


def focus(t: Term) -> tuple[list, Term, RedexKind] | None:
    """Locate the next redex. Returns ``(frames, redex, kind)`` with frames
    listed outermost first (each an ``AppL`` or ``AppR`` whose ``ctx`` is
    ignored), or ``None`` when ``t`` is a generalized value."""
    frames: list = []
    while True:
        tt = type(t)
        if tt is App:
            f = t.fn
            ft = type(f)
            if ft is Lam:
                a = t.arg
                at = type(a)
                if at is Const or at is Lam:
                    return frames, t, RedexKind.BETA
                if at is Var:
                    raise OpenTermError(f"free variable {a.name!r}")
                frames.append(AppR(f, HOLE))
                t = a
                continue
            if ft is Const:
                return frames, t, RedexKind.ERROR
            if ft is Var:
                raise OpenTermError(f"free variable {f.name!r}")
            frames.append(AppL(HOLE, t.arg))
            t = f
            continue
        if tt is Const or tt is Lam:
            # only reachable at the root: values are never descended into
            return None
        if tt is Fail:
            return None if not frames else (frames, t, RedexKind.FAIL)
        if tt is Var:
            raise OpenTermError(f"free variable {t.name!r}")
        if is_erroneous(t):
            return frames, t, RedexKind.ERROR
        if tt is Draw:
            return frames, t, RedexKind.DRAW
        if tt is Prim:
            return frames, t, RedexKind.PRIM
        if tt is Score:
            return frames, t, RedexKind.SCORE
        if tt is If:
            return frames, t, (RedexKind.IF_TRUE if t.cond.value == 1.0 else RedexKind.IF_FALSE)
        raise TypeError(f"not a term: {t!r}")


def plug_frames(frames: list, t: Term) -> Term:
    for fr in reversed(frames):
        t = App(t, fr.arg) if type(fr) is AppL else App(fr.fn, t)
    return t


def frames_to_context(frames: list) -> EvalContext:
    ctx: EvalContext = HOLE
    for fr in reversed(frames):
        ctx = AppL(ctx, fr.arg) if type(fr) is AppL else AppR(fr.fn, ctx)
    return ctx


def decompose(t: Term) -> GeneralizedValue | Redex:
    """Split a closed term into its unique evaluation context and redex.

    Generalized values are returned unchanged.
    """
    if not is_closed(t):
        raise OpenTermError(f"term has free variables {sorted(free_vars(t))}")
    found = focus(t)
    if found is None:
        return t
    frames, redex, kind = found
    return Redex(frames_to_context(frames), redex, kind)


# ---------------------------------------------------------------- canonical text form

_KEYWORDS = {"lambda", "app", "draw", "prim", "if", "score", "fail"}


def format_real(c: float) -> str:
    if math.isnan(c):
        return "nan"
    if math.isinf(c):
        return "+inf" if c > 0 else "-inf"
    return repr(c)


def pretty(t: Term) -> str:
    """Canonical s-expression form; ``parse_core(pretty(t)) == t``."""
    parts: list[str] = []

    def go(t: Term) -> None:
        tt = type(t)
        if tt is Const:
            parts.append(format_real(t.value))
        elif tt is Var:
            parts.append(t.name)
        elif tt is Fail:
            parts.append("fail")
        elif tt is Lam:
            parts.append(f"(lambda {t.param} ")
            go(t.body)
            parts.append(")")
        elif tt is App:
            parts.append("(app ")
            go(t.fn)
            parts.append(" ")
            go(t.arg)
            parts.append(")")
        elif tt is Draw or tt is Prim:
            parts.append(f"({'draw' if tt is Draw else 'prim'} {t.dist if tt is Draw else t.prim}")
            for a in t.args:
                parts.append(" ")
                go(a)
            parts.append(")")
        elif tt is If:
            parts.append("(if ")
            go(t.cond)
            parts.append(" ")
            go(t.then)
            parts.append(" ")
            go(t.else_)
            parts.append(")")
        elif tt is Score:
            parts.append("(score ")
            go(t.arg)
            parts.append(")")
        else:
            raise TypeError(f"not a term: {t!r}")

    go(t)
    return "".join(parts)


def parse_core(text: str) -> Term:
    """Inverse of :func:`pretty`."""
    return _from_sexpr(read_one(text))


def _name(x, what: str) -> str:
    if not isinstance(x, Symbol) or x.name in _KEYWORDS:
        raise ParseError(f"expected {what}", getattr(x, "line", None), getattr(x, "col", None))
    return x.name


def _value(x) -> Term:
    t = _from_sexpr(x)
    if not is_value(t):
        raise ParseError("expected a value", x.line, x.col)
    return t


def _from_sexpr(x) -> Term:
    if isinstance(x, Number):
        return Const(x.value)
    if isinstance(x, Symbol):
        if x.name == "fail":
            return FAIL
        return Var(_name(x, "variable"))
    if not isinstance(x, SList) or not x.items or not isinstance(x[0], Symbol):
        raise ParseError("expected a core form", x.line, x.col)
    head = x[0].name
    n = len(x)
    if head == "lambda" and n == 3:
        return Lam(_name(x[1], "parameter"), _from_sexpr(x[2]))
    if head == "app" and n == 3:
        return App(_from_sexpr(x[1]), _from_sexpr(x[2]))
    if head in ("draw", "prim") and n >= 2:
        ident = x[1]
        if not isinstance(ident, Symbol):
            raise ParseError(f"expected {head} identifier", x.line, x.col)
        args = tuple(_value(a) for a in x.items[2:])
        return Draw(ident.name, args) if head == "draw" else Prim(ident.name, args)
    if head == "if" and n == 4:
        return If(_value(x[1]), _from_sexpr(x[2]), _from_sexpr(x[3]))
    if head == "score" and n == 2:
        return Score(_value(x[1]))
    raise ParseError(f"malformed '{head}' form", x.line, x.col)


def size(t: Term) -> int:
    n = 0
    stack = [t]
    while stack:
        u = stack.pop()
        n += 1
        tt = type(u)
        if tt is Lam:
            stack.append(u.body)
        elif tt is App:
            stack += (u.fn, u.arg)
        elif tt is Draw or tt is Prim:
            stack += u.args
        elif tt is If:
            stack += (u.cond, u.then, u.else_)
        elif tt is Score:
            stack.append(u.arg)
    return n
