"""Church-subset frontend: surface syntax, parser, and translation to core terms.

Grammar::

    e ::= c | x | (g e1 .. en) | (D e1 .. en) | (if e1 e2 e3)
        | (lambda (x1 .. xn) e) | (e1 e2 .. en)
    d ::= (define x e) | (define (f x1 .. xn) e)
    q ::= (query d1 .. dn e_out e_cond)

Extra sugar: multiadic ``and``, ``true``/``false``, unary ``(- e)``,
``(f)`` as application to ``0``, ``(score e)``, and ``fail``.

Generated binder names contain ``%``, which the reader rejects in user
identifiers, so the freshness side conditions of the translation hold by
construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .registry import REGISTRY, Registry
from .sexpr import Number, ParseError, SList, Symbol, read_all
from .terms import FAIL, App, Const, Draw, If, Lam, Prim, Score, Term, Var, let, parse_core

__all__ = [
    "ParseError",
    "TranslateError",
    "UnboundIdentifier",
    "SConst",
    "SVar",
    "SPrimCall",
    "SDistCall",
    "SIf",
    "SLambda",
    "SApp",
    "SFail",
    "Query",
    "parse",
    "parse_expr",
    "translate_expr",
    "translate_query",
    "fix",
    "compile_church",
    "load_model",
]


class TranslateError(ValueError):
    pass


class UnboundIdentifier(TranslateError):
    pass


@dataclass(frozen=True)
class SConst:
    value: float


@dataclass(frozen=True)
class SVar:
    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SPrimCall:
    """Primitive call. ``score`` is carried here too and becomes ``Score``."""

    prim: str
    args: tuple


@dataclass(frozen=True)
class SDistCall:
    dist: str
    args: tuple


@dataclass(frozen=True)
class SIf:
    cond: "SurfaceExpr"
    then: "SurfaceExpr"
    else_: "SurfaceExpr"


@dataclass(frozen=True)
class SLambda:
    params: tuple  # () for a thunk
    body: "SurfaceExpr"


@dataclass(frozen=True)
class SApp:
    fn: "SurfaceExpr"
    args: tuple


@dataclass(frozen=True)
class SFail:
    pass


SurfaceExpr = Union[SConst, SVar, SPrimCall, SDistCall, SIf, SLambda, SApp, SFail]


@dataclass(frozen=True)
class Query:
    defines: tuple  # ((name, SurfaceExpr), ...)
    output: SurfaceExpr
    condition: SurfaceExpr


KEYWORDS = frozenset({"query", "define", "lambda", "if", "and", "score", "true", "false", "fail"})
ALIASES = {"gaussian": "Gaussian"}


def _loc(x) -> tuple[int | None, int | None]:
    return (x.line or None, x.col or None)


class _Parser:
    def __init__(self, registry: Registry):
        self.registry = registry

    def _err(self, msg: str, node) -> ParseError:
        return ParseError(msg, *_loc(node))

    def resolve(self, name: str) -> str:
        return ALIASES.get(name, name)

    def builtin_kind(self, name: str) -> str | None:
        name = self.resolve(name)
        if name in self.registry.prims:
            return "prim"
        if name in self.registry.dists:
            return "dist"
        return None

    def binder(self, node) -> str:
        if not isinstance(node, Symbol):
            raise self._err("expected an identifier", node)
        name = node.name
        if "%" in name:
            raise self._err(f"identifier {name!r} uses the reserved character '%'", node)
        if name in KEYWORDS or name == "mem":
            raise self._err(f"cannot bind reserved word {name!r}", node)
        if self.builtin_kind(name):
            raise self._err(f"cannot shadow built-in {name!r}", node)
        return name

    def expr(self, node) -> SurfaceExpr:
        if isinstance(node, Number):
            return SConst(node.value)
        if isinstance(node, Symbol):
            name = node.name
            if name == "true":
                return SConst(1.0)
            if name == "false":
                return SConst(0.0)
            if name == "fail":
                return SFail()
            if "%" in name:
                raise self._err(f"identifier {name!r} uses the reserved character '%'", node)
            if name in KEYWORDS:
                raise self._err(f"misplaced keyword {name!r}", node)
            return SVar(self.resolve(name), node.line, node.col)
        assert isinstance(node, SList)
        if len(node) == 0:
            raise self._err("empty application", node)
        head = node[0]
        rest = node.items[1:]
        if isinstance(head, Symbol):
            h = head.name
            if h == "if":
                if len(rest) != 3:
                    raise self._err("if takes exactly three expressions", node)
                return SIf(*(self.expr(x) for x in rest))
            if h == "and":
                return self._and([self.expr(x) for x in rest])
            if h == "lambda":
                return self._lambda(node, rest)
            if h in ("define", "query"):
                raise self._err(f"{h!r} is only allowed at the top level of a query", node)
            if h == "score":
                if len(rest) != 1:
                    raise self._err("score takes exactly one argument", node)
                return SPrimCall("score", (self.expr(rest[0]),))
            kind = self.builtin_kind(h)
            if kind == "prim":
                name = self.resolve(h)
                args = tuple(self.expr(x) for x in rest)
                if name == "-" and len(args) == 1:
                    args = (SConst(0.0), args[0])
                arity = self.registry.prims[name].arity
                if len(args) != arity:
                    raise self._err(f"{name} takes {arity} argument(s), got {len(args)}", node)
                return SPrimCall(name, args)
            if kind == "dist":
                name = self.resolve(h)
                args = tuple(self.expr(x) for x in rest)
                arity = self.registry.dists[name].arity
                if len(args) != arity:
                    raise self._err(f"{name} takes {arity} parameter(s), got {len(args)}", node)
                return SDistCall(name, args)
        fn = self.expr(head)
        args = tuple(self.expr(x) for x in rest)
        if not args:
            args = (SConst(0.0),)
        return SApp(fn, args)

    def _and(self, parts: list) -> SurfaceExpr:
        if not parts:
            return SConst(1.0)
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = SIf(p, out, SConst(0.0))
        return out

    def _lambda(self, node, rest) -> SLambda:
        if len(rest) != 2:
            raise self._err("lambda takes a parameter list and one body", node)
        params_node, body = rest
        if isinstance(params_node, Symbol):
            params = (self.binder(params_node),)
        elif isinstance(params_node, SList):
            params = tuple(self.binder(p) for p in params_node.items)
        else:
            raise self._err("malformed lambda parameters", params_node)
        return SLambda(params, self.expr(body))

    def define(self, node) -> tuple[str, SurfaceExpr]:
        if len(node) != 3:
            raise self._err("define takes a name and one expression", node)
        target, body = node[1], node[2]
        if isinstance(target, SList):
            if len(target) == 0:
                raise self._err("define needs a function name", target)
            name = self.binder(target[0])
            params = tuple(self.binder(p) for p in target.items[1:])
            return name, SLambda(params, self.expr(body))
        return self.binder(target), self.expr(body)

    def query(self, node) -> Query:
        if not (isinstance(node, SList) and len(node) and isinstance(node[0], Symbol) and node[0].name == "query"):
            raise self._err("expected (query ...)", node)
        items = node.items[1:]
        defs = []
        i = 0
        while i < len(items) and _is_define(items[i]):
            defs.append(self.define(items[i]))
            i += 1
        tail = items[i:]
        if len(tail) != 2:
            raise self._err(f"query needs an output and a condition expression after the defines, got {len(tail)}", node)
        seen: set[str] = set()
        for (name, _), d in zip(defs, items):
            if name in seen:
                raise self._err(f"duplicate define {name!r}", d)
            seen.add(name)
        return Query(tuple(defs), self.expr(tail[0]), self.expr(tail[1]))


def _is_define(node) -> bool:
    return isinstance(node, SList) and len(node) > 0 and isinstance(node[0], Symbol) and node[0].name == "define"


def parse(source: str, registry: Registry = REGISTRY) -> Query:
    data = read_all(source)
    if len(data) != 1:
        raise ParseError(f"expected exactly one query, found {len(data)} top-level forms")
    return _Parser(registry).query(data[0])


def parse_expr(source: str, registry: Registry = REGISTRY) -> SurfaceExpr:
    data = read_all(source)
    if len(data) != 1:
        raise ParseError(f"expected exactly one expression, found {len(data)}")
    return _Parser(registry).expr(data[0])


class _Translator:
    def __init__(self, registry: Registry):
        self.registry = registry
        self.counter = itertools.count(1)

    def fresh(self) -> str:
        return f"%{next(self.counter)}"

    def let_chain(self, args, scope, build) -> Term:
        names = [self.fresh() for _ in args]
        body = build(tuple(Var(n) for n in names))
        for n, a in zip(reversed(names), reversed(args)):
            body = let(n, self.expr(a, scope), body)
        return body

    def expr(self, e: SurfaceExpr, scope: frozenset) -> Term:
        te = type(e)
        if te is SConst:
            return Const(e.value)
        if te is SFail:
            return FAIL
        if te is SVar:
            if e.name in scope:
                return Var(e.name)
            if e.name == "mem":
                raise TranslateError("mem (stochastic memoization) is not supported")
            if e.name in self.registry.prims:
                return self.eta_prim(e.name)
            if e.name in self.registry.dists:
                return self.eta_dist(e.name)
            where = f"{e.line}:{e.col}: " if e.line else ""
            raise UnboundIdentifier(f"{where}unbound identifier {e.name!r}")
        if te is SPrimCall:
            if e.prim == "score":
                return self.let_chain(e.args, scope, lambda xs: Score(xs[0]))
            return self.let_chain(e.args, scope, lambda xs: Prim(e.prim, xs))
        if te is SDistCall:
            return self.let_chain(e.args, scope, lambda xs: Draw(e.dist, xs))
        if te is SIf:
            x = self.fresh()
            return let(x, self.expr(e.cond, scope), If(Var(x), self.expr(e.then, scope), self.expr(e.else_, scope)))
        if te is SLambda:
            if not e.params:
                return Lam(self.fresh(), self.expr(e.body, scope))
            inner = scope | frozenset(e.params)
            body = self.expr(e.body, inner)
            for p in reversed(e.params):
                body = Lam(p, body)
            return body
        if te is SApp:
            out = self.expr(e.fn, scope)
            for a in e.args:
                out = App(out, self.expr(a, scope))
            return out
        raise TypeError(f"not a surface expression: {e!r}")

    def eta_prim(self, name: str) -> Term:
        xs = [self.fresh() for _ in range(self.registry.prims[name].arity)]
        body: Term = Prim(name, tuple(Var(x) for x in xs))
        for x in reversed(xs):
            body = Lam(x, body)
        return body

    def eta_dist(self, name: str) -> Term:
        arity = self.registry.dists[name].arity
        xs = [self.fresh() for _ in range(arity)]
        body: Term = Draw(name, tuple(Var(x) for x in xs))
        if not xs:
            return Lam(self.fresh(), body)
        for x in reversed(xs):
            body = Lam(x, body)
        return body


def fix(x: str, m: Term) -> Term:
    """Call-by-value fixpoint ``fix x.M = λy. N N (λx.M) y``,
    ``N = λz.λw. w (λy. ((z z) w) y)``."""
    y, z, w = Var("%y"), Var("%z"), Var("%w")
    n = Lam("%z", Lam("%w", App(w, Lam("%y", App(App(App(z, z), w), y)))))
    return Lam("%y", App(App(App(n, n), Lam(x, m)), y))


def translate_expr(e: SurfaceExpr, scope=frozenset(), registry: Registry = REGISTRY) -> Term:
    return _Translator(registry).expr(e, frozenset(scope))


def translate_query(q: Query, registry: Registry = REGISTRY) -> Term:
    """Translate a query to a closed core term.

    Only abstraction-valued defines are wrapped in ``fix``; a non-function
    define is bound by a plain ``let`` so that its value is a number.
    """
    tr = _Translator(registry)
    scope: frozenset = frozenset()
    bounds = []
    for name, e in q.defines:
        if isinstance(e, SLambda):
            bounds.append((name, fix(name, tr.expr(e, scope | {name}))))
        else:
            bounds.append((name, tr.expr(e, scope)))
        scope = scope | {name}
    b = tr.fresh()
    body = let(b, tr.expr(q.condition, scope), If(Var(b), tr.expr(q.output, scope), FAIL))
    for name, bound in reversed(bounds):
        body = let(name, bound, body)
    return body


def compile_church(source: str, registry: Registry = REGISTRY) -> Term:
    return translate_query(parse(source, registry), registry)


def load_model(path: str | Path, registry: Registry = REGISTRY) -> Term:
    """Load a ``.church`` query or a ``.core`` term (canonical core syntax)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".core":
        return parse_core(text)
    return compile_church(text, registry)
