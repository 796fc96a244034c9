"""Compiled evaluator for closed core terms.

Closed terms are translated to Python source: abstractions become nested
functions, ``let``-shaped redexes become plain assignments, and ``fail``
becomes an exception. The compiled program follows the same call-by-value,
left-to-right order as the reference big-step evaluator, so it consumes the
trace and accumulates the weight identically; it exists because inference
runs programs hundreds of thousands of times.

Each run also records a profile: the cumulative log-weight right after every
consumed trace element. That is what trace MH needs to evaluate the tail
density of a partially evaluated program without re-running it.
"""

from __future__ import annotations

import math
import random
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

from . import semantics
from .church import fix
from .registry import REGISTRY, InvalidParams, Registry, validate
from .semantics import DEFAULT_FUEL, NEG_INF, Status
from .terms import FAIL, App, Const, Draw, Fail, If, Lam, OpenTermError, Prim, Score, Term, Var, free_vars

__all__ = ["Program", "Run", "as_program"]


class _Fail(Exception):
    pass


class _Mismatch(Exception):
    pass


class _OutOfFuel(Exception):
    pass


# raise the classes, not shared instances: re-raising one instance chains its traceback
_FAIL = _Fail
_MISMATCH = _Mismatch
_OUT_OF_FUEL = _OutOfFuel


class _State:
    __slots__ = ("trace", "pos", "logw", "fuel", "rng", "cum", "lpdf")

    def __init__(self, trace: list, rng, fuel: int):
        self.trace = trace
        self.pos = 0
        self.logw = 0.0
        self.fuel = fuel
        self.rng = rng
        self.cum: list[float] = []
        self.lpdf: list[float] = []


def _make_draw(spec):
    log_pdf = spec.log_pdf
    sampler = spec.sample

    def draw(st: _State, params: tuple) -> float:
        pos = st.pos
        tr = st.trace
        if pos == len(tr):
            if st.rng is None:
                raise _MISMATCH
            try:
                c = sampler(*params, st.rng)
            except InvalidParams:
                c = 0.0
            tr.append(c)
        else:
            c = tr[pos]
        st.pos = pos + 1
        lp = log_pdf(*params, c)
        st.lpdf.append(lp)
        if lp == NEG_INF:
            st.logw = NEG_INF
            st.cum.append(NEG_INF)
            raise _FAIL
        st.logw += lp
        st.cum.append(st.logw)
        return c

    return draw


def _draw_rnd(st: _State) -> float:
    pos = st.pos
    tr = st.trace
    if pos == len(tr):
        if st.rng is None:
            raise _MISMATCH
        c = st.rng.random()
        tr.append(c)
    else:
        c = tr[pos]
    st.pos = pos + 1
    if 0.0 <= c <= 1.0:
        st.lpdf.append(0.0)
        st.cum.append(st.logw)
        return c
    st.lpdf.append(NEG_INF)
    st.logw = NEG_INF
    st.cum.append(NEG_INF)
    raise _FAIL


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_gaussian_log_pdf = REGISTRY.dists["Gaussian"].log_pdf
_gaussian_sample = REGISTRY.dists["Gaussian"].sample


def _draw_gauss(st: _State, m: float, v: float) -> float:
    pos = st.pos
    tr = st.trace
    if pos == len(tr):
        if st.rng is None:
            raise _MISMATCH
        try:
            c = _gaussian_sample(m, v, st.rng)
        except InvalidParams:
            c = 0.0
        tr.append(c)
    else:
        c = tr[pos]
    st.pos = pos + 1
    lp = _gaussian_log_pdf(m, v, c)
    st.lpdf.append(lp)
    if lp == NEG_INF:
        st.logw = NEG_INF
        st.cum.append(NEG_INF)
        raise _FAIL
    st.logw += lp
    st.cum.append(st.logw)
    return c


_INLINE_PRIMS = {
    "+": "({0} + {1})",
    "-": "({0} - {1})",
    "*": "({0} * {1})",
    "<": "(1.0 if {0} < {1} else 0.0)",
    ">": "(1.0 if {0} > {1} else 0.0)",
    "=": "(1.0 if {0} == {1} else 0.0)",
    "<=": "(1.0 if {0} <= {1} else 0.0)",
    ">=": "(1.0 if {0} >= {1} else 0.0)",
    "sqr": "({0} * {0})",
}


_DEAD = "None"  # atom returned after an unconditional raise; callers stop emitting


class _Codegen:
    def __init__(self, registry: Registry):
        self.registry = registry
        self.lines: list[str] = []
        self.ns: dict = {
            "_FAIL": _FAIL,
            "_OUT_OF_FUEL": _OUT_OF_FUEL,
            "_log": math.log,
            "_float": float,
            "_draw_rnd": _draw_rnd,
            "_draw_gauss": _draw_gauss,
        }
        self.counter = 0
        self.floats: set[str] = set()  # atoms statically known to hold reals
        self.funcs: set[str] = set()  # atoms naming compiled abstractions

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def emit(self, depth: int, line: str) -> None:
        self.lines.append("    " * depth + line)

    def const(self, c: float) -> str:
        if math.isfinite(c):
            atom = f"({c!r})"
        else:
            atom = self.fresh("_k")
            self.ns[atom] = c
        self.floats.add(atom)
        return atom

    def temp(self, depth: int, expr: str, is_float: bool = False) -> str:
        out = self.fresh("_t")
        self.emit(depth, f"{out} = {expr}")
        if is_float:
            self.floats.add(out)
        return out

    def _float_check(self, atom: str, depth: int) -> None:
        self.emit(depth, f"if {atom}.__class__ is not float: raise _FAIL")

    def value_args(self, args, env: dict, depth: int) -> list[str] | None:
        """Atoms for draw/prim arguments; ``None`` if statically erroneous."""
        out = []
        for a in args:
            if type(a) is Lam:
                return None
            atom = self.expr(a, env, depth)
            if atom == _DEAD:
                return None
            if atom not in self.floats:
                self._float_check(atom, depth)
            out.append(atom)
        return out

    def fix(self, x: str, m: Lam, env: dict, depth: int) -> str:
        """``fix x.(λp.B)`` as a self-referential Python function."""
        fname = self.fresh("_f")
        pname = self.fresh("v")
        self.emit(depth, f"def {fname}({pname}):")
        self.emit(depth + 1, "st.fuel -= 1")
        self.emit(depth + 1, "if st.fuel < 0: raise _OUT_OF_FUEL")
        inner = dict(env)
        inner[x] = fname
        inner[m.param] = pname
        res = self.expr(m.body, inner, depth + 1)
        self.emit(depth + 1, f"return {res}")
        self.funcs.add(fname)
        return fname

    def expr(self, t: Term, env: dict, depth: int) -> str:
        """Emit statements computing ``t``; return an atom naming its value."""
        tt = type(t)
        if tt is Const:
            return self.const(t.value)
        if tt is Var:
            try:
                return env[t.name]
            except KeyError:
                raise OpenTermError(f"free variable {t.name!r}") from None
        if tt is Fail:
            self.emit(depth, "raise _FAIL")
            return _DEAD
        if tt is Lam:
            rec = _match_fix(t)
            if rec is not None:
                return self.fix(rec[0], rec[1], env, depth)
            fname = self.fresh("_f")
            pname = self.fresh("v")
            self.emit(depth, f"def {fname}({pname}):")
            self.emit(depth + 1, "st.fuel -= 1")
            self.emit(depth + 1, "if st.fuel < 0: raise _OUT_OF_FUEL")
            inner = dict(env)
            inner[t.param] = pname
            res = self.expr(t.body, inner, depth + 1)
            self.emit(depth + 1, f"return {res}")
            self.funcs.add(fname)
            return fname
        if tt is App:
            if type(t.fn) is Lam:
                # let-shaped redex: atoms are never reassigned, so bind by aliasing
                arg = self.expr(t.arg, env, depth)
                if arg == _DEAD:
                    return _DEAD
                inner = dict(env)
                inner[t.fn.param] = arg
                return self.expr(t.fn.body, inner, depth)
            if type(t.fn) is Const:
                self.emit(depth, "raise _FAIL")
                return _DEAD
            f = self.expr(t.fn, env, depth)
            if f == _DEAD:
                return _DEAD
            if f in self.floats:
                self.emit(depth, "raise _FAIL")
                return _DEAD
            if f not in self.funcs:
                self.emit(depth, f"if {f}.__class__ is float: raise _FAIL")
            a = self.expr(t.arg, env, depth)
            if a == _DEAD:
                return _DEAD
            return self.temp(depth, f"{f}({a})")
        if tt is Draw:
            spec = self.registry.dist(t.dist, len(t.args))
            args = self.value_args(t.args, env, depth)
            if args is None:
                self.emit(depth, "raise _FAIL")
                return _DEAD
            if spec is REGISTRY.dists.get("rnd") and t.dist == "rnd":
                return self.temp(depth, "_draw_rnd(st)", True)
            if spec is REGISTRY.dists.get("Gaussian") and t.dist == "Gaussian":
                return self.temp(depth, f"_draw_gauss(st, {args[0]}, {args[1]})", True)
            dname = self.fresh("_d")
            self.ns[dname] = _make_draw(spec)
            tup = "(" + "".join(a + ", " for a in args) + ")"
            return self.temp(depth, f"{dname}(st, {tup})", True)
        if tt is Prim:
            spec = self.registry.prim(t.prim, len(t.args))
            args = self.value_args(t.args, env, depth)
            if args is None:
                self.emit(depth, "raise _FAIL")
                return _DEAD
            if t.prim in _INLINE_PRIMS and spec is REGISTRY.prims.get(t.prim):
                return self.temp(depth, _INLINE_PRIMS[t.prim].format(*args), True)
            pname = self.fresh("_p")
            self.ns[pname] = spec.interp
            return self.temp(depth, f"_float({pname}({', '.join(args)}))", True)
        if tt is If:
            c = t.cond
            if type(c) is Lam or (type(c) is Const and c.value not in (0.0, 1.0)):
                self.emit(depth, "raise _FAIL")
                return _DEAD
            if type(c) is Const:
                return self.expr(t.then if c.value == 1.0 else t.else_, env, depth)
            v = self.expr(c, env, depth)
            if v == _DEAD:
                return _DEAD
            out = self.fresh("_t")
            # a function never compares equal to a float
            self.emit(depth, f"if {v} == 1.0:")
            a = self.expr(t.then, env, depth + 1)
            self.emit(depth + 1, f"{out} = {a}")
            self.emit(depth, f"elif {v} == 0.0:")
            b = self.expr(t.else_, env, depth + 1)
            self.emit(depth + 1, f"{out} = {b}")
            self.emit(depth, "else:")
            self.emit(depth + 1, "raise _FAIL")
            if all(x in self.floats or x == _DEAD for x in (a, b)):
                self.floats.add(out)
            return out
        if tt is Score:
            a = t.arg
            if type(a) is Lam or (type(a) is Const and not 0.0 < a.value <= 1.0):
                self.emit(depth, "raise _FAIL")
                return _DEAD
            v = self.expr(a, env, depth)
            if v == _DEAD:
                return _DEAD
            if v in self.floats:
                self.emit(depth, f"if not 0.0 < {v} <= 1.0: raise _FAIL")
            else:
                self.emit(depth, f"if {v}.__class__ is not float or not 0.0 < {v} <= 1.0: raise _FAIL")
            self.emit(depth, f"st.logw += _log({v})")
            return self.const(1.0)
        raise TypeError(f"not a term: {t!r}")


def _fix_parts():
    probe = fix("x", Var("x"))
    n = probe.body.fn.fn.fn
    return probe.param, n


_FIX_Y, _FIX_N = _fix_parts()


def _match_fix(t: Lam):
    """Recognise ``λy. N N (λx.M) y`` with M an abstraction; return (x, M)."""
    b = t.body
    if not (type(b) is App and type(b.arg) is Var and b.arg.name == t.param):
        return None
    f = b.fn
    if not (type(f) is App and type(f.arg) is Lam and type(f.fn) is App):
        return None
    if not (f.fn.fn == _FIX_N and f.fn.arg == _FIX_N):
        return None
    lam = f.arg
    if type(lam.body) is not Lam or t.param in free_vars(lam):
        return None
    return lam.param, lam.body


def _compile(term: Term, registry: Registry):
    gen = _Codegen(registry)
    gen.emit(0, "def _run(st):")
    res = gen.expr(term, {}, 1)
    gen.emit(1, f"return {res}")
    source = "\n".join(gen.lines)
    ns = dict(gen.ns)
    exec(compile(source, "<tracelam-compiled>", "exec"), ns)
    return ns["_run"], source


@dataclass(frozen=True)
class Run:
    """One execution of a compiled program against a trace.

    ``cumulative[i]`` is the log-weight right after the ``i+1``-th element was
    consumed; ``draw_log_pdfs[i]`` is the log-density of that element alone.
    """

    status: Status
    value: object  # float, a Python callable for abstractions, or FAIL
    log_weight: float
    trace: tuple
    consumed: int
    cumulative: tuple
    draw_log_pdfs: tuple

    @property
    def completed(self) -> bool:
        return self.status is Status.COMPLETED

    @property
    def is_value(self) -> bool:
        return self.status is Status.COMPLETED and self.value is not FAIL

    @property
    def value_log_weight(self) -> float:
        """Log of the value-restricted trace density."""
        return self.log_weight if self.is_value and self.consumed == len(self.trace) else NEG_INF

    def log_weight_at(self, k: int) -> float:
        """Log-weight right after consuming ``k`` elements (0 before any)."""
        return 0.0 if k == 0 else self.cumulative[k - 1]


class Program:
    """A closed core term compiled for repeated trace evaluation."""

    def __init__(self, term: Term, registry: Registry = REGISTRY, cache_size: int = 16):
        fv = free_vars(term)
        if fv:
            raise OpenTermError(f"term has free variables {sorted(fv)}")
        validate(term, registry)
        self.term = term
        self.registry = registry
        self._fn, self.source = _compile(term, registry)
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    def run(self, trace: Sequence[float] = (), rng: random.Random | None = None, fuel: int = DEFAULT_FUEL) -> Run:
        """Evaluate against ``trace``. With ``rng``, draws past the end of the
        trace are sampled fresh and appended instead of failing to match."""
        if rng is None:
            key = (tuple(trace), fuel)
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        st = _State(list(trace), rng, fuel)
        try:
            value = self._fn(st)
            status = Status.COMPLETED
        except _Fail:
            value = FAIL
            status = Status.COMPLETED
        except _Mismatch:
            value, status = None, Status.TRACE_MISMATCH
        except _OutOfFuel:
            value, status = None, Status.FUEL_EXHAUSTED
        except RecursionError:
            return self._reference_run(trace, rng, fuel)
        logw = st.logw
        if status is Status.COMPLETED and rng is None and st.pos != len(st.trace):
            status = Status.TRACE_MISMATCH
        if status is not Status.COMPLETED:
            logw = NEG_INF
        out = Run(status, value, logw, tuple(st.trace), st.pos, tuple(st.cum), tuple(st.lpdf))
        if rng is None:
            self._cache[key] = out
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return out

    def remember(self, run: Run, fuel: int = DEFAULT_FUEL) -> None:
        """Cache a run obtained elsewhere (e.g. while sampling) as the plain run of its trace."""
        key = (run.trace, fuel)
        self._cache[key] = run
        self._cache.move_to_end(key)
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)

    def _reference_run(self, trace, rng, fuel) -> Run:
        # the iterative big-step evaluator needs no host stack, whatever the depth
        buf = list(trace)
        draws: list = []
        status, res, logw, _ = semantics._eval_big(self.term, buf, fuel, self.registry, rng, draws, exact=rng is None)
        cum = tuple(d[0] for d in draws)
        lpdf = tuple(d[1] for d in draws)
        if status is not Status.COMPLETED:
            return Run(status, None, NEG_INF, tuple(buf), len(draws), cum, lpdf)
        value = FAIL if type(res) is Fail else (res.value if type(res) is Const else _Readback(res))
        return Run(status, value, logw, tuple(buf), len(draws), cum, lpdf)

    def forward(self, rng: random.Random, fuel: int = DEFAULT_FUEL) -> Run:
        return self.run((), rng, fuel)

    def log_density(self, trace: Sequence[float], fuel: int = DEFAULT_FUEL) -> float:
        r = self.run(trace, fuel=fuel)
        return r.log_weight if r.completed else NEG_INF

    def value_log_density(self, trace: Sequence[float], fuel: int = DEFAULT_FUEL) -> float:
        return self.run(trace, fuel=fuel).value_log_weight

    def result_term(self, run: Run) -> Term | None:
        """The generalized value of a completed run as a core term."""
        if not run.completed:
            return None
        v = run.value
        if v is FAIL:
            return FAIL
        if type(v) is float:
            return Const(v)
        if isinstance(v, _Readback):
            return v.term
        # abstractions: recover the syntactic value from the reference evaluator
        out = semantics.eval_big(self.term, run.trace, registry=self.registry)
        return out.result


class _Readback:
    """Abstraction result produced by the reference fallback path."""

    __slots__ = ("term",)

    def __init__(self, term: Term):
        self.term = term


def as_program(model, registry: Registry = REGISTRY) -> Program:
    return model if isinstance(model, Program) else Program(model, registry)
