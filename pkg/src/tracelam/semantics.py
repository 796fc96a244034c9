"""Reference trace semantics of the core calculus.

Two independent evaluators over substitution-based terms:

* a small-step machine on triples ``(term, weight, remaining trace)`` that
  locates the unique redex with :func:`~tracelam.terms.focus` at every step;
* a big-step evaluator run as an explicit continuation stack, so deep
  fixpoint recursion cannot overflow the host stack.

Weights are carried as log-weights (``-inf`` for weight zero).
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from .registry import REGISTRY, InvalidParams, Registry
from .terms import (
    FAIL,
    TRUE,
    App,
    Const,
    Draw,
    Fail,
    If,
    Lam,
    OpenTermError,
    Prim,
    RedexKind,
    Score,
    Term,
    Var,
    focus,
    free_vars,
    is_erroneous,
    is_generalized_value,
    plug_frames,
    pretty,
    subst,
)

DEFAULT_FUEL = 10**6
NEG_INF = float("-inf")

Trace = tuple


class Status(enum.Enum):
    COMPLETED = "completed"
    TRACE_MISMATCH = "trace-mismatch"
    FUEL_EXHAUSTED = "fuel-exhausted"


class NoDetRedex(Exception):
    """The term is a generalized value or its redex is a draw or a score."""


class Stuck(Exception):
    """No small-step rule applies: a generalized value, or a draw with an empty trace."""


class MachineState(NamedTuple):
    term: Term
    log_weight: float
    remaining: Trace

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)


@dataclass(frozen=True)
class RunOutcome:
    result: Term | None  # a generalized value when completed
    log_weight: float
    status: Status
    steps: int = 0

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight) if self.status is Status.COMPLETED else 0.0

    @property
    def completed(self) -> bool:
        return self.status is Status.COMPLETED

    @property
    def is_value(self) -> bool:
        return self.status is Status.COMPLETED and type(self.result) is not Fail


def _consts(args) -> list[float]:
    return [a.value for a in args]


def _contract(redex: Term, kind: RedexKind, registry: Registry) -> Term:
    """Deterministic contraction of a pure redex (no trace, no weight)."""
    if kind is RedexKind.BETA:
        lam = redex.fn
        return subst(lam.body, lam.param, redex.arg)
    if kind is RedexKind.PRIM:
        spec = registry.prim(redex.prim, len(redex.args))
        return Const(float(spec.interp(*_consts(redex.args))))
    if kind is RedexKind.IF_TRUE:
        return redex.then
    if kind is RedexKind.IF_FALSE:
        return redex.else_
    if kind is RedexKind.ERROR:
        return FAIL
    raise NoDetRedex(kind)


def _require_closed(term: Term) -> None:
    fv = free_vars(term)
    if fv:
        raise OpenTermError(f"term has free variables {sorted(fv)}")


def det_step(state: MachineState, registry: Registry = REGISTRY) -> MachineState:
    """One deterministic reduction; weight and trace are untouched."""
    found = focus(state.term)
    if found is None:
        raise NoDetRedex("generalized value")
    frames, redex, kind = found
    if kind is RedexKind.FAIL:
        return MachineState(FAIL, state.log_weight, state.remaining)
    if kind is RedexKind.DRAW or kind is RedexKind.SCORE:
        raise NoDetRedex(kind.value)
    return MachineState(plug_frames(frames, _contract(redex, kind, registry)), state.log_weight, state.remaining)


def small_step(state: MachineState, registry: Registry = REGISTRY) -> MachineState:
    found = focus(state.term)
    if found is None:
        raise Stuck("generalized value")
    frames, redex, kind = found
    if kind is RedexKind.DRAW:
        if not state.remaining:
            raise Stuck("trace exhausted at a draw")
        c = state.remaining[0]
        lp = registry.dist(redex.dist, len(redex.args)).log_pdf(*_consts(redex.args), c)
        if lp == NEG_INF:
            return MachineState(plug_frames(frames, FAIL), NEG_INF, tuple(state.remaining[1:]))
        return MachineState(plug_frames(frames, Const(c)), state.log_weight + lp, tuple(state.remaining[1:]))
    if kind is RedexKind.SCORE:
        return MachineState(plug_frames(frames, TRUE), state.log_weight + math.log(redex.arg.value), state.remaining)
    if kind is RedexKind.FAIL:
        return MachineState(FAIL, state.log_weight, state.remaining)
    return MachineState(plug_frames(frames, _contract(redex, kind, registry)), state.log_weight, state.remaining)


class _Machine:
    """Small-step loop over a trace cursor; shared by run_small_step and peval."""

    __slots__ = ("term", "trace", "pos", "log_weight", "steps", "registry", "rng", "log")

    def __init__(self, term, trace, registry, rng=None, log=None):
        self.term = term
        self.trace = list(trace)
        self.pos = 0
        self.log_weight = 0.0
        self.steps = 0
        self.registry = registry
        self.rng = rng
        self.log = log

    def emit(self) -> None:
        if self.log is not None:
            self.log(
                {
                    "step": self.steps,
                    "term": pretty(self.term),
                    "weight": math.exp(self.log_weight),
                    "remaining": self.trace[self.pos :],
                }
            )

    def step(self) -> str:
        """Advance once. Returns 'value', 'stuck', 'pure' or 'draw'."""
        found = focus(self.term)
        if found is None:
            return "value"
        frames, redex, kind = found
        if kind is RedexKind.DRAW:
            spec = self.registry.dist(redex.dist, len(redex.args))
            params = _consts(redex.args)
            if self.pos == len(self.trace):
                if self.rng is None:
                    return "stuck"
                try:
                    self.trace.append(spec.sample(*params, self.rng))
                except InvalidParams:
                    self.trace.append(0.0)
            c = self.trace[self.pos]
            self.pos += 1
            lp = spec.log_pdf(*params, c)
            if lp == NEG_INF:
                self.term = plug_frames(frames, FAIL)
                self.log_weight = NEG_INF
            else:
                self.term = plug_frames(frames, Const(c))
                self.log_weight += lp
            kind_out = "draw"
        elif kind is RedexKind.SCORE:
            self.term = plug_frames(frames, TRUE)
            self.log_weight += math.log(redex.arg.value)
            kind_out = "pure"
        elif kind is RedexKind.FAIL:
            self.term = FAIL
            kind_out = "pure"
        else:
            self.term = plug_frames(frames, _contract(redex, kind, self.registry))
            kind_out = "pure"
        self.steps += 1
        self.emit()
        return kind_out


def _json_line_writer(fp) -> Callable[[dict], None]:
    def write(rec: dict) -> None:
        fp.write(json.dumps(rec) + "\n")

    return write


def run_small_step(
    term: Term,
    trace: Sequence[float] = (),
    fuel: int = DEFAULT_FUEL,
    registry: Registry = REGISTRY,
    log=None,
) -> RunOutcome:
    """Iterate :func:`small_step` from ``(term, 1, trace)``.

    ``log`` may be a callable taking a dict or a text file; one JSON record per
    reduction step is emitted (term, weight, remaining trace).
    """
    _require_closed(term)
    if log is not None and not callable(log):
        log = _json_line_writer(log)
    m = _Machine(term, trace, registry, log=log)
    m.emit()
    while True:
        if m.steps >= fuel and focus(m.term) is not None:
            return RunOutcome(None, NEG_INF, Status.FUEL_EXHAUSTED, m.steps)
        kind = m.step()
        if kind == "value":
            break
        if kind == "stuck":
            return RunOutcome(None, NEG_INF, Status.TRACE_MISMATCH, m.steps)
    if m.pos != len(m.trace):
        return RunOutcome(None, NEG_INF, Status.TRACE_MISMATCH, m.steps)
    return RunOutcome(m.term, m.log_weight, Status.COMPLETED, m.steps)


def peval_ex(term: Term, trace: Sequence[float], fuel: int = DEFAULT_FUEL, registry: Registry = REGISTRY):
    """Partial evaluation; returns ``(term, fuel_exhausted)``."""
    if not trace:
        return term, False
    _require_closed(term)
    m = _Machine(term, trace, registry)
    n = len(m.trace)
    while True:
        if m.steps >= fuel:
            return FAIL, True
        kind = m.step()
        if kind == "draw" and m.pos == n:
            return m.term, False
        if kind == "value" or kind == "stuck":
            return FAIL, False


def peval(term: Term, trace: Sequence[float], fuel: int = DEFAULT_FUEL, registry: Registry = REGISTRY) -> Term:
    """The term reached right after the step that consumes the last trace
    element, ``term`` itself for the empty trace, or ``fail`` if the run
    cannot be aligned with the trace. Fuel exhaustion also yields ``fail``;
    use :func:`peval_ex` to tell the two apart."""
    return peval_ex(term, trace, fuel, registry)[0]


# ---------------------------------------------------------------- big-step

_FN = 0
_ARG = 1


def _eval_big(
    term: Term,
    trace: list,
    fuel: int,
    registry: Registry,
    rng: random.Random | None,
    draws: list | None = None,
    exact: bool = True,
):
    """Returns (status, result, log_weight, steps); ``trace`` is extended in place when sampling.

    If ``draws`` is a list, ``(log_weight_so_far, log_pdf)`` is appended for every
    consumed element. With ``exact=False`` a run may finish with trace left over.
    """
    stack: list = []
    t = term
    pos = 0
    logw = 0.0
    steps = 0
    while True:
        steps += 1
        if steps > fuel:
            return Status.FUEL_EXHAUSTED, None, NEG_INF, steps
        tt = type(t)
        if tt is App:
            stack.append((_FN, t.arg))
            t = t.fn
            continue
        if tt is Const or tt is Lam or tt is Fail:
            res = t
        elif tt is Var:
            raise OpenTermError(f"free variable {t.name!r}")
        elif tt is If:
            if is_erroneous(t):
                res = FAIL
            else:
                t = t.then if t.cond.value == 1.0 else t.else_
                continue
        elif is_erroneous(t):
            res = FAIL
        elif tt is Draw:
            spec = registry.dist(t.dist, len(t.args))
            params = _consts(t.args)
            if pos == len(trace):
                if rng is None:
                    return Status.TRACE_MISMATCH, None, NEG_INF, steps
                try:
                    trace.append(spec.sample(*params, rng))
                except InvalidParams:
                    trace.append(0.0)
            c = trace[pos]
            pos += 1
            lp = spec.log_pdf(*params, c)
            if lp == NEG_INF:
                logw = NEG_INF
                res = FAIL
            else:
                logw += lp
                res = Const(c)
            if draws is not None:
                draws.append((logw, lp))
        elif tt is Prim:
            spec = registry.prim(t.prim, len(t.args))
            res = Const(float(spec.interp(*_consts(t.args))))
        elif tt is Score:
            logw += math.log(t.arg.value)
            res = TRUE
        else:
            raise TypeError(f"not a term: {t!r}")

        # hand ``res`` to the continuation; fail unwinds every frame
        done = False
        while True:
            if type(res) is Fail or not stack:
                done = True
                break
            tag, x = stack.pop()
            if tag == _FN:
                if type(res) is Const:
                    res = FAIL
                    continue
                stack.append((_ARG, res))
                t = x
            else:
                t = subst(x.body, x.param, res)
            break
        if done:
            if exact and pos != len(trace):
                return Status.TRACE_MISMATCH, None, NEG_INF, steps
            return Status.COMPLETED, res, logw, steps


def eval_big(
    term: Term,
    trace: Sequence[float] = (),
    fuel: int = DEFAULT_FUEL,
    registry: Registry = REGISTRY,
) -> RunOutcome:
    """Big-step run: completes only if the trace is consumed exactly."""
    _require_closed(term)
    status, res, logw, steps = _eval_big(term, list(trace), fuel, registry, None)
    return RunOutcome(res, logw, status, steps)


def trace_density(term: Term, trace: Sequence[float], fuel: int = DEFAULT_FUEL, registry: Registry = REGISTRY):
    """``(weight, result)`` of a run on ``trace``; ``(0, fail)`` when there is no completed run."""
    out = eval_big(term, trace, fuel, registry)
    if not out.completed:
        return 0.0, FAIL
    return math.exp(out.log_weight), out.result


def value_density(term: Term, trace: Sequence[float], fuel: int = DEFAULT_FUEL, registry: Registry = REGISTRY) -> float:
    """Weight of ``trace`` restricted to runs that end in a value."""
    w, g = trace_density(term, trace, fuel, registry)
    return 0.0 if type(g) is Fail else w


def forward_sample(
    term: Term,
    rng: random.Random,
    fuel: int = DEFAULT_FUEL,
    registry: Registry = REGISTRY,
) -> tuple[Trace, RunOutcome]:
    """Run ``term`` drawing each random choice fresh from its distribution.

    A draw whose parameters admit no sampler records ``0.0``, which has zero
    density there, so the run fails with weight 0.
    """
    _require_closed(term)
    trace: list = []
    status, res, logw, steps = _eval_big(term, trace, fuel, registry, rng)
    return tuple(trace), RunOutcome(res, logw, status, steps)
