"""Random closed terms and traces for differential and property testing.

Seed protocol: ``gen_case(seed)`` builds everything from ``random.Random(seed)``,
so a failing case is reproduced from its integer seed alone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .church import fix
from .semantics import forward_sample
from .terms import FAIL, App, Const, Draw, If, Lam, Prim, Score, Term, Var, let

__all__ = ["gen_term", "gen_trace", "gen_case", "Case"]

_CONSTS = (0.0, 1.0, 1.0, 0.0, 0.5, 2.0, -1.0, 0.3, 0.7)
_PRIMS2 = ("+", "-", "*", "<", ">", "=", "/", "<=")
_PRIMS1 = ("exp", "log", "sqr")


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"x{self.counter}"

    def const(self) -> Const:
        r = self.rng
        return Const(r.choice(_CONSTS) if r.random() < 0.8 else round(r.uniform(-2, 2), 3))

    def value(self, depth: int, scope: list, numeric: bool = False) -> Term:
        r = self.rng.random()
        if scope and r < (0.3 if numeric else 0.45):
            return Var(self.rng.choice(scope))
        if not numeric and depth > 0 and r < 0.6:
            x = self.fresh()
            return Lam(x, self.term(depth - 1, scope + [x]))
        if numeric and depth > 0 and r < 0.47:
            # an occasional abstraction where a number is expected exercises erroneous redexes
            x = self.fresh()
            return Lam(x, Var(x))
        return self.const()

    def cond(self, scope: list) -> Term:
        r = self.rng.random()
        if scope and r < 0.5:
            return Var(self.rng.choice(scope))
        if r < 0.9:
            return Const(self.rng.choice((0.0, 1.0)))
        return Const(0.5)

    def score_arg(self, scope: list) -> Term:
        r = self.rng.random()
        if scope and r < 0.3:
            return Var(self.rng.choice(scope))
        if r < 0.85:
            return Const(self.rng.choice((0.5, 0.25, 1.0, 0.9)))
        return Const(self.rng.choice((0.0, 1.5, -0.5)))

    def draw(self, depth: int, scope: list) -> Term:
        if self.rng.random() < 0.6:
            return Draw("rnd", ())
        m = self.value(depth, scope, numeric=True)
        v = Const(self.rng.choice((1.0, 0.5, 2.0))) if self.rng.random() < 0.8 else self.value(depth, scope, True)
        return Draw("Gaussian", (m, v))

    def term(self, depth: int, scope: list) -> Term:
        rng = self.rng
        if depth <= 0:
            k = rng.random()
            if k < 0.5:
                return self.draw(0, scope)
            if k < 0.6 and scope:
                return Prim(rng.choice(_PRIMS2), (self.value(0, scope, True), self.value(0, scope, True)))
            if k < 0.65:
                return Score(self.score_arg(scope))
            if k < 0.67:
                return FAIL
            return self.value(0, scope)
        choice = rng.choices(
            ("let", "app", "beta", "draw", "prim", "if", "score", "fail", "value", "loop", "constapp"),
            weights=(30, 6, 8, 14, 8, 10, 6, 2, 6, 5, 2),
        )[0]
        if choice == "let":
            x = self.fresh()
            bound = self.draw(depth - 1, scope) if rng.random() < 0.5 else self.term(depth - 1, scope)
            return let(x, bound, self.term(depth - 1, scope + [x]))
        if choice == "app":
            return App(self.term(depth - 1, scope), self.term(depth - 1, scope))
        if choice == "beta":
            x = self.fresh()
            return App(Lam(x, self.term(depth - 1, scope + [x])), self.value(depth - 1, scope))
        if choice == "draw":
            return self.draw(depth - 1, scope)
        if choice == "prim":
            if rng.random() < 0.25:
                return Prim(rng.choice(_PRIMS1), (self.value(depth - 1, scope, True),))
            return Prim(rng.choice(_PRIMS2), (self.value(depth - 1, scope, True), self.value(depth - 1, scope, True)))
        if choice == "if":
            return If(self.cond(scope), self.term(depth - 1, scope), self.term(depth - 1, scope))
        if choice == "score":
            return Score(self.score_arg(scope))
        if choice == "fail":
            return FAIL
        if choice == "loop":
            return self.loop()
        if choice == "constapp":
            return App(self.const(), self.term(depth - 1, scope))
        return self.value(depth - 1, scope)

    def loop(self) -> Term:
        """A fix-encoded geometric-style loop applied to a bias."""
        g, p, y = self.fresh(), self.fresh(), self.fresh()
        body = let(
            y,
            let("u", Draw("rnd", ()), Prim("<", (Var("u"), Var(p)))),
            If(Var(y), Const(0.0), let("r", App(Var(g), Var(p)), Prim("+", (Const(1.0), Var("r"))))),
        )
        bias = self.rng.choice((0.5, 0.7, 0.9))
        return App(fix(g, Lam(p, body)), Const(bias))


def gen_term(rng: random.Random, depth: int = 4) -> Term:
    """A random closed core term."""
    return _Gen(rng).term(depth, [])


def gen_trace(rng: random.Random, term: Term, fuel: int = 20_000) -> tuple:
    """A trace for ``term``: usually one that the program consumes exactly,
    sometimes perturbed (truncated, extended, or with an off-support entry)."""
    trace, _ = forward_sample(term, rng, fuel=fuel)
    trace = list(trace)
    r = rng.random()
    if r < 0.6:
        return tuple(trace)
    if r < 0.7 and trace:
        return tuple(trace[: rng.randrange(len(trace))])
    if r < 0.8:
        return tuple(trace + [rng.random()])
    if r < 0.9 and trace:
        i = rng.randrange(len(trace))
        trace[i] = rng.choice((1.5, -0.25, 0.999, 0.0))
        return tuple(trace)
    return tuple(rng.random() for _ in range(rng.randrange(4)))


@dataclass(frozen=True)
class Case:
    seed: int
    term: Term
    trace: tuple


def gen_case(seed: int, depth: int = 4) -> Case:
    rng = random.Random(seed)
    term = gen_term(rng, depth)
    return Case(seed, term, gen_trace(rng, term))
