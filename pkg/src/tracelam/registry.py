"""Distribution and primitive-function registry.

Each distribution carries a density (a sub-probability density in the point
argument) and a forward sampler; each primitive is a total function on reals.
Comparisons return ``1.0`` / ``0.0``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .terms import App, Draw, If, Lam, Prim, Score, Term


class RegistryError(ValueError):
    pass


class UnknownDist(RegistryError, LookupError):
    pass


class UnknownPrim(RegistryError, LookupError):
    pass


class ArityMismatch(RegistryError):
    pass


class InvalidParams(RegistryError):
    """The parameters describe no samplable distribution (e.g. a Gaussian with variance <= 0)."""


@dataclass(frozen=True)
class DistSpec:
    id: str
    arity: int
    pdf: Callable[..., float]
    log_pdf: Callable[..., float]
    sample: Callable[..., float]


@dataclass(frozen=True)
class PrimSpec:
    id: str
    arity: int
    interp: Callable[..., float]


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_NEG_INF = float("-inf")


def _rnd_pdf(c: float) -> float:
    return 1.0 if 0.0 <= c <= 1.0 else 0.0


def _rnd_log_pdf(c: float) -> float:
    return 0.0 if 0.0 <= c <= 1.0 else _NEG_INF


def _rnd_sample(rng: random.Random) -> float:
    return rng.random()


def _gaussian_pdf(m: float, v: float, c: float) -> float:
    if not v > 0.0:
        return 0.0
    try:
        p = 1.0 / (math.exp((c - m) ** 2 / (2.0 * v)) * math.sqrt(2.0 * v * math.pi))
    except OverflowError:
        return 0.0
    return p if p > 0.0 else 0.0


def _gaussian_log_pdf(m: float, v: float, c: float) -> float:
    if not v > 0.0 or v == math.inf:
        return _NEG_INF
    d = c - m
    lp = -(d * d) / (2.0 * v) - 0.5 * math.log(v) - _LOG_SQRT_2PI
    return lp if lp == lp else _NEG_INF


def _gaussian_sample(m: float, v: float, rng: random.Random) -> float:
    if not (v > 0.0 and math.isfinite(v) and math.isfinite(m)):
        raise InvalidParams(f"Gaussian({m}, {v}) is not samplable")
    return rng.gauss(m, math.sqrt(v))


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _log(x: float) -> float:
    if x > 0.0:
        return math.log(x)
    if x == 0.0:
        return _NEG_INF
    return math.nan


def _div(x: float, y: float) -> float:
    try:
        return x / y
    except ZeroDivisionError:
        if x == 0.0 or x != x:
            return math.nan
        return math.copysign(math.inf, x) * math.copysign(1.0, y)


def _b(flag: bool) -> float:
    return 1.0 if flag else 0.0


@dataclass
class Registry:
    dists: dict[str, DistSpec] = field(default_factory=dict)
    prims: dict[str, PrimSpec] = field(default_factory=dict)

    def add_dist(self, spec: DistSpec) -> None:
        self.dists[spec.id] = spec

    def add_prim(self, spec: PrimSpec) -> None:
        self.prims[spec.id] = spec

    def dist(self, ident: str, nargs: int | None = None) -> DistSpec:
        try:
            spec = self.dists[ident]
        except KeyError:
            raise UnknownDist(f"unknown distribution {ident!r}") from None
        if nargs is not None and nargs != spec.arity:
            raise ArityMismatch(f"{ident} takes {spec.arity} parameter(s), got {nargs}")
        return spec

    def prim(self, ident: str, nargs: int | None = None) -> PrimSpec:
        try:
            spec = self.prims[ident]
        except KeyError:
            raise UnknownPrim(f"unknown primitive {ident!r}") from None
        if nargs is not None and nargs != spec.arity:
            raise ArityMismatch(f"{ident} takes {spec.arity} argument(s), got {nargs}")
        return spec


def default_registry() -> Registry:
    reg = Registry()
    reg.add_dist(DistSpec("rnd", 0, _rnd_pdf, _rnd_log_pdf, _rnd_sample))
    reg.add_dist(DistSpec("Gaussian", 2, _gaussian_pdf, _gaussian_log_pdf, _gaussian_sample))
    for ident, arity, fn in [
        ("+", 2, lambda x, y: x + y),
        ("-", 2, lambda x, y: x - y),
        ("*", 2, lambda x, y: x * y),
        ("/", 2, _div),
        ("<", 2, lambda x, y: _b(x < y)),
        (">", 2, lambda x, y: _b(x > y)),
        ("=", 2, lambda x, y: _b(x == y)),
        ("<=", 2, lambda x, y: _b(x <= y)),
        (">=", 2, lambda x, y: _b(x >= y)),
        ("exp", 1, _exp),
        ("log", 1, _log),
        ("sqr", 1, lambda x: x * x),
    ]:
        reg.add_prim(PrimSpec(ident, arity, fn))
    return reg


REGISTRY = default_registry()


def pdf(dist: str, params: Sequence[float], point: float, registry: Registry = REGISTRY) -> float:
    return registry.dist(dist, len(params)).pdf(*params, point)


def log_pdf(dist: str, params: Sequence[float], point: float, registry: Registry = REGISTRY) -> float:
    """Natural log of :func:`pdf`; ``-inf`` wherever the density is zero."""
    return registry.dist(dist, len(params)).log_pdf(*params, point)


def sample(dist: str, params: Sequence[float], rng: random.Random, registry: Registry = REGISTRY) -> float:
    return registry.dist(dist, len(params)).sample(*params, rng)


def apply_prim(prim: str, args: Sequence[float], registry: Registry = REGISTRY) -> float:
    return float(registry.prim(prim, len(args)).interp(*args))


def validate(term: Term, registry: Registry = REGISTRY) -> None:
    """Check that every draw/primitive names a registered identifier at its arity."""
    stack = [term]
    while stack:
        t = stack.pop()
        tt = type(t)
        if tt is Draw:
            registry.dist(t.dist, len(t.args))
            stack += t.args
        elif tt is Prim:
            registry.prim(t.prim, len(t.args))
            stack += t.args
        elif tt is Lam:
            stack.append(t.body)
        elif tt is App:
            stack += (t.fn, t.arg)
        elif tt is If:
            stack += (t.cond, t.then, t.else_)
        elif tt is Score:
            stack.append(t.arg)


def known_names(registry: Registry = REGISTRY) -> Mapping[str, str]:
    names = {k: "dist" for k in registry.dists}
    names.update({k: "prim" for k in registry.prims})
    return names
