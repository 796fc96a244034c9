"""Built-in semantic law checks over random closed terms (``tracelam check``)."""

from __future__ import annotations

import math
import random
import sys
from typing import Callable, TextIO

from .compiled import Program
from .gen import gen_case, gen_term
from .semantics import DEFAULT_FUEL, Status, eval_big, forward_sample, peval, run_small_step
from .terms import Redex, decompose, parse_core, plug, pretty

__all__ = ["weights_close", "agree", "check_theorem1", "check_peval_assoc", "check_compiled", "check_roundtrip", "run_checks"]

FUEL = 20_000


def weights_close(a: float, b: float, rel: float = 1e-12) -> bool:
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= rel * max(abs(a), abs(b))


def agree(x, y, rel: float = 1e-12) -> bool:
    """Same status, same generalized value, and log-weights within ``rel``."""
    if x.status is not y.status:
        return False
    if x.status is not Status.COMPLETED:
        return True
    return x.result == y.result and weights_close(x.log_weight, y.log_weight, rel)


def check_theorem1(seed: int) -> bool:
    c = gen_case(seed, depth=5)
    big = eval_big(c.term, c.trace, FUEL)
    small = run_small_step(c.term, c.trace, FUEL)
    if Status.FUEL_EXHAUSTED in (big.status, small.status):
        return True  # the two evaluators count steps differently
    return agree(big, small)


def split_case(seed: int):
    """(M, s, t) with s@t drawn mostly from traces the program actually consumes."""
    rng = random.Random(seed)
    term = gen_term(rng, 5)
    full, _ = forward_sample(term, rng, fuel=FUEL)
    full = list(full)
    if rng.random() < 0.3:
        full += [rng.random() for _ in range(rng.randrange(3))]
    if full and rng.random() < 0.2:
        full[rng.randrange(len(full))] = rng.choice((1.5, -0.5))
    i = rng.randrange(len(full) + 1)
    return term, tuple(full[:i]), tuple(full[i:])


def check_peval_assoc(seed: int) -> bool:
    m, s, t = split_case(seed)
    return peval(peval(m, s, FUEL), t, FUEL) == peval(m, s + t, FUEL)


def check_compiled(seed: int) -> bool:
    c = gen_case(seed, depth=5)
    ref = eval_big(c.term, c.trace, FUEL)
    if ref.status is Status.FUEL_EXHAUSTED:
        return True
    prog = Program(c.term)
    run = prog.run(c.trace, fuel=DEFAULT_FUEL)
    if run.status is not ref.status:
        return False
    if ref.status is not Status.COMPLETED:
        return True
    return prog.result_term(run) == ref.result and weights_close(run.log_weight, ref.log_weight, 1e-12)


def check_roundtrip(seed: int) -> bool:
    c = gen_case(seed, depth=5)
    if parse_core(pretty(c.term)) != c.term:
        return False
    d = decompose(c.term)
    return d == c.term if not isinstance(d, Redex) else plug(d.context, d.term) == c.term


CHECKS: list[tuple[str, Callable[[int], bool]]] = [
    ("theorem1: big-step == small-step", check_theorem1),
    ("peval associativity", check_peval_assoc),
    ("compiled == reference", check_compiled),
    ("decompose/plug and pretty/parse round trips", check_roundtrip),
]


def run_checks(cases: int = 500, seed: int = 0, out: TextIO = sys.stdout) -> bool:
    ok = True
    for name, fn in CHECKS:
        failed = [s for s in range(seed, seed + cases) if not fn(s)]
        if failed:
            ok = False
            print(f"FAIL {name}: {len(failed)}/{cases} cases, first seeds {failed[:5]}", file=out)
        else:
            print(f"PASS {name} ({cases} cases)", file=out)
    return ok
