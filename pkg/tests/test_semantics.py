import io
import json
import math
import random
from collections import Counter

import pytest

from oracles import gauss_pdf, geometric_prior
from tracelam.church import compile_church
from tracelam.semantics import (
    MachineState,
    NoDetRedex,
    Status,
    Stuck,
    det_step,
    eval_big,
    forward_sample,
    peval,
    peval_ex,
    run_small_step,
    small_step,
    trace_density,
    value_density,
)
from tracelam.terms import FAIL, TRUE, App, AppL, Const, Draw, If, HOLE, Lam, OpenTermError, Prim, Score, Var, let, plug

I = Lam("x", Var("x"))

UNCONDITIONED_GEOMETRIC = """
(query
  (define (flip p) (< (rnd) p))
  (define (geometric p) (if (flip p) 0 (+ 1 (geometric p))))
  (geometric .5)
  true)
"""


@pytest.fixture(scope="module")
def plain_geometric():
    return compile_church(UNCONDITIONED_GEOMETRIC)


def st(term, trace=(), logw=0.0):
    return MachineState(term, logw, tuple(trace))


# det_step

def test_det_step_beta():
    out = det_step(st(App(I, Const(5)), [0.1], -1.0))
    assert out == st(Const(5), [0.1], -1.0)


def test_det_step_if_true_in_context():
    ctx = AppL(HOLE, Const(2))
    m = If(Const(1), Lam("y", Var("y")), Const(8))
    assert det_step(st(plug(ctx, m))).term == plug(ctx, Lam("y", Var("y")))


def test_det_step_erroneous():
    assert det_step(st(App(Const(3), Const(4)))).term == FAIL


def test_det_step_propagates_fail():
    assert det_step(st(App(FAIL, Const(4)))).term == FAIL


def test_det_step_prim():
    assert det_step(st(Prim("+", (Const(2), Const(3))))).term == Const(5)


@pytest.mark.parametrize("t", [Draw("rnd", ()), Score(Const(0.5)), Const(1), FAIL])
def test_det_step_refuses(t):
    with pytest.raises(NoDetRedex):
        det_step(st(t, [0.5]))


# small_step

def test_small_step_draw():
    assert small_step(st(Draw("rnd", ()), [0.7])) == st(Const(0.7))


def test_small_step_score():
    out = small_step(st(Score(Const(0.5))))
    assert out.term == TRUE and out.weight == 0.5 and out.remaining == ()


def test_small_step_draw_outside_support():
    out = small_step(st(Draw("rnd", ()), [1.5]))
    assert out.term == FAIL and out.weight == 0.0 and out.remaining == ()


def test_small_step_stuck_on_empty_trace():
    with pytest.raises(Stuck):
        small_step(st(Draw("rnd", ())))


# run_small_step

def test_run_small_step_geometric(geometric):
    out = run_small_step(geometric, [0.7, 0.8, 0.3])
    assert (out.status, out.result, out.weight) == (Status.COMPLETED, Const(2), 1.0)


def test_run_small_step_condition_fails(geometric):
    out = run_small_step(geometric, [0.3])
    assert (out.status, out.result, out.weight) == (Status.COMPLETED, FAIL, 1.0)


@pytest.mark.parametrize("g", [Const(5), I, FAIL])
def test_generalized_value_takes_no_steps(g):
    out = run_small_step(g, ())
    assert (out.status, out.result, out.weight, out.steps) == (Status.COMPLETED, g, 1.0, 0)


def test_run_small_step_leftover_trace():
    assert run_small_step(Const(1), [0.5]).status is Status.TRACE_MISMATCH
    assert run_small_step(Draw("rnd", ()), []).status is Status.TRACE_MISMATCH


def test_run_small_step_fuel():
    omega = App(Lam("x", App(Var("x"), Var("x"))), Lam("x", App(Var("x"), Var("x"))))
    out = run_small_step(omega, (), fuel=1000)
    assert out.status is Status.FUEL_EXHAUSTED
    assert eval_big(omega, (), fuel=1000).status is Status.FUEL_EXHAUSTED


def test_open_term_rejected():
    with pytest.raises(OpenTermError):
        run_small_step(Var("x"), ())


def test_reduction_log_is_json_lines(geometric):
    buf = io.StringIO()
    out = run_small_step(geometric, [0.7, 0.8, 0.3], log=buf)
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert len(lines) == out.steps + 1
    assert lines[0]["remaining"] == [0.7, 0.8, 0.3]
    assert lines[-1]["term"] == "2.0" and lines[-1]["remaining"] == []
    assert {"step", "term", "weight", "remaining"} <= set(lines[0])


# eval_big

def test_eval_big_gaussian_weight():
    out = eval_big(Draw("Gaussian", (Const(0), Const(1))), [0.0])
    assert out.result == Const(0.0)
    assert out.weight == pytest.approx(0.398942280401, rel=1e-11)


def test_eval_big_score():
    out = eval_big(Score(Const(0.3)), [])
    assert out.result == TRUE and out.weight == pytest.approx(0.3, rel=1e-15)


def test_eval_big_constant_application():
    out = eval_big(App(Const(3), App(I, Const(1))), [])
    assert out.result == FAIL and out.weight == 1.0


def test_eval_big_splits_trace_left_to_right():
    t = let("a", Draw("Gaussian", (Const(0), Const(1))), let("b", Draw("rnd", ()), Prim("-", (Var("a"), Var("b")))))
    out = eval_big(t, [1.0, 0.25])
    assert out.result == Const(0.75)
    assert out.weight == pytest.approx(gauss_pdf(0, 1, 1.0), rel=1e-12)


def test_eval_big_fail_short_circuits_trace():
    out = eval_big(App(FAIL, Draw("rnd", ())), [])
    assert out.result == FAIL and out.status is Status.COMPLETED


# peval

def test_peval_empty_trace(geometric):
    assert peval(geometric, []) is geometric


def test_peval_one_flip(geometric):
    rest = peval(geometric, [0.7])
    assert rest != FAIL
    whole = eval_big(geometric, [0.7, 0.8, 0.3])
    cont = eval_big(rest, [0.8, 0.3])
    assert (cont.result, cont.log_weight) == (whole.result, whole.log_weight)
    assert run_small_step(rest, [0.8, 0.3]).result == Const(2)


def test_peval_misaligned(geometric):
    assert peval(geometric, [0.3, 0.5]) == FAIL  # halts before the second element
    assert peval(Const(1), [0.5]) == FAIL


def test_peval_fuel_flag():
    omega_draw = let("u", Draw("rnd", ()), App(Lam("x", App(Var("x"), Var("x"))), Lam("x", App(Var("x"), Var("x")))))
    assert peval_ex(omega_draw, [0.5, 0.5], fuel=100) == (FAIL, True)
    assert peval_ex(omega_draw, [0.5], fuel=100)[1] is False


def test_peval_associative_on_geometric(geometric):
    s, t = (0.9, 0.6), (0.55, 0.1)
    assert peval(peval(geometric, s), t) == peval(geometric, s + t)


# trace_density

def test_trace_density_geometric_support(plain_geometric):
    rng = random.Random(11)
    for n in range(6):
        s = [rng.uniform(0.5, 1.0) for _ in range(n)] + [rng.uniform(0, 0.4999)]
        w, g = trace_density(plain_geometric, s)
        assert (w, g) == (1.0, Const(float(n)))


def test_trace_density_outside_support():
    assert trace_density(Draw("rnd", ()), [2.0]) == (0.0, FAIL)


def test_trace_density_value():
    assert trace_density(Const(5), []) == (1.0, Const(5))


def test_trace_density_no_run():
    assert trace_density(Const(5), [0.1]) == (0.0, FAIL)


def test_value_density_excludes_fail(geometric):
    assert value_density(geometric, [0.3]) == 0.0
    assert value_density(geometric, [0.7, 0.8, 0.3]) == 1.0


# forward_sample

def test_forward_sample_value():
    assert forward_sample(Const(5), random.Random(0)) == ((), eval_big(Const(5), ()))


def test_forward_sample_geometric_shape(geometric):
    rng = random.Random(4)
    for _ in range(200):
        trace, out = forward_sample(geometric, rng)
        heads = len(trace) - 1
        assert all(c >= 0.5 for c in trace[:-1]) and trace[-1] < 0.5
        assert out.result == (Const(float(heads)) if heads > 1 else FAIL)
        assert trace_density(geometric, trace) == (out.weight, out.result)


def test_forward_sample_weight_is_product_of_densities():
    t = let("a", Draw("Gaussian", (Const(1), Const(2))), let("s", Score(Const(0.5)), Draw("Gaussian", (Var("a"), Const(1)))))
    trace, out = forward_sample(t, random.Random(9))
    expected = gauss_pdf(1, 2, trace[0]) * 0.5 * gauss_pdf(trace[0], 1, trace[1])
    assert out.weight == pytest.approx(expected, rel=1e-12)


def test_forward_sample_unsamplable_records_zero():
    trace, out = forward_sample(Draw("Gaussian", (Const(0), Const(-1))), random.Random(0))
    assert trace == (0.0,)
    assert out.result == FAIL and out.weight == 0.0


def test_forward_geometric_law(plain_geometric):
    rng = random.Random(123)
    n = 5_000
    counts = Counter(forward_sample(plain_geometric, rng)[1].result.value for _ in range(n))
    for k in range(5):
        p = geometric_prior(k)
        assert abs(counts[float(k)] / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_weight_nonincreasing_along_run():
    t = let("a", Draw("rnd", ()), let("s", Score(Const(0.9)), let("b", Draw("rnd", ()), Score(Const(0.5)))))
    seen = []
    run_small_step(t, [0.2, 0.4], log=lambda rec: seen.append(rec["weight"]))
    assert all(x >= y >= 0 for x, y in zip(seen, seen[1:]))
    assert seen[-1] == pytest.approx(0.45)
