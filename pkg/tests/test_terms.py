import random

import pytest

from tracelam.gen import gen_term
from tracelam.sexpr import ParseError
from tracelam.terms import (
    FAIL,
    HOLE,
    App,
    AppL,
    AppR,
    Const,
    Draw,
    If,
    Lam,
    OpenTermError,
    Prim,
    Redex,
    RedexKind,
    Score,
    Var,
    compose,
    decompose,
    free_vars,
    is_erroneous,
    let,
    parse_core,
    plug,
    pretty,
    subst,
)

I = Lam("x", Var("x"))


# subst

def test_subst_variable_hit():
    assert subst(Var("x"), "x", Const(3)) == Const(3)


def test_subst_respects_shadowing():
    assert subst(Lam("x", Var("x")), "x", Const(3)) == Lam("x", Var("x"))


def test_subst_structural():
    z = Lam("z", Var("z"))
    assert subst(App(Var("x"), Var("y")), "x", z) == App(z, Var("y"))


def test_subst_reaches_every_position():
    t = If(Var("x"), Draw("Gaussian", (Var("x"), Const(1))), Score(Var("x")))
    assert subst(t, "x", Const(0.5)) == If(Const(0.5), Draw("Gaussian", (Const(0.5), Const(1))), Score(Const(0.5)))


def test_subst_leaves_other_binders_alone():
    t = Lam("y", App(Var("x"), Var("y")))
    assert subst(t, "x", I) == Lam("y", App(I, Var("y")))


# decompose

def test_decompose_value():
    assert decompose(Const(5)) == Const(5)
    assert decompose(I) == I
    assert decompose(FAIL) is FAIL


def test_decompose_left_application():
    t = App(App(I, Const(1)), Const(2))
    d = decompose(t)
    assert d == Redex(AppL(HOLE, Const(2)), App(I, Const(1)), RedexKind.BETA)
    assert plug(d.context, d.term) == t


def test_decompose_erroneous_constant_application():
    d = decompose(App(Const(3), I))
    assert d.context == HOLE
    assert d.kind is RedexKind.ERROR


def test_decompose_argument_position():
    t = App(I, Draw("rnd", ()))
    d = decompose(t)
    assert d == Redex(AppR(I, HOLE), Draw("rnd", ()), RedexKind.DRAW)


def test_decompose_fail_in_proper_context():
    d = decompose(App(FAIL, Const(1)))
    assert d.kind is RedexKind.FAIL
    assert d.context != HOLE


def test_decompose_if_kinds():
    assert decompose(If(Const(1), Const(2), Const(3))).kind is RedexKind.IF_TRUE
    assert decompose(If(Const(0), Const(2), Const(3))).kind is RedexKind.IF_FALSE
    assert decompose(If(Const(0.5), Const(2), Const(3))).kind is RedexKind.ERROR


def test_decompose_open_term_raises():
    with pytest.raises(OpenTermError):
        decompose(App(I, Var("y")))


def test_decompose_round_trip_on_generated_terms():
    rng = random.Random(7)
    for _ in range(300):
        t = gen_term(rng, 4)
        d = decompose(t)
        if isinstance(d, Redex):
            assert plug(d.context, d.term) == t
        else:
            assert d == t


# is_erroneous

def test_erroneous_constant_application():
    assert is_erroneous(App(Const(3), Const(4)))


@pytest.mark.parametrize("c, bad", [(0.5, False), (1.0, False), (2.0, True), (0.0, True), (-0.1, True)])
def test_erroneous_score_domain(c, bad):
    assert is_erroneous(Score(Const(c))) is bad


def test_erroneous_lambda_arguments():
    assert is_erroneous(Prim("+", (I, Const(1))))
    assert is_erroneous(Draw("Gaussian", (Const(0), I)))
    assert is_erroneous(Score(I))
    assert is_erroneous(If(I, Const(1), Const(0)))
    assert not is_erroneous(Prim("+", (Const(2), Const(1))))
    assert not is_erroneous(App(I, Const(1)))


# contexts

def test_compose_plugs_inside_out():
    e1 = AppL(HOLE, Const(2))
    e2 = AppR(I, HOLE)
    m = Draw("rnd", ())
    assert plug(compose(e1, e2), m) == plug(e1, plug(e2, m))


# text form

def test_pretty_parse_round_trip():
    t = let("u", Draw("rnd", ()), let("b", Prim("<", (Var("u"), Const(0.5))), If(Var("b"), Score(Const(0.25)), FAIL)))
    assert parse_core(pretty(t)) == t


def test_parse_core_rejects_garbage():
    with pytest.raises(ParseError):
        parse_core("(lambda x")
    with pytest.raises(ParseError):
        parse_core("(if 1 2)")


def test_let_is_sugar_for_application():
    assert let("x", Const(1), Var("x")) == App(Lam("x", Var("x")), Const(1))
    assert free_vars(let("x", Var("y"), Var("x"))) == {"y"}
