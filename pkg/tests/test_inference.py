import math
import random
import warnings

import pytest

import oracles
from tracelam.church import compile_church
from tracelam.compiled import Program
from tracelam.inference import (
    ChainState,
    InitFailure,
    MHConfig,
    Proposal,
    RetryExhausted,
    acceptance,
    init_state,
    log_proposal_density,
    propose,
    proposal_density,
    rejection_sample,
    run_chain,
)
from tracelam.terms import Const

TINY = "(query (define (flip p) (< (rnd) p)) (if (flip 1e-9) 1 fail) true)"


def test_config_validation():
    for bad in (dict(sigma=0), dict(sigma=-1), dict(thin=0), dict(samples=-1), dict(burn_in=-2), dict(init_retries=0)):
        with pytest.raises(ValueError):
            MHConfig(**bad)


# init_state

def test_init_state_constant():
    s = init_state(Const(5), MHConfig())
    assert (s.trace, s.cached_weight, s.value) == ((), 1.0, Const(5))


def test_init_state_geometric(geometric):
    for seed in range(20):
        s = init_state(geometric, MHConfig(seed=seed))
        assert oracles.geometric_valid(s.trace)
        assert s.cached_weight == 1.0
        assert s.value == Const(float(len(s.trace) - 1))


def test_init_failure():
    with pytest.raises(InitFailure):
        init_state(compile_church(TINY), MHConfig(init_retries=10))


# propose

def test_score_model_proposals_have_length_two(score_program):
    rng = random.Random(0)
    s = init_state(score_program, MHConfig(), rng)
    for _ in range(500):
        p = propose(score_program, s.trace, 1.0, rng)
        assert p.is_sink or len(p.trace) == 2


def test_geometric_proposals_are_valid_or_sink(geometric):
    prog = Program(geometric)
    rng = random.Random(1)
    s = (0.7, 0.8, 0.3)
    kinds = set()
    for _ in range(3000):
        p = propose(prog, s, 0.3, rng)
        kinds.add(p.kind)
        if p.is_sink:
            assert p.trace == () and acceptance(prog, 0.0, p) == 0.0
        else:
            assert oracles.geometric_valid(p.trace)
            assert p.log_weight == 0.0
            # prefix perturbed, possibly extended or truncated
            assert p.kind == ("extend" if len(p.trace) >= 3 else "truncate")
    assert kinds == {"extend", "sink"}  # a valid trace never stops early


def test_geometric_truncation_proposals(geometric):
    prog = Program(geometric)
    rng = random.Random(2)
    s = (0.9, 0.9, 0.9, 0.9, 0.1)
    seen = 0
    for _ in range(3000):
        p = propose(prog, s, 0.5, rng)
        if p.kind == "truncate":
            seen += 1
            assert len(p.trace) < len(s) and oracles.geometric_valid(p.trace)
    assert seen > 0


def test_tiny_sigma_keeps_coordinates_and_accepts(score_program, geometric):
    rng = random.Random(3)
    # start near the posterior mode so the score factors rarely thin a proposal away
    trace = (1.98, -0.21)
    s = ChainState(trace, score_program.value_log_density(trace), None)
    alphas = []
    for _ in range(500):
        p = propose(score_program, s.trace, 1e-12, rng)
        if not p.is_sink:
            assert all(abs(a - b) <= 1e-9 for a, b in zip(p.trace, s.trace))
            alphas.append(acceptance(score_program, s, p))
    assert alphas and min(alphas) >= 0.999
    chain = run_chain(geometric, MHConfig(sigma=1e-12, samples=2000, seed=3))
    list(chain)
    assert chain.diagnostics.acceptance_rate >= 0.999


def test_propose_density_bookkeeping(score_program):
    rng = random.Random(4)
    s = init_state(score_program, MHConfig(), rng)
    for _ in range(200):
        p = propose(score_program, s.trace, 0.5, rng)
        if p.is_sink:
            continue
        assert p.log_fwd == log_proposal_density(score_program, s.trace, p.trace, 0.5)
        assert p.log_rev == log_proposal_density(score_program, p.trace, s.trace, 0.5)
        assert p.log_weight == pytest.approx(math.log(oracles.score_model_density(p.trace)), rel=1e-12)


# proposal_density

def _flip_trace(rng, valid):
    m, b = rng.gauss(0, 1.4), rng.gauss(0, 1.4)
    out = [m, b]
    for x, y in zip(oracles.XS, oracles.YS):
        bound = math.exp(-((m * x + b - y) ** 2))
        out.append(rng.uniform(0, bound) if valid or rng.random() < 0.7 else rng.uniform(bound, 1.0))
    return tuple(out)


def test_flip_model_proposal_density(linreg_flip):
    prog = Program(linreg_flip)
    rng = random.Random(5)
    checked = 0
    for _ in range(400):
        s = _flip_trace(rng, True)
        t = _flip_trace(rng, rng.random() < 0.5)
        sigma = rng.choice((0.3, 1.0, 2.0))
        want = oracles.flip_model_q(s, t, sigma)
        got = proposal_density(prog, s, t, sigma)
        if want == 0.0:
            assert got == 0.0
        else:
            checked += 1
            assert got == pytest.approx(want, rel=1e-9)
    assert checked > 50


def test_truncated_proposal_density_is_gaussian_prefix(geometric):
    s = (0.9, 0.8, 0.7, 0.6, 0.2)
    t = (0.85, 0.75, 0.1)
    want = math.prod(oracles.gauss_pdf(a, 0.25, b) for a, b in zip(s, t))
    assert proposal_density(geometric, s, t, 0.5) == pytest.approx(want, rel=1e-12)


def test_proposal_density_outside_valid_set(geometric):
    s = (0.7, 0.8, 0.3)
    assert proposal_density(geometric, s, (0.3,), 1.0) == 0.0
    assert proposal_density(geometric, s, (0.7, 0.3), 1.0) == 0.0
    assert proposal_density(geometric, s, (0.7, 1.3, 0.3), 1.0) == 0.0
    assert proposal_density(geometric, s, (0.7, 0.8, 0.3, 0.5), 1.0) == 0.0


def test_proposal_density_matches_literal_definition(geometric, score_program):
    rng = random.Random(6)
    cases = [
        (geometric, (0.7, 0.8, 0.3), (0.6, 0.9, 0.55, 0.2)),
        (geometric, (0.7, 0.8, 0.6, 0.3), (0.6, 0.9, 0.2)),
        (score_program.term, (1.0, 0.0), (2.0, -0.5)),
    ]
    for term, s, t in cases:
        sigma = rng.uniform(0.2, 2)
        assert proposal_density(term, s, t, sigma) == pytest.approx(oracles.literal_q(term, s, t, sigma), rel=1e-9)


def test_sink_density_is_not_defined(geometric):
    with pytest.raises(ValueError):
        proposal_density(geometric, (0.7, 0.8, 0.3), (), 1.0)


# acceptance

def _proposal(trace, log_weight, log_fwd=0.0, log_rev=0.0, kind="extend"):
    return Proposal(tuple(trace), log_fwd, log_rev, log_weight, kind)


def test_acceptance_edges():
    s = ChainState((0.5,), math.log(0.2), Const(1))
    assert acceptance(None, s, _proposal((0.1,), -math.inf)) == 0.0
    assert acceptance(None, s, Proposal((), -math.inf, -math.inf, -math.inf, "sink")) == 0.0
    assert acceptance(None, s, _proposal((0.1,), math.log(0.1), log_fwd=-math.inf)) == 1.0
    assert acceptance(None, -math.inf, _proposal((0.1,), math.log(0.1))) == 1.0
    assert acceptance(None, s, _proposal((0.1,), math.log(0.1))) == pytest.approx(0.5)
    assert acceptance(None, s, _proposal((0.1,), math.log(0.4))) == 1.0
    assert acceptance(None, s, _proposal((0.1,), math.log(0.1), log_fwd=math.log(0.5), log_rev=math.log(2))) == 1.0


def test_geometric_valid_proposals_always_accepted(geometric):
    prog = Program(geometric)
    rng = random.Random(7)
    s = init_state(prog, MHConfig(), rng)
    for _ in range(1000):
        p = propose(prog, s.trace, 1.0, rng)
        if not p.is_sink:
            assert acceptance(prog, s, p) == 1.0


def test_score_model_alpha_is_prior_ratio(score_program):
    rng = random.Random(8)
    trace = (1.5, 0.3)
    s = ChainState(trace, score_program.value_log_density(trace), None)
    n = 0
    while n < 100:
        p = propose(score_program, s.trace, 1.0, rng)
        if p.is_sink:
            continue
        n += 1
        assert acceptance(score_program, s, p) == pytest.approx(oracles.score_model_alpha(s.trace, p.trace), rel=1e-9)


# run_chain

def test_zero_samples(geometric):
    assert list(run_chain(geometric, MHConfig(samples=0))) == []


def test_same_seed_same_chain(geometric):
    a = [(x.value, x.trace) for x in run_chain(geometric, MHConfig(samples=300, seed=9))]
    b = [(x.value, x.trace) for x in run_chain(geometric, MHConfig(samples=300, seed=9))]
    c = [(x.value, x.trace) for x in run_chain(geometric, MHConfig(samples=300, seed=10))]
    assert a == b and a != c


def test_burn_in_and_thin(geometric):
    chain = run_chain(geometric, MHConfig(samples=50, burn_in=30, thin=4, seed=1))
    out = list(chain)
    assert len(out) == 50
    assert chain.diagnostics.iterations == 30 + 50 * 4


def test_emitted_samples_match_their_traces(score_program):
    prog = score_program
    for smp in run_chain(prog, MHConfig(samples=300, seed=2)):
        run = prog.run(smp.trace)
        assert run.is_value and run.log_weight == smp.log_weight > -math.inf
        assert smp.value == Const(run.value)


def test_observer_sees_every_iteration(geometric):
    seen = []
    chain = run_chain(geometric, MHConfig(samples=100, seed=4), observer=lambda s, p, a: seen.append((s.trace, p, a)))
    list(chain)
    assert len(seen) == chain.diagnostics.iterations == 100
    assert all(a == 1.0 for _, p, a in seen if not p.is_sink)
    assert all(a == 0.0 for _, p, a in seen if p.is_sink)


def test_deterministic_model_falls_back_to_rejection():
    chain = run_chain(compile_church("(query 3 true)"), MHConfig(samples=5))
    with pytest.warns(RuntimeWarning):
        out = list(chain)
    assert [x.value for x in out] == [Const(3.0)] * 5
    assert chain.deterministic


# rejection

def test_rejection_without_scores_is_forward_conditioning(geometric):
    prog = Program(geometric)
    got = [x.trace for x in rejection_sample(prog, 50, rng=random.Random(11))]
    rng = random.Random(11)
    want = []
    while len(want) < 50:
        r = prog.forward(rng)
        if r.is_value:
            want.append(r.trace)
    assert got == want


def test_rejection_retry_exhausted():
    with pytest.raises(RetryExhausted):
        list(rejection_sample(compile_church(TINY), 1, max_retries=20))


def test_rejection_samples_are_values(score_program):
    for x in rejection_sample(score_program, 20, seed=1):
        assert len(x.trace) == 2 and isinstance(x.value, Const) and x.attempts >= 1
