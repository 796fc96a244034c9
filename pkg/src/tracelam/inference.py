"""Trace Metropolis-Hastings and rejection sampling.

The MH proposal perturbs every coordinate of the current trace with
Gaussian noise, re-runs the program on the perturbed trace, and then either
extends it with fresh forward draws (the program wanted more randomness),
truncates it (the program finished early), or gives up and proposes the
empty "sink" trace, which is always rejected.

The proposal density of ``t`` from ``s`` is the Gaussian density of the
common prefix times the value-restricted weight of the residual program on
the rest of ``t``. Score factors in that residual weight are realised when
sampling by keeping the candidate with probability equal to their product
and otherwise proposing the sink, so that the sampling law of ``propose``
has exactly the density used in the acceptance ratio.
"""

from __future__ import annotations

import math
import random
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .compiled import Program, Run, as_program
from .registry import REGISTRY, Registry
from .semantics import DEFAULT_FUEL, NEG_INF, Status
from .terms import Const, Term

__all__ = [
    "MHConfig",
    "ChainState",
    "Proposal",
    "Sample",
    "Diagnostics",
    "InitFailure",
    "RetryExhausted",
    "init_state",
    "propose",
    "log_proposal_density",
    "proposal_density",
    "acceptance",
    "log_acceptance",
    "MHChain",
    "run_chain",
    "rejection_sample",
    "chain_seed",
]


class InitFailure(RuntimeError):
    """No positive-weight value trace found within the retry budget."""


class RetryExhausted(RuntimeError):
    """Rejection sampling exceeded its attempt budget."""


@dataclass(frozen=True)
class MHConfig:
    sigma: float = 1.0
    samples: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    fuel: int = DEFAULT_FUEL
    init_retries: int = 10**4

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a positive real, got {self.sigma}")
        if self.samples < 0 or self.burn_in < 0:
            raise ValueError("samples and burn_in must be nonnegative")
        if self.thin < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin}")
        if self.fuel < 1 or self.init_retries < 1:
            raise ValueError("fuel and init_retries must be positive")


@dataclass
class ChainState:
    trace: tuple
    log_weight: float  # log P^V(trace)
    value: Term
    rng: random.Random = field(repr=False, compare=False, default=None)

    @property
    def cached_weight(self) -> float:
        return math.exp(self.log_weight)


@dataclass(frozen=True)
class Proposal:
    trace: tuple
    log_fwd: float  # log q(s, t)
    log_rev: float  # log q(t, s)
    log_weight: float  # log P^V(t)
    kind: str  # "extend", "truncate", "sink"
    value: object = None
    log_sampled: float = NEG_INF  # density accumulated while sampling, for cross-checks
    fuel_exhausted: bool = False

    @property
    def is_sink(self) -> bool:
        return self.kind == "sink"

    @property
    def fwd_density(self) -> float:
        return math.exp(self.log_fwd)

    @property
    def rev_density(self) -> float:
        return math.exp(self.log_rev)

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)


@dataclass
class Diagnostics:
    iterations: int = 0
    accepted: int = 0
    sink_proposals: int = 0
    fuel_exhausted: int = 0
    init_attempts: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.iterations if self.iterations else float("nan")

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "sink_proposals": self.sink_proposals,
            "fuel_exhausted": self.fuel_exhausted,
            "init_attempts": self.init_attempts,
        }


@dataclass(frozen=True)
class Sample:
    value: Term
    trace: tuple
    log_weight: float
    accepted: bool


def chain_seed(seed: int, chain: int) -> int | str:
    """Seed of the ``chain``-th independent chain; chain 0 uses ``seed`` itself."""
    return seed if chain == 0 else f"{seed}/{chain}"


def _gauss_prefix(a: Sequence[float], b: Sequence[float], k: int, sigma: float) -> float:
    # symmetric in (a, b) bit for bit: (x - y)**2 == (y - x)**2
    v = sigma * sigma
    const = -0.5 * math.log(v) - 0.5 * math.log(2.0 * math.pi)
    total = 0.0
    for i in range(k):
        d = b[i] - a[i]
        total += -(d * d) / (2.0 * v) + const
    return total


def _tail_log_weight(run: Run, k: int) -> float:
    """log P^V of the residual program after ``k`` consumed elements, on the rest of the trace."""
    if not run.is_value or run.consumed != len(run.trace):
        return NEG_INF
    return run.log_weight - run.log_weight_at(k)


def log_proposal_density(
    model, frm: Sequence[float], to: Sequence[float], sigma: float, fuel: int = DEFAULT_FUEL
) -> float:
    """log q(frm, to). ``to`` must be non-empty; the sink density is never needed."""
    if len(to) == 0:
        raise ValueError("the proposal density against the empty trace is not defined pointwise")
    prog = as_program(model)
    k = min(len(frm), len(to))
    run = prog.run(tuple(to), fuel=fuel)
    tail = _tail_log_weight(run, k)
    if tail == NEG_INF:
        return NEG_INF
    return _gauss_prefix(frm, to, k, sigma) + tail


def proposal_density(model, frm, to, sigma: float, fuel: int = DEFAULT_FUEL) -> float:
    return math.exp(log_proposal_density(model, frm, to, sigma, fuel))


def _sink(fuel_exhausted: bool = False) -> Proposal:
    return Proposal((), NEG_INF, NEG_INF, NEG_INF, "sink", None, NEG_INF, fuel_exhausted)


def propose(model, current: Sequence[float], sigma: float, rng: random.Random, fuel: int = DEFAULT_FUEL) -> Proposal:
    prog = as_program(model)
    current = tuple(current)
    n = len(current)
    gauss = rng.gauss
    t = [gauss(c, sigma) for c in current]
    run = prog.run(t, rng=rng, fuel=fuel)
    if run.status is Status.FUEL_EXHAUSTED:
        return _sink(fuel_exhausted=True)
    if not run.is_value:
        return _sink()
    k = min(run.consumed, n)
    trace = run.trace[: run.consumed]
    tail = run.log_weight - run.log_weight_at(k)
    fresh = math.fsum(run.draw_log_pdfs[k:]) if run.consumed > k else 0.0
    score_part = tail - fresh
    if score_part < 0.0 and rng.random() >= math.exp(score_part):
        return _sink()
    # the same run, viewed as a plain evaluation of the proposed trace
    exact = Run(run.status, run.value, run.log_weight, trace, run.consumed, run.cumulative, run.draw_log_pdfs)
    prog.remember(exact, fuel)
    log_fwd = log_proposal_density(prog, current, trace, sigma, fuel)
    log_rev = log_proposal_density(prog, trace, current, sigma, fuel)
    sampled = _gauss_prefix(current, trace, k, sigma) + tail
    kind = "extend" if run.consumed >= n else "truncate"
    return Proposal(trace, log_fwd, log_rev, exact.value_log_weight, kind, run.value, sampled)


def log_acceptance(current_log_weight: float, p: Proposal) -> float:
    if p.is_sink or p.log_weight == NEG_INF:
        return NEG_INF
    if current_log_weight == NEG_INF or p.log_fwd == NEG_INF:
        return 0.0
    r = (p.log_weight - current_log_weight) + (p.log_rev - p.log_fwd)
    return 0.0 if r >= 0.0 else r


def acceptance(model, s, p: Proposal) -> float:
    """Hastings acceptance probability; ``s`` is a :class:`ChainState` or a log P^V."""
    lw = s.log_weight if isinstance(s, ChainState) else float(s)
    la = log_acceptance(lw, p)
    if la == 0.0:
        return 1.0
    return 0.0 if la == NEG_INF else math.exp(la)


def init_state(model, cfg: MHConfig, rng: random.Random | None = None, diagnostics: Diagnostics | None = None) -> ChainState:
    prog = as_program(model)
    rng = rng if rng is not None else random.Random(cfg.seed)
    for attempt in range(1, cfg.init_retries + 1):
        run = prog.forward(rng, cfg.fuel)
        if run.is_value and run.log_weight > NEG_INF:
            if diagnostics is not None:
                diagnostics.init_attempts = attempt
            prog.remember(run, cfg.fuel)
            return ChainState(run.trace, run.log_weight, prog.result_term(run), rng)
    raise InitFailure(f"no value trace with positive weight after {cfg.init_retries} forward runs")


class MHChain:
    """Iterable MH chain. Iterate for :class:`Sample` records; ``diagnostics``
    fills in as the chain runs.

    ``observer``, if given, is called once per iteration as
    ``observer(state, proposal, alpha)`` with the state the proposal was made from.
    """

    def __init__(
        self,
        model,
        cfg: MHConfig,
        rng: random.Random | None = None,
        registry: Registry = REGISTRY,
        observer: Callable[[ChainState, Proposal, float], None] | None = None,
    ):
        self.observer = observer
        self.program = as_program(model, registry)
        self.cfg = cfg
        self.rng = rng if rng is not None else random.Random(cfg.seed)
        self.diagnostics = Diagnostics()
        self.deterministic = False

    def __iter__(self) -> Iterator[Sample]:
        cfg, prog, rng, diag = self.cfg, self.program, self.rng, self.diagnostics
        if cfg.samples == 0:
            return
        state = init_state(prog, cfg, rng, diag)
        if len(state.trace) == 0:
            self.deterministic = True
            warnings.warn("model uses no randomness; falling back to rejection sampling", RuntimeWarning, stacklevel=2)
            for s in _rejection(prog, cfg.samples, rng, cfg.fuel, cfg.init_retries):
                yield Sample(s.value, s.trace, s.log_weight, True)
            return
        total = cfg.burn_in + cfg.samples * cfg.thin
        emitted = 0
        accepted_since = False
        value = state.value
        raw = None
        for it in range(1, total + 1):
            p = propose(prog, state.trace, cfg.sigma, rng, cfg.fuel)
            diag.iterations += 1
            if p.is_sink:
                diag.sink_proposals += 1
                diag.fuel_exhausted += p.fuel_exhausted
                la = NEG_INF
                accept = False
            else:
                la = log_acceptance(state.log_weight, p)
                accept = la == 0.0 or (la > NEG_INF and rng.random() < math.exp(la))
            if self.observer is not None:
                self.observer(state, p, 1.0 if la == 0.0 else math.exp(la))
            if accept:
                diag.accepted += 1
                state = ChainState(p.trace, p.log_weight, None, rng)
                value, raw = None, p.value
                accepted_since = True
            if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
                if value is None:
                    value = _value_term(prog, raw, state.trace, cfg.fuel)
                    state.value = value
                yield Sample(value, state.trace, state.log_weight, accepted_since)
                accepted_since = False
                emitted += 1


def _value_term(prog: Program, raw, trace: tuple, fuel: int) -> Term:
    if type(raw) is float:
        return Const(raw)
    return prog.result_term(prog.run(trace, fuel=fuel))


def run_chain(model, cfg: MHConfig, rng: random.Random | None = None, observer=None) -> MHChain:
    return MHChain(model, cfg, rng, observer=observer)


@dataclass(frozen=True)
class RejectionSample:
    value: Term
    trace: tuple
    log_weight: float
    attempts: int


def _rejection(prog: Program, samples: int, rng: random.Random, fuel: int, max_retries: int) -> Iterator[RejectionSample]:
    for _ in range(samples):
        for attempt in range(1, max_retries + 1):
            run = prog.forward(rng, fuel)
            if not run.is_value:
                continue
            score_part = run.log_weight - math.fsum(run.draw_log_pdfs)
            if score_part < 0.0 and rng.random() >= math.exp(score_part):
                continue
            yield RejectionSample(_value_term(prog, run.value, run.trace, fuel), run.trace, run.log_weight, attempt)
            break
        else:
            raise RetryExhausted(f"{max_retries} consecutive forward runs produced no accepted value")


def rejection_sample(
    model,
    samples: int,
    seed: int = 0,
    fuel: int = DEFAULT_FUEL,
    max_retries: int = 10**6,
    rng: random.Random | None = None,
) -> Iterator[RejectionSample]:
    """Rejection sampler: forward runs, keeping values, thinned by their score factors.

    ``max_retries`` bounds the consecutive attempts spent on one sample.
    """
    prog = as_program(model)
    return _rejection(prog, samples, rng if rng is not None else random.Random(seed), fuel, max_retries)
