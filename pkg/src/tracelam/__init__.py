"""tracelam: a probabilistic lambda-calculus with trace semantics and trace MH.

Layers, bottom up: ``terms`` (core syntax), ``registry`` (distributions and
primitives), ``semantics`` (reference small-step and big-step evaluators),
``church`` (surface frontend), ``compiled`` (fast evaluator), ``inference``
(trace MH and rejection sampling), ``stats`` and ``cli``.
"""

from .church import ParseError, TranslateError, UnboundIdentifier, compile_church, load_model, parse, translate_expr, translate_query
from .compiled import Program
from .inference import (
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
from .registry import REGISTRY, DistSpec, PrimSpec, Registry, apply_prim, log_pdf, pdf, sample
from .semantics import (
    DEFAULT_FUEL,
    MachineState,
    RunOutcome,
    Status,
    det_step,
    eval_big,
    forward_sample,
    peval,
    run_small_step,
    small_step,
    trace_density,
    value_density,
)
from .terms import (
    FAIL,
    App,
    Const,
    Draw,
    Fail,
    If,
    Lam,
    OpenTermError,
    Prim,
    Score,
    Var,
    decompose,
    is_erroneous,
    parse_core,
    plug,
    pretty,
    subst,
)

__version__ = "0.1.0"
