"""Command-line entry point.

Subcommands::

    tracelam run MODEL      sample a .church query or .core term
    tracelam eval MODEL     run a model on one explicit trace
    tracelam check          differential and law checks on random terms

Exit codes: 0 success, 1 ``check`` found a failure, 2 parse/translate/usage
errors, 3 inference could not start or ran out of retries.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import random
import sys
import warnings
from pathlib import Path

from . import models
from .church import TranslateError, load_model
from .compiled import Program
from .inference import InitFailure, MHConfig, RetryExhausted, chain_seed, rejection_sample, run_chain
from .registry import RegistryError
from .semantics import DEFAULT_FUEL, Status, eval_big, run_small_step
from .sexpr import ParseError
from .stats import summary
from .terms import Const, Fail, OpenTermError, Term, format_real, pretty

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_INFERENCE = 0, 1, 2, 3


class _UsageError(Exception):
    pass


def format_value(v) -> str:
    """Integral reals print without a fractional part; abstractions as core text."""
    if isinstance(v, Term) and type(v) is Const:
        v = v.value
    if isinstance(v, float):
        if math.isfinite(v) and v == int(v) and abs(v) < 2**53:
            return str(int(v))
        return format_real(v)
    if v is None or isinstance(v, Fail):
        return "fail"
    return pretty(v)


def _resolve_model(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    try:
        return models.path(name)
    except KeyError:
        raise FileNotFoundError(f"no such model file: {name}") from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("TRACELAM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"TRACELAM_SEED must be an integer, got {env!r}") from None
    return 0


def _rows(prog: Program, args, seed: int, chain: int, diag_out: list):
    """Yield (value, log_weight, accepted) tuples for one chain."""
    rng = random.Random(chain_seed(seed, chain))
    if args.method == "mh":
        cfg = MHConfig(
            sigma=1.0 if args.sigma is None else args.sigma,
            samples=args.samples,
            burn_in=args.burn_in,
            thin=args.thin,
            seed=seed,
            fuel=args.fuel,
            init_retries=args.max_retries,
        )
        ch = run_chain(prog, cfg, rng=rng)
        for s in ch:
            yield s.value, s.log_weight, s.accepted
        diag_out.append(ch.diagnostics.as_dict())
    elif args.method == "rejection":
        for s in rejection_sample(prog, args.samples, fuel=args.fuel, max_retries=args.max_retries, rng=rng):
            yield s.value, s.log_weight, True
    else:
        for _ in range(args.samples):
            run = prog.forward(rng, args.fuel)
            if run.status is Status.FUEL_EXHAUSTED:
                yield None, float("-inf"), False
            else:
                yield prog.result_term(run), run.log_weight, run.is_value


def _cmd_run(args) -> int:
    if args.method != "mh" and args.sigma is not None:
        raise _UsageError("--sigma only applies to --method mh")
    if args.method != "mh" and (args.burn_in or args.thin != 1):
        raise _UsageError("--burn-in and --thin only apply to --method mh")
    term = load_model(_resolve_model(args.model))
    if args.emit_core:
        _write_text(args.output, pretty(term) + "\n")
        return EXIT_OK
    prog = Program(term)
    seed = _seed(args)
    multi = args.chains > 1
    header = (["chain"] if multi else []) + ["index", "value", "log_weight", "accepted"]
    diags: list = []
    values: list = []
    with _open_out(args.output) as fp:
        writer = csv.writer(fp, lineterminator="\n") if args.format == "csv" else None
        if writer:
            writer.writerow(header)
        streams = [_rows(prog, args, seed, c, diags) for c in range(args.chains)]
        # round-robin over chains; with several chains each row is tagged and indexed per chain
        for index in range(args.samples):
            for c, it in enumerate(streams):
                row = next(it, None)
                if row is None:
                    continue
                value, lw, acc = row
                values.append(value.value if type(value) is Const else None)
                rec = ([c] if multi else []) + [index, format_value(value), format_real(lw), int(acc)]
                if writer:
                    writer.writerow(rec)
                else:
                    fp.write(json.dumps(dict(zip(header, rec))) + "\n")
        for it in streams:
            next(it, None)  # let each generator finish and record its diagnostics
    if args.summary:
        info = {"method": args.method, "seed": seed, "summary": summary([v for v in values if v is not None])}
        if diags:
            info["diagnostics"] = diags
        _write_text(args.summary, json.dumps(info, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            yield fp


def _write_text(path, text: str) -> None:
    with _open_out(path) as fp:
        fp.write(text)


def _parse_trace(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise _UsageError(f"malformed trace {text!r}") from None


def _cmd_eval(args) -> int:
    term = load_model(_resolve_model(args.model))
    trace = _parse_trace(args.trace)
    if args.small_step or args.log:
        with _open_out(args.log) if args.log else contextlib.nullcontext(None) as log:
            out = run_small_step(term, trace, args.fuel, log=log)
    else:
        out = eval_big(term, trace, args.fuel)
    rec = {
        "status": out.status.value,
        "result": format_value(out.result) if out.completed else None,
        "weight": out.weight,
        "log_weight": format_real(out.log_weight),
    }
    print(json.dumps(rec))
    return EXIT_OK


def _cmd_check(args) -> int:
    from .checks import run_checks

    ok = run_checks(cases=args.cases, seed=args.seed or 0, out=sys.stdout)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracelam", description="Trace semantics and trace MH for a probabilistic lambda-calculus.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="sample from a model")
    r.add_argument("model", help=f".church/.core file, or a bundled model: {', '.join(models.NAMES)}")
    r.add_argument("--method", choices=("mh", "rejection", "forward"), default="mh")
    r.add_argument("--samples", type=int, default=1000)
    r.add_argument("--burn-in", type=int, default=0)
    r.add_argument("--thin", type=int, default=1)
    r.add_argument("--sigma", type=float, default=None, help="MH proposal standard deviation (default 1.0)")
    r.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $TRACELAM_SEED, then 0)")
    r.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    r.add_argument("--max-retries", type=int, default=10**4, help="MH init retries / rejection attempts per sample")
    r.add_argument("--chains", type=int, default=1)
    r.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    r.add_argument("--output", "-o", default=None)
    r.add_argument("--summary", default=None, metavar="PATH", help="write a summary JSON ('-' for stdout)")
    r.add_argument("--emit-core", action="store_true", help="print the translated core term and exit")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("eval", help="run a model on one trace")
    e.add_argument("model")
    e.add_argument("--trace", default="", help="comma- or space-separated reals")
    e.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    e.add_argument("--small-step", action="store_true", help="use the small-step machine")
    e.add_argument("--log", default=None, metavar="PATH", help="write a JSON-lines reduction log ('-' for stdout)")
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("check", help="run the built-in semantics property checks")
    c.add_argument("--cases", type=int, default=500)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "samples", 1) < 0 or getattr(args, "chains", 1) < 1 or getattr(args, "thin", 1) < 1:
        parser.error("--samples must be >= 0, --chains and --thin >= 1")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except (ParseError, TranslateError, RegistryError, OpenTermError, FileNotFoundError, _UsageError, ValueError) as exc:
        print(f"tracelam: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InitFailure, RetryExhausted) as exc:
        print(f"tracelam: inference failed: {exc}", file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
