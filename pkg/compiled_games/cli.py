#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
The compiled-games command line. Results are JSON documents on standard output,
diagnostics go to standard error.

Exit codes: 0 on success, 2 on a usage error (bad flags, unreadable or invalid input
files), 1 when a solver or simulation fails.
"""

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

from . import (
    __version__,
    blockenc,
    compiled,
    constants,
    exceptions,
    npa,
    sequential,
    values,
)
from .games import CATALOG_NAMES, Game, catalog
from .io import dumps_canonical, read_json, write_json, write_jsonl
from .qhe import make_backend
from .schemas import RunConfig

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

KIND_CLASSICAL = "classical"
KIND_QUANTUM = "q"
KIND_COMMUTING = "qc"
KIND_NONSIGNALING = "ns"
VALUE_KINDS = (KIND_CLASSICAL, KIND_QUANTUM, KIND_COMMUTING, KIND_NONSIGNALING)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Errors caused by the input rather than by the computation
USAGE_ERRORS = (
    FileNotFoundError,
    ValueError,
    ValidationError,
    exceptions.UnknownGameError,
    exceptions.InvalidGameError,
    exceptions.InvalidStrategyError,
    exceptions.DimensionMismatchError,
    exceptions.ShapeMismatchError,
)

###############################################################################


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Root seed.")
    parser.add_argument(
        "--threads",
        type=int,
        default=constants.DEFAULT_THREADS,
        help="Worker threads for restarts and sessions.",
    )
    parser.add_argument("--output", default=None, help="Also write the result here.")


def _add_compile_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("path", help="Game JSON.")
    parser.add_argument(
        "--backend",
        choices=(constants.BACKEND_IDEAL, constants.BACKEND_CLIFFORD),
        default=constants.BACKEND_IDEAL,
    )
    parser.add_argument("--lambda", dest="lam", type=int, default=8)
    parser.add_argument(
        "--insecure", action="store_true", help="Leak the key to provers."
    )
    _add_common(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compiled-games",
        description=(
            "Values of nonlocal games, compiled protocols and sequential strategies."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    commands = parser.add_subparsers(dest="command", required=True)

    value = commands.add_parser("value", help="Classical, quantum, qc or ns value.")
    value.add_argument("path", help="Game JSON.")
    value.add_argument("--kind", choices=VALUE_KINDS, required=True)
    value.add_argument("--npa-level", type=int, default=1)
    value.add_argument("--dim", type=int, default=2)
    value.add_argument("--restarts", type=int, default=constants.DEFAULT_RESTARTS)
    value.add_argument("--iters", type=int, default=constants.DEFAULT_SEESAW_ITERS)
    value.add_argument("--tol", type=float, default=constants.SDP_TOL)
    _add_common(value)

    games = commands.add_parser("catalog", help="Write a built-in game as Game JSON.")
    games.add_argument("name", choices=CATALOG_NAMES)
    games.add_argument(
        "--table", default=None, help="XOR parity table as a JSON array."
    )
    games.add_argument("--output", default=None)

    compile_parser = commands.add_parser("compile", help="Compiled game experiments.")
    compile_commands = compile_parser.add_subparsers(dest="subcommand", required=True)
    run = compile_commands.add_parser("run", help="Value of one prover.")
    _add_compile_flags(run)
    run.add_argument(
        "--prover", choices=compiled.PROVER_NAMES, default=compiled.PROVER_HONEST
    )
    mode = run.add_mutually_exclusive_group(required=True)
    mode.add_argument("--trials", type=int, default=None)
    mode.add_argument("--exact", action="store_true")
    run.add_argument("--transcripts", default=None, help="JSON-lines transcript log.")
    battery = compile_commands.add_parser("battery", help="Adversary battery.")
    _add_compile_flags(battery)
    battery.add_argument("--random-cheaters", type=int, default=2)
    battery.add_argument("--degree", type=int, default=3)

    seq = commands.add_parser("seq", help="Sequential strategies.")
    seq_commands = seq.add_subparsers(dest="subcommand", required=True)
    check = seq_commands.add_parser("check", help="Strong non-signaling residual.")
    check.add_argument("path", help="Sequential strategy JSON.")
    check.add_argument("--degree", type=int, default=1)
    check.add_argument("--output", default=None)
    convert = seq_commands.add_parser("convert", help="Convert to a nonlocal strategy.")
    convert.add_argument("path", help="Sequential strategy JSON.")
    convert.add_argument(
        "--method",
        choices=constants.CONVERT_METHODS,
        default=constants.CONVERT_PURIFY,
    )
    convert.add_argument("--tol", type=float, default=constants.UHLMANN_TOL)
    _add_common(convert)

    selftest = commands.add_parser("selftest", help="Self-testing residuals.")
    selftest_commands = selftest.add_subparsers(dest="subcommand", required=True)
    residual = selftest_commands.add_parser(
        "chsh-residual", help="tr(sigma_xa {B_0, B_1}^2) of a sequential strategy."
    )
    residual.add_argument(
        "path",
        nargs="?",
        default=None,
        help="Sequential strategy JSON (default: honest CHSH).",
    )
    residual.add_argument("--output", default=None)

    block = commands.add_parser("blockenc", help="Block encodings.")
    block_commands = block.add_subparsers(dest="subcommand", required=True)
    verify = block_commands.add_parser("verify", help="Check the encoding identities.")
    verify.add_argument("--dim", type=int, default=2)
    verify.add_argument("--samples", type=int, default=10)
    _add_common(verify)

    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    fields: Dict[str, Any] = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "subcommand", "verbose", "name", "table")
        and value is not None
    }
    command = args.command
    if getattr(args, "subcommand", None) is not None:
        command = f"{command} {args.subcommand}"
    if "lam" in fields:
        fields["lambda"] = fields.pop("lam")
    return RunConfig(command=command, **fields)


###############################################################################


def _value(config: RunConfig) -> Dict[str, Any]:
    g = Game.from_json(config.path)
    if config.kind == KIND_CLASSICAL:
        value, strategy = values.classical_value(g)
        return {"value": value, "strategy": strategy.to_dict()}
    if config.kind == KIND_QUANTUM:
        value, quantum = values.seesaw_lower_bound(
            g,
            config.dim,
            restarts=config.restarts,
            iters=config.iters,
            seed=config.seed,
            threads=config.threads,
        )
        return {"value": value, "strategy": quantum.to_dict(), "bound": "lower"}
    if config.kind == KIND_COMMUTING:
        value, certificate = npa.npa_upper_bound(
            g, level=config.npa_level, tol=config.tol
        )
        return {"value": value, "certificate": certificate.to_dict(), "bound": "upper"}
    value, correlation = values.nonsignaling_value(g, return_correlation=True)
    return {"value": value, "correlation": correlation.to_dict()}


def _compile_run(config: RunConfig) -> Dict[str, Any]:
    g = Game.from_json(config.path)
    prover_name = config.prover or compiled.PROVER_HONEST
    prover = compiled.make_prover(prover_name, g, config.seed)
    backend = make_backend(config.backend, compiled.message_bits(g.shape), config.seed)
    if config.exact:
        value, correlation, data = compiled.exact_value(
            g, prover, backend, config.lam, insecure=config.insecure
        )
        return {
            "value": value,
            "mode": "exact",
            "correlation": correlation.to_dict(),
            "extracted": data.to_dict(),
        }

    assert config.trials is not None
    estimate = compiled.monte_carlo_value(
        g,
        prover,
        backend,
        config.lam,
        config.trials,
        seed=config.seed,
        threads=config.threads,
        insecure=config.insecure,
    )
    if config.transcripts is not None:
        write_jsonl(config.transcripts, (t.to_dict() for t in estimate.transcripts))
    return {
        "value": estimate.value,
        "mode": "monte-carlo",
        "stderr": estimate.stderr,
        "accepted": estimate.accepted,
        "trials": estimate.trials,
    }


def _compile_battery(config: RunConfig) -> Dict[str, Any]:
    g = Game.from_json(config.path)
    report = compiled.adversary_battery(
        g,
        config.backend,
        config.lam,
        insecure=config.insecure,
        seed=config.seed,
        random_cheaters=config.random_cheaters,
        degree=config.degree,
    )
    return report.to_dict()


def _seq_check(config: RunConfig) -> Dict[str, Any]:
    strategy = sequential.SequentialQuantumStrategy.from_json(config.path)
    residual, witness = sequential.strong_nonsig_residual(strategy, config.degree)
    return {"residual": residual, "witness": witness.label(), "degree": config.degree}


def _seq_convert(config: RunConfig) -> Dict[str, Any]:
    document = read_json(config.path)
    if config.method == constants.CONVERT_CLASSICAL:
        classical = sequential.convert_classical(
            sequential.SequentialClassicalStrategy.from_dict(document), tol=config.tol
        )
        return {
            "strategy": classical.to_dict(),
            "correlation": classical.correlation().to_dict(),
        }

    strategy = sequential.SequentialQuantumStrategy.from_dict(document)
    result: Dict[str, Any] = {}
    if config.method == constants.CONVERT_BLOCKREDUCE:
        decomposition, strategy = sequential.block_reduce(strategy, seed=config.seed)
        result["decomposition"] = decomposition.to_dict()
    quantum = sequential.convert_purify(strategy, tol=config.tol)
    result["strategy"] = quantum.to_dict()
    result["correlation"] = quantum.correlation().to_dict()
    return result


def _chsh_residual(config: RunConfig) -> Dict[str, Any]:
    if config.path is None:
        g = catalog(constants.GAME_CHSH)
        backend = make_backend(constants.BACKEND_IDEAL, compiled.message_bits(g.shape))
        prover = compiled.HonestProver(compiled.reference_strategy(g))
        _, _, strategy = compiled.exact_value(g, prover, backend, config.lam)
    else:
        strategy = sequential.SequentialQuantumStrategy.from_json(config.path)
    return {"residual": sequential.chsh_selftest_residual(strategy)}


def _blockenc_verify(config: RunConfig) -> Dict[str, Any]:
    errors = blockenc.verify(dim=config.dim, samples=config.samples, seed=config.seed)
    return {"max_errors": errors, "max_error": max(errors.values())}


COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "value": _value,
    "compile run": _compile_run,
    "compile battery": _compile_battery,
    "seq check": _seq_check,
    "seq convert": _seq_convert,
    "selftest chsh-residual": _chsh_residual,
    "blockenc verify": _blockenc_verify,
}

###############################################################################


def _emit(document: Dict[str, Any], output: Optional[str]) -> None:
    sys.stdout.write(dumps_canonical(document))
    sys.stdout.write("\n")
    if output is not None:
        write_json(output, document)


def _catalog(args: argparse.Namespace) -> int:
    table = json.loads(args.table) if args.table is not None else None
    g = catalog(args.name, table)
    _emit(g.to_dict(), args.output)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "catalog":
            return _catalog(args)
        config = _config_from(args)
        result = COMMANDS[config.command](config)
    except USAGE_ERRORS as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except Exception as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE

    result["config"] = config.echo()
    result["version"] = __version__
    _emit(result, config.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
