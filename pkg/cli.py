"""Command-line entrypoint for anyonkit."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from models import ErrorDetail, ErrorPayload, Family, RunConfig, TheorySpec
from services.analysis import (
    GENERATOR_SETS,
    UnknownGateError,
    WalkDomainError,
    bqp_limit,
    close_group,
    density_witness,
    generator_set,
    named_target,
    synthesize_word,
    walk_exact,
    walk_monte_carlo,
)
from services.anyon_model import AnyonModelError, ConsistencyError, build_model
from services.consistency import GluingCheckError, semion_gluing_check, verify_consistency
from services.fusion_state import DegenerateStateError, EntanglementError
from services.protocol_runner import PROTOCOLS, UnknownProtocolError, build_branch_tree, get_protocol, run_shots
from services.protocols import AncillaRejectedError
from services.qubit_encodings import EncodingError, EncodingKind, LeakageError, gates_dump
from services.report_renderer import ReportRenderError, render_table
from utils import io_utils
from utils.config import get_settings
from utils.rng import shot_stream
from utils.run_logger import RunLogger
from utils.validation import PayloadValidationError, format_validation_errors, write_schemas

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

_PROTOCOL_PARAMS = ("phi", "s", "n", "eps", "braid")


class UsageError(ValueError):
    """Raised for flag combinations argparse cannot reject on its own."""


@dataclass
class CommandResult:
    view: str
    payload: BaseModel
    rows: List[Dict[str, Any]] = field(default_factory=list)
    exit_code: int = EXIT_OK


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------
def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("json", "csv", "table"), default="json")
    parser.add_argument("--output", type=Path, default=None, help="Write to a file instead of stdout")
    parser.add_argument("--tol", type=float, default=None)


def _theory(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", default="jk", help="jk or su2")
    parser.add_argument("--level", type=int, default=4)
    parser.add_argument("--conjugate", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anyonkit", description="SU(2)_k / JK_k anyon toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    model = commands.add_parser("model", help="Anyon model data").add_subparsers(dest="action", required=True)
    for action, help_text in (("dump", "F, R and modular data"), ("verify", "coherence residuals"), ("table", "d, theta, kappa, S")):
        sub = model.add_parser(action, help=help_text)
        _theory(sub)
        _common(sub)
        if action == "verify":
            sub.add_argument("--gluing", action="store_true", help="Also compare SU(2)_4 with JK_4 x semion")

    gates = commands.add_parser("gates", help="Braid gate matrices").add_subparsers(dest="action", required=True)
    sub = gates.add_parser("dump")
    sub.add_argument("--encoding", choices=("1111", "1221"), default="1221")
    _common(sub)

    protocol = commands.add_parser("protocol", help="Fusion and measurement protocols").add_subparsers(
        dest="action", required=True
    )
    for action in ("run", "branches"):
        sub = protocol.add_parser(action)
        sub.add_argument("--name", required=True, choices=sorted(PROTOCOLS))
        sub.add_argument("--max-attempts", type=int, default=None)
        sub.add_argument("--phi", type=float, default=None)
        sub.add_argument("--s", type=int, choices=(-1, 1), default=None)
        sub.add_argument("--n", type=int, default=None, help="K random-walk step budget")
        sub.add_argument("--eps", type=float, default=None, help="Hadamard perturbation")
        sub.add_argument("--braid", type=int, choices=(0, 1), default=None)
        _common(sub)
        if action == "run":
            sub.add_argument("--seed", type=int, default=0)
            sub.add_argument("--shots", type=int, default=1)
            sub.add_argument("--threads", type=int, default=None)
        else:
            sub.add_argument("--no-maps", action="store_true")
            sub.add_argument(
                "--floor", type=float, default=None, help="Stop exploring branches below this probability"
            )

    analyze = commands.add_parser("analyze", help="Group closure and random-walk analysis").add_subparsers(
        dest="action", required=True
    )
    sub = analyze.add_parser("closure")
    sub.add_argument("--set", dest="generator_set", choices=GENERATOR_SETS, required=True)
    sub.add_argument("--cap", type=int, default=None)
    _common(sub)
    sub = analyze.add_parser("walk")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--trials", type=int, default=None)
    sub.add_argument("--seed", type=int, default=0)
    _common(sub)
    sub = analyze.add_parser("bqp")
    sub.add_argument("--k", required=True, help="Comma separated gate counts")
    _common(sub)
    sub = analyze.add_parser("density")
    _common(sub)

    sub = commands.add_parser("synth", help="Search a braid/K word near a target gate")
    sub.add_argument("--target", default="H")
    sub.add_argument("--eps", type=float, default=0.05)
    sub.add_argument("--max-len", type=int, default=12)
    sub.add_argument("--alphabet", default="Z,B,K,K^-1")
    sub.add_argument("--k-weight", type=float, default=0.0)
    _common(sub)

    schema = commands.add_parser("schema", help="Published JSON schemas").add_subparsers(dest="action", required=True)
    sub = schema.add_parser("write")
    sub.add_argument("--dir", type=Path, default=None)
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    options = {
        key: str(value)
        for key, value in vars(args).items()
        if key not in {"command", "action", "seed", "shots", "tol", "max_attempts", "threads", "format", "output"}
        and value is not None
    }
    return RunConfig(
        command=args.command,
        action=getattr(args, "action", None),
        seed=getattr(args, "seed", 0),
        shots=getattr(args, "shots", 1),
        tol=args.tol,
        max_attempts=getattr(args, "max_attempts", None),
        threads=getattr(args, "threads", None) or get_settings().threads,
        format=args.format,
        output=args.output,
        options=options,
    )


# ----------------------------------------------------------------------
# Handlers
# ----------------------------------------------------------------------
def _spec(args: argparse.Namespace) -> TheorySpec:
    return TheorySpec(family=Family.parse(args.family, conjugate=args.conjugate), level=args.level)


def _model_command(args: argparse.Namespace, config: RunConfig, logger: RunLogger) -> CommandResult:
    model = build_model(_spec(args))
    if config.action == "dump":
        payload = model.to_payload()
        rows = [{"kind": "F", "idx": " ".join(map(str, e.idx)), "re": e.re, "im": e.im} for e in payload.f_symbols]
        rows += [{"kind": "R", "idx": " ".join(map(str, e.idx)), "re": e.re, "im": e.im} for e in payload.r_symbols]
        return CommandResult("payload", payload, rows)
    if config.action == "table":
        payload = model.table_payload()
        rows = [
            {"charge": r.charge, "spin": r.spin, "qdim": r.qdim, "twist_re": r.twist.re, "twist_im": r.twist.im, "frob_schur": r.frob_schur}
            for r in payload.rows
        ]
        return CommandResult("model_table", payload, rows)

    tol = config.tol or get_settings().tol
    report = verify_consistency(model, tol, raise_on_failure=False, logger=logger)
    gluing: Optional[bool] = None
    if args.gluing:
        try:
            gluing = semion_gluing_check(tol)
        except GluingCheckError:
            gluing = False
    payload = report.to_payload(semion_gluing=gluing)
    rows = [{"identity": name, "residual": value} for name, value in payload.residuals.items()]
    failed = not payload.passed or gluing is False
    return CommandResult("verify", payload, rows, EXIT_FAILED if failed else EXIT_OK)


def _gates_command(args: argparse.Namespace, config: RunConfig, logger: RunLogger) -> CommandResult:
    payload = gates_dump(EncodingKind.parse(args.encoding))
    rows = [
        {"gate": gate.name, "row": i, "col": j, "re": entry.re, "im": entry.im}
        for gate in payload.gates
        for i, row in enumerate(gate.canonical)
        for j, entry in enumerate(row)
    ]
    return CommandResult("gates", payload, rows)


def _protocol_params(args: argparse.Namespace) -> Dict[str, float]:
    return {key: float(getattr(args, key)) for key in _PROTOCOL_PARAMS if getattr(args, key) is not None}


def _protocol_command(args: argparse.Namespace, config: RunConfig, logger: RunLogger) -> CommandResult:
    definition = get_protocol(args.name)
    params = _protocol_params(args)
    if config.action == "run":
        payload = run_shots(
            definition,
            params,
            seed=config.seed,
            shots=config.shots,
            threads=config.threads,
            max_attempts=config.max_attempts,
            logger=logger,
        )
        rows = [{"label": label, "frequency": frequency} for label, frequency in payload.aggregate.items()]
        return CommandResult("trace", payload, rows)
    kwargs = {} if config.max_attempts is None else {"max_attempts": config.max_attempts}
    if args.floor is not None and not 0.0 <= args.floor < 1.0:
        raise UsageError(f"--floor must lie in [0, 1), got {args.floor}")
    tree = build_branch_tree(
        definition, params, floor=args.floor, with_maps=not args.no_maps, logger=logger, **kwargs
    )
    payload = tree.to_payload()
    rows = [
        {
            "path": " ".join(f"{step}={outcome}" for step, outcome in leaf.path),
            "probability": leaf.probability,
            "success": leaf.success,
            "label": leaf.label,
        }
        for leaf in tree.leaves
    ]
    return CommandResult("branches", payload, rows)


def _analyze_command(args: argparse.Namespace, config: RunConfig, logger: RunLogger) -> CommandResult:
    if config.action == "closure":
        result = close_group(generator_set(args.generator_set), cap=args.cap, name=args.generator_set)
        payload = result.to_payload()
        return CommandResult("closure", payload, [payload.to_json_dict()])
    if config.action == "walk":
        stats = walk_exact(args.n)
        monte_carlo = None
        if args.trials:
            monte_carlo = walk_monte_carlo(args.n, args.trials, shot_stream(config.seed, 0, purpose=1))
        payload = stats.to_payload(monte_carlo, args.trials)
        row = {key: value for key, value in payload.to_json_dict().items() if key != "pathCounts"}
        return CommandResult("walk", payload, [row])
    if config.action == "bqp":
        try:
            ks = [int(token) for token in args.k.split(",") if token.strip()]
        except ValueError as exc:
            raise UsageError(f"--k expects comma separated integers, got '{args.k}'") from exc
        payload = bqp_limit(ks)
        return CommandResult("bqp", payload, [row.to_json_dict() for row in payload.rows])
    payload = density_witness()
    row = payload.to_json_dict()
    row["continuedFraction"] = " ".join(map(str, payload.continued_fraction))
    row["expIAlpha"] = f"{payload.exp_i_alpha.re}{payload.exp_i_alpha.im:+}j"
    return CommandResult("density", payload, [row])


def _synth_command(args: argparse.Namespace, config: RunConfig, logger: RunLogger) -> CommandResult:
    alphabet = [token.strip() for token in args.alphabet.split(",") if token.strip()]
    result = synthesize_word(
        named_target(args.target), alphabet=alphabet, max_len=args.max_len, eps=args.eps, k_weight=args.k_weight
    )
    payload = result.to_payload(args.target)
    logger.log("synth", extra={"target": args.target, "found": payload.found, "length": payload.length})
    row = payload.to_json_dict()
    row["word"] = " ".join(payload.word)
    return CommandResult("synth", payload, [row], EXIT_OK if payload.found else EXIT_FAILED)


_HANDLERS = {
    "model": _model_command,
    "gates": _gates_command,
    "protocol": _protocol_command,
    "analyze": _analyze_command,
    "synth": _synth_command,
}


# ----------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------
def render(result: CommandResult, fmt: str) -> str:
    if fmt == "csv":
        return io_utils.dumps_csv(result.rows)
    data = result.payload.to_json_dict()
    if fmt == "table":
        return render_table(result.view, data)
    return io_utils.dumps_json(data)


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        io_utils.write_text(output, text)


def _error(exc: BaseException, fmt: str, details: Optional[Dict[str, Any]] = None) -> None:
    if fmt == "json":
        payload = ErrorPayload(error=ErrorDetail(type=type(exc).__name__, message=str(exc), details=details or {}))
        sys.stderr.write(io_utils.dumps_json(payload.to_json_dict()))
    else:
        sys.stderr.write(f"error: {exc}\n")


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and return the process exit code."""

    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    fmt = getattr(args, "format", "json")
    if args.command == "schema":
        for path in write_schemas(args.dir) if args.dir else write_schemas():
            sys.stdout.write(f"{path}\n")
        return EXIT_OK

    try:
        config = run_config(args)
    except ValidationError as exc:
        _error(exc, fmt, {"errors": format_validation_errors(exc)})
        return EXIT_USAGE

    settings = get_settings()
    logger = RunLogger.from_settings() if settings.log_enabled else RunLogger.disabled()
    logger.log("cli_dispatch", extra={"config": config.model_dump(mode="json")})
    try:
        result = _HANDLERS[config.command](args, config, logger)
        text = render(result, config.format)
    except ConsistencyError as exc:
        _error(exc, fmt, {"violations": exc.violations})
        return EXIT_FAILED
    except (
        UsageError,
        UnknownProtocolError,
        UnknownGateError,
        WalkDomainError,
        AnyonModelError,
        EncodingError,
        AncillaRejectedError,
        PayloadValidationError,
        ValidationError,
        ValueError,
    ) as exc:
        _error(exc, fmt)
        return EXIT_USAGE
    except EntanglementError as exc:
        _error(exc, fmt, {"weight": exc.weight})
        return EXIT_USAGE
    except LeakageError as exc:
        _error(exc, fmt, {"leakedMass": exc.leaked_mass})
        return EXIT_USAGE
    except DegenerateStateError as exc:
        _error(exc, fmt)
        return EXIT_USAGE
    except ReportRenderError as exc:
        _error(exc, fmt)
        return EXIT_FAILED
    _emit(text, config.output)
    return result.exit_code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
