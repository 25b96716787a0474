"""Command-line interface.

Subcommands: ``run`` (execute a search), ``resume`` (continue a checkpointed
run), ``compile`` (genome to descriptor JSON), ``validate`` (feasibility
check), ``stats`` (per-generation CSV) and ``report`` (CSV plus figures).
Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .engine import (
    CheckpointError,
    ConfigError,
    EvolutionConfig,
    make_library,
    resume,
    run,
    write_stats_csv,
)
from .arch import CompileError, compile_tree
from .fitness import EvaluatorError
from .sexpr import ParseError, parse

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract here is 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="treenas",
        description="Evolutionary search over tree-encoded CNN architectures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="execute a search")
    run_parser.add_argument("--config", required=True, help="JSON config file")
    run_parser.add_argument("--seed", type=int, help="override the master seed")
    run_parser.add_argument("--out", help="override the run directory")
    run_parser.add_argument(
        "--evaluator", help="override: surrogate or external:\"<command>\""
    )
    run_parser.add_argument("--population", type=int, help="override population size")
    run_parser.add_argument(
        "--generations", type=int, help="override generation count"
    )
    run_parser.add_argument(
        "--mutation-rate", type=float, help="override mutation rate"
    )

    resume_parser = sub.add_parser("resume", help="continue a checkpointed run")
    resume_parser.add_argument("--run", required=True, dest="run_dir")

    compile_parser = sub.add_parser(
        "compile", help="print the architecture descriptor for a genome"
    )
    compile_parser.add_argument("--sexpr", required=True)
    compile_parser.add_argument("--format", choices=["json"], default="json")

    validate_parser = sub.add_parser("validate", help="check genome feasibility")
    validate_parser.add_argument("--sexpr", required=True)

    stats_parser = sub.add_parser("stats", help="emit the per-generation CSV")
    stats_parser.add_argument("--run", required=True, dest="run_dir")
    stats_parser.add_argument("--out", required=True)

    report_parser = sub.add_parser(
        "report", help="render figures and CSV for a finished run"
    )
    report_parser.add_argument("--run", required=True, dest="run_dir")
    report_parser.add_argument("--out", required=True)

    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = EvolutionConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["run_dir"] = args.out
    if args.evaluator is not None:
        overrides["evaluator"] = args.evaluator
    if args.population is not None:
        overrides["population_size"] = args.population
    if args.generations is not None:
        overrides["generations"] = args.generations
    if args.mutation_rate is not None:
        overrides["mutation_rate"] = args.mutation_rate
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate()
    report = run(config)
    assert report is not None
    print(f"best {report.best_fitness!r} {report.best_sexpr}")
    print(f"report written to {config.run_dir}/report.json")
    return EXIT_OK


def _cmd_resume(args: argparse.Namespace) -> int:
    report = resume(args.run_dir)
    print(f"best {report.best_fitness!r} {report.best_sexpr}")
    print(f"report written to {args.run_dir}/report.json")
    return EXIT_OK


def _cmd_compile(args: argparse.Namespace) -> int:
    tree = parse(args.sexpr)
    descriptor = compile_tree(tree, make_library(EvolutionConfig()))
    print(json.dumps(descriptor.to_json_dict(), indent=2))
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    tree = parse(args.sexpr, check=False)
    violations = tree.validate(tuple(EvolutionConfig().block_library))
    if not violations:
        print("ok")
        return EXIT_OK
    for violation in violations:
        print(f"violation [{violation.rule}] at node {violation.cursor}:"
              f" {violation.message}")
    return EXIT_USAGE


def _cmd_stats(args: argparse.Namespace) -> int:
    write_stats_csv(args.run_dir, args.out)
    print(f"stats written to {args.out}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    from .report import render_run_report

    for path in render_run_report(args.run_dir, args.out):
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "resume": _cmd_resume,
    "compile": _cmd_compile,
    "validate": _cmd_validate,
    "stats": _cmd_stats,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command in ("run", "resume"):
        logging.basicConfig(
            level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
        )
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParseError, CompileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CheckpointError, EvaluatorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
