"""
Shared plumbing for the path-analysis commands: diagram loading, exit codes
and the human/JSON report split.
"""
import json
import sys
from pathlib import Path as FilePath

from django.core.management.base import BaseCommand, CommandError
from pydantic import BaseModel, ValidationError

from diagrams.diagram import validate
from diagrams.exceptions import (
    DiagramError,
    DiagramParseError,
    GenerationError,
    InapplicableError,
    NameCollisionError,
    NumericalError,
    PathLimitExceeded,
    PremiseError,
    QueryError,
    WalkNotOpenError,
)
from diagrams.factorize import Factorization
from diagrams.fileformat import DiagramFile, read_diagram
from diagrams.harness import GeneratorConfig

OK = 0
PARSE_ERROR = 1
INVALID_DIAGRAM = 2
NOT_APPLICABLE = 3
NUMERICAL_FAILURE = 4
USAGE_ERROR = 5

# checked in order, so subclasses come before DiagramError
EXIT_CODES = (
    (DiagramParseError, PARSE_ERROR),
    (NameCollisionError, INVALID_DIAGRAM),
    (QueryError, USAGE_ERROR),
    (WalkNotOpenError, USAGE_ERROR),
    (InapplicableError, NOT_APPLICABLE),
    (PremiseError, NOT_APPLICABLE),
    (NumericalError, NUMERICAL_FAILURE),
    (PathLimitExceeded, NUMERICAL_FAILURE),
    (GenerationError, NUMERICAL_FAILURE),
    (DiagramError, INVALID_DIAGRAM),
)


def real(value: float) -> str:
    return f"{value:.9g}"


def node_set(nodes) -> str:
    return "{" + ", ".join(nodes) + "}"


def render_factorization(outcome: Factorization) -> list[str]:
    lines = [f"query: {outcome.x} {outcome.y} given {node_set(outcome.s)}"]
    lines.append(f"conditioning set: {node_set(outcome.z)}")
    lines.append(f"open paths: {len(outcome.paths)}")
    lines.extend(f"  {p.label()}" for p in outcome.paths)
    if not outcome.report.applicable:
        lines.append("not applicable: " + ", ".join(f.label for f in outcome.report.failures))
        lines.extend(f"  {f.label}: {f.detail}" for f in outcome.report.failures if f.detail)
        return lines

    if outcome.spine is not None:
        spine = outcome.spine
        lines.append(f"spine: {' '.join(spine.nodes)} (m={spine.m}, n={spine.n}, {spine.variant})")
        part = outcome.partition
        for i, group in enumerate(part.z_upper, start=1):
            if group:
                lines.append(f"  Z^{i} = {node_set(group)}")
        for i, group in enumerate(part.z_lower, start=1):
            if group:
                lines.append(f"  Z_{i} = {node_set(group)}")
        lines.append(f"  leftovers = {node_set(part.leftovers)}")

    result = outcome.result
    lines.append(f"base covariance: {real(result.base)}")
    for t in result.terms:
        lines.append(
            f"  {t.node}: {node_set(t.numerator)} / {node_set(t.denominator)}"
            f" = {real(t.numerator_value)} / {real(t.denominator_value)} = {real(t.ratio)}"
        )
    theorem = "separated" if result.theorem_used is None else f"theorem {result.theorem_used}"
    lines.append(f"factorized: {real(result.value)} ({theorem})")
    lines.append(f"oracle: {real(result.oracle)}")
    lines.append("verdict: " + ("agrees" if result.agrees else "DISAGREES"))
    return lines


def add_generator_arguments(parser) -> None:
    parser.add_argument("--nodes", type=int, default=6)
    parser.add_argument("--density", type=float, default=0.3)
    parser.add_argument("--bidirected", type=float, default=0.2)
    parser.add_argument("--singly-connected", action="store_true")
    parser.add_argument("--coefficient-range", type=float, nargs=2, default=(0.1, 2.0), metavar=("LOW", "HIGH"))
    parser.add_argument("--variance-range", type=float, nargs=2, default=(0.5, 2.0), metavar=("LOW", "HIGH"))
    parser.add_argument("--seed", type=int, default=0)


def generator_config(options: dict) -> GeneratorConfig:
    try:
        return GeneratorConfig(
            node_count=options["nodes"],
            edge_density=options["density"],
            bidirected_fraction=options["bidirected"],
            singly_connected=options["singly_connected"],
            coefficient_range=tuple(options["coefficient_range"]),
            variance_range=tuple(options["variance_range"]),
            seed=options["seed"],
        )
    except ValidationError as exc:
        raise CommandError(f"bad generator settings: {exc.errors()[0]['msg']}", returncode=USAGE_ERROR) from None


class PathCommand(BaseCommand):
    """
    Base for every path-analysis command. Subclasses implement ``run`` and
    report through ``emit``; library errors become exit codes here.
    """

    requires_system_checks = []
    # first positional argument is a diagram file
    reads_diagram = True
    # refuse invalid diagrams with exit code 2 before ``run``
    requires_valid = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def usage_error(message):
            if getattr(self, "_called_from_command_line", False):
                parser.print_usage(sys.stderr)
                sys.stderr.write(f"{parser.prog}: error: {message}\n")
                sys.exit(USAGE_ERROR)
            raise CommandError(f"Error: {message}", returncode=USAGE_ERROR)

        parser.error = usage_error
        return parser

    def add_arguments(self, parser):
        if self.reads_diagram:
            parser.add_argument("diagram", help="diagram file")
        parser.add_argument("--json", action="store_true", help="emit one machine-readable record")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def load(self, path: str) -> DiagramFile:
        try:
            return read_diagram(path)
        except OSError as exc:
            raise CommandError(f"cannot read {path}: {exc.strerror}", returncode=PARSE_ERROR) from None

    def require_nodes(self, diagram, *names: str) -> None:
        known = set(diagram.nodes)
        for n in names:
            if n not in known:
                raise CommandError(f"unknown node {n!r}", returncode=USAGE_ERROR)

    def emit(self, lines: list[str], record, options: dict) -> None:
        if options.get("json"):
            if isinstance(record, BaseModel):
                record = record.model_dump(mode="json")
            self.stdout.write(json.dumps(record, sort_keys=True))
        else:
            self.stdout.write("\n".join(lines))

    def handle(self, *args, **options):
        try:
            if self.reads_diagram:
                parsed = self.load(options["diagram"])
                if self.requires_valid:
                    report = validate(parsed.diagram)
                    if not report.ok:
                        first = report.violations[0]
                        raise CommandError(f"invalid diagram: {first.kind}: {first.detail}", returncode=INVALID_DIAGRAM)
                self.run(parsed, **options)
            else:
                self.run(None, **options)
        except CommandError:
            raise
        except Exception as exc:
            for kind, code in EXIT_CODES:
                if isinstance(exc, kind):
                    raise CommandError(str(exc), returncode=code) from exc
            raise

    def run(self, parsed: DiagramFile | None, **options):
        raise NotImplementedError


def write_text(path: str, text: str) -> None:
    FilePath(path).write_text(text, encoding="utf-8")
