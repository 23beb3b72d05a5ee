from django.core.management.base import CommandError

from diagrams.exceptions import InapplicableError
from diagrams.factorize import chained_factorization, factorized_partial_covariance

from ._base import NOT_APPLICABLE, PathCommand, render_factorization


class Command(PathCommand):
    help = "Factorize σ_XY·S into the base covariance times partial-variance ratios and check it against the oracle."

    def add_command_arguments(self, parser):
        parser.add_argument("x")
        parser.add_argument("y")
        parser.add_argument("--given", nargs="*", default=[], metavar="NODE")
        parser.add_argument("--chained", action="store_true", help="allow several disjoint spine segments")

    def run(self, parsed, x, y, given, chained, **options):
        self.require_nodes(parsed.diagram, x, y, *given)
        if chained:
            try:
                outcome = chained_factorization(parsed.diagram, x, y, given)
            except InapplicableError as exc:
                labels = [f.label for f in exc.report.failures]
                record = {"x": x, "y": y, "s": sorted(set(given)), "applicable": False, "failures": labels}
                self.emit([f"not applicable: {', '.join(labels)}"], record, options)
                raise CommandError(str(exc), returncode=NOT_APPLICABLE) from exc
        else:
            outcome = factorized_partial_covariance(parsed.diagram, x, y, given)
        self.emit(render_factorization(outcome), outcome, options)
        if not outcome.report.applicable:
            labels = ", ".join(f.label for f in outcome.report.failures)
            raise CommandError(f"not applicable: {labels}", returncode=NOT_APPLICABLE)
