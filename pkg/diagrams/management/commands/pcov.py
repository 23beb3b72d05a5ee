from diagrams.gaussian import implied_covariance, partial_covariance

from ._base import PathCommand, real


class Command(PathCommand):
    help = "Partial covariance σ_XY·S by Schur complement."

    def add_command_arguments(self, parser):
        parser.add_argument("x")
        parser.add_argument("y")
        parser.add_argument("--given", nargs="*", default=[], metavar="NODE")

    def run(self, parsed, x, y, given, **options):
        self.require_nodes(parsed.diagram, x, y, *given)
        given = sorted(set(given))
        value = partial_covariance(implied_covariance(parsed.diagram), x, y, given)
        record = {"x": x, "y": y, "given": given, "partial_covariance": value}
        self.emit([real(value)], record, options)
