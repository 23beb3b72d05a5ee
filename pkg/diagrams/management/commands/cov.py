from diagrams.gaussian import implied_covariance

from ._base import PathCommand, real


class Command(PathCommand):
    help = "Implied covariance σ_XY of two nodes."

    def add_command_arguments(self, parser):
        parser.add_argument("x")
        parser.add_argument("y")

    def run(self, parsed, x, y, **options):
        self.require_nodes(parsed.diagram, x, y)
        value = implied_covariance(parsed.diagram).entry(x, y)
        self.emit([real(value)], {"x": x, "y": y, "covariance": value}, options)
