from diagrams.gaussian import wright_covariance

from ._base import PathCommand, real


class Command(PathCommand):
    help = "Path-by-path decomposition of σ_XY by Wright's rule."

    def add_command_arguments(self, parser):
        parser.add_argument("x")
        parser.add_argument("y")

    def run(self, parsed, x, y, **options):
        self.require_nodes(parsed.diagram, x, y)
        decomposition = wright_covariance(parsed.diagram, x, y)
        lines = []
        for term in decomposition.terms:
            if term.root is None:
                source = f"covariance {real(term.covariance)}"
            else:
                source = f"var({term.root}) {real(term.root_variance)}"
            lines.append(f"{term.path.label()}: {real(term.monomial)} [{source}]")
        lines.append(f"total: {real(decomposition.total)}")
        self.emit(lines, decomposition, options)
