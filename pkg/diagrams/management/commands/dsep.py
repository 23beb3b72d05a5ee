from diagrams.separation import find_open_path

from ._base import PathCommand


class Command(PathCommand):
    help = "Decide whether X and Y are separated given S; prints an open path otherwise."

    def add_command_arguments(self, parser):
        parser.add_argument("x")
        parser.add_argument("y")
        parser.add_argument("--given", nargs="*", default=[], metavar="NODE")

    def run(self, parsed, x, y, given, **options):
        self.require_nodes(parsed.diagram, x, y, *given)
        path = find_open_path(parsed.diagram, x, y, given)
        if path is None:
            lines = ["separated"]
        else:
            lines = [f"open: {path.label()}"]
        record = {
            "x": x,
            "y": y,
            "given": sorted(set(given)),
            "separated": path is None,
            "witness": None if path is None else path.model_dump(mode="json"),
        }
        self.emit(lines, record, options)
