from diagrams.conditioning import condition
from diagrams.fileformat import format_diagram

from ._base import PathCommand, write_text


class Command(PathCommand):
    help = "Apply the conditioning transform and print (or write) the conditioned diagram."

    def add_command_arguments(self, parser):
        parser.add_argument("--on", nargs="+", required=True, metavar="NODE")
        parser.add_argument("-o", "--output", help="write the diagram here instead of stdout")

    def run(self, parsed, on, output, **options):
        self.require_nodes(parsed.diagram, *on)
        conditioned = condition(parsed.diagram, on)
        header = [f"given: {' '.join(conditioned.s_nodes)}"]
        header += [f"split: {sp.source} -> {sp.child} as {sp.node}" for sp in conditioned.splits]
        text = format_diagram(conditioned.diagram, header)
        record = {
            "s": list(conditioned.s_nodes),
            "s_prime": list(conditioned.s_prime),
            "z": list(conditioned.z),
            "splits": [sp.model_dump(mode="json") for sp in conditioned.splits],
            "diagram": text,
        }
        if output:
            write_text(output, text)
            lines = [f"wrote {output}: splits {', '.join(conditioned.s_prime) or 'none'}"]
        else:
            lines = [text.rstrip("\n")]
        self.emit(lines, record, options)
