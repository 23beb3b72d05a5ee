from diagrams.fileformat import format_diagram
from diagrams.simpson import AssociationMeasure, collapsibility_check, simpson_witness_search

from ._base import PathCommand, real


class Command(PathCommand):
    help = (
        "Collapsibility of the covariance and of the regression coefficient of Y on X over S; "
        "with --search, look for parameters under which conditioning on S reverses that coefficient's sign."
    )

    def add_command_arguments(self, parser):
        parser.add_argument("x")
        parser.add_argument("y")
        parser.add_argument("--given", nargs="*", default=[], metavar="NODE")
        parser.add_argument("--search", type=int, default=0, metavar="N", help="random parameterizations to try")
        parser.add_argument("--seed", type=int, default=0)

    def run(self, parsed, x, y, given, search, seed, **options):
        diagram = parsed.diagram
        self.require_nodes(diagram, x, y, *given)
        verdicts = [collapsibility_check(diagram, x, y, given, m) for m in AssociationMeasure]
        lines = [
            f"{v.measure.value}: {real(v.marginal)} -> {real(v.conditional)} {v.label}"
            for v in verdicts
        ]
        record = {
            "x": x,
            "y": y,
            "given": sorted(set(given)),
            "verdicts": [v.model_dump(mode="json") for v in verdicts],
        }
        if search:
            witness = simpson_witness_search(diagram, x, y, given, trials=search, seed=seed)
            record["witness"] = None if witness is None else witness.model_dump(mode="json")
            if witness is None:
                lines.append(f"no sign reversal in {search} trials")
            else:
                lines.append(
                    f"sign reversal at trial {witness.trial}: "
                    f"{real(witness.beta_marginal)} -> {real(witness.beta_conditional)}"
                )
                lines.append(format_diagram(witness.diagram).rstrip("\n"))
        self.emit(lines, record, options)
