from django.core.management.base import CommandError

from diagrams.diagram import validate

from ._base import INVALID_DIAGRAM, PathCommand


class Command(PathCommand):
    help = "Check a diagram file for dangling endpoints, duplicate edges, directed cycles and a non-PD Ω."

    requires_valid = False

    def run(self, parsed, **options):
        diagram = parsed.diagram
        report = validate(diagram)
        if report.ok:
            lines = [f"valid: {len(diagram.nodes)} nodes, {len(diagram.edges)} edges"]
            if diagram.is_singly_connected():
                lines.append("singly connected")
        else:
            lines = [f"{v.kind}: {v.detail}" for v in report.violations]
        self.emit(lines, report, options)
        if not report.ok:
            raise CommandError(f"{len(report.violations)} violation(s)", returncode=INVALID_DIAGRAM)
