from django.core.management.base import CommandError

from diagrams.harness import replay

from ._base import NOT_APPLICABLE, PathCommand, render_factorization


class Command(PathCommand):
    help = "Re-run the factorization recorded in a sweep failure artifact."

    def run(self, parsed, **options):
        outcome = replay(parsed)
        lines = [f"# {c}" for c in parsed.comments] + render_factorization(outcome)
        self.emit(lines, outcome, options)
        if not outcome.report.applicable:
            labels = ", ".join(f.label for f in outcome.report.failures)
            raise CommandError(f"not applicable: {labels}", returncode=NOT_APPLICABLE)
