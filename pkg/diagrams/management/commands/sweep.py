import sys

from diagrams.harness import sweep_simpson, sweep_soundness

from ._base import PathCommand, add_generator_arguments, generator_config, real, write_text


class Command(PathCommand):
    help = "Run the soundness or Simpson sweep over random diagrams and queries."

    reads_diagram = False

    def add_command_arguments(self, parser):
        parser.add_argument("--kind", choices=("soundness", "simpson"), default="soundness")
        parser.add_argument("--trials", type=int, default=100)
        parser.add_argument("--witness-trials", type=int, default=0, help="simpson sweep only")
        parser.add_argument("--artifact", help="write the first failing instance here")
        parser.add_argument("--progress", action="store_true", help="progress bar on stderr")
        add_generator_arguments(parser)

    def run(self, parsed, kind, trials, witness_trials, artifact, progress, **options):
        config = generator_config(options)
        progress = progress and sys.stderr.isatty()
        if kind == "soundness":
            stats = sweep_soundness(config, trials, progress=progress)
            lines = [
                f"trials: {stats.trials}",
                f"passed: {stats.passed}",
                f"failed: {stats.failed}",
                f"separated: {stats.separated}",
                f"inapplicable: {stats.inapplicable}",
            ]
            lines += [f"  {k}: {n}" for k, n in stats.inapplicable_kinds.items()]
            lines += [
                f"collider instances: {stats.collider_instances}",
                f"skipped: {stats.skipped}",
                f"max relative error: {real(stats.max_relative_error)}",
            ]
        else:
            stats = sweep_simpson(config, trials, witness_trials=witness_trials, progress=progress)
            lines = [
                f"trials: {stats.trials}",
                f"applicable: {stats.applicable}",
                f"separated: {stats.separated}",
                f"inapplicable: {stats.inapplicable}",
                f"skipped: {stats.skipped}",
                f"reversals: {stats.reversals}",
                f"base sign mismatches: {stats.base_sign_mismatches}",
            ]
            if witness_trials:
                lines.append(f"witnesses: {stats.witnesses}")

        failure = stats.first_failure
        if failure is not None:
            lines.append(f"first failure: trial {failure.trial} ({failure.reason})")
            if artifact:
                write_text(artifact, failure.text)
                lines.append(f"artifact: {artifact}")
        self.emit(lines, stats, options)
