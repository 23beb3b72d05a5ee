import numpy as np

from diagrams.fileformat import format_diagram, query_header
from diagrams.harness import random_diagram, random_query

from ._base import PathCommand, add_generator_arguments, generator_config, write_text


class Command(PathCommand):
    help = "Generate a random valid diagram file."

    reads_diagram = False

    def add_command_arguments(self, parser):
        add_generator_arguments(parser)
        parser.add_argument("--query", action="store_true", help="add a random query to the header")
        parser.add_argument("-o", "--output")

    def run(self, parsed, query, output, **options):
        config = generator_config(options)
        rng = np.random.default_rng(config.seed)
        diagram = random_diagram(config, rng)
        header = [f"seed: {config.seed}"]
        record = {"config": config.model_dump(mode="json"), "query": None}
        if query:
            q = random_query(diagram, rng)
            header = query_header(q.x, q.y, q.s, seed=config.seed)
            record["query"] = q.model_dump(mode="json")
        text = format_diagram(diagram, header)
        record["diagram"] = text
        if output:
            write_text(output, text)
            lines = [f"wrote {output}"]
        else:
            lines = [text.rstrip("\n")]
        self.emit(lines, record, options)
