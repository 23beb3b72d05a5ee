from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from diagrams.diagram import Edge
from diagrams.exceptions import DiagramParseError
from diagrams.fileformat import format_diagram, parse_diagram, query_header
from diagrams.harness import GeneratorConfig, random_diagram

from . import figures


class ParseTests(SimpleTestCase):
    def test_grammar(self):
        parsed = parse_diagram(
            "# a comment\n"
            "var X = 2.5\n"
            "X -> Y = 0.5\n"
            "\n"
            "Y <-> Z = -0.25\n"
        )
        diagram = parsed.diagram
        self.assertEqual(diagram.nodes, ("X", "Y", "Z"))
        self.assertEqual(diagram.error_variance, {"X": 2.5, "Y": 1.0, "Z": 1.0})
        self.assertEqual(
            set(diagram.edges),
            {Edge.directed("X", "Y", 0.5), Edge.bidirected("Y", "Z", -0.25)},
        )
        self.assertEqual(parsed.comments, ("a comment",))

    def test_header_metadata(self):
        parsed = parse_diagram(figures.ROOT_SPINE)
        self.assertEqual(parsed.meta["query"], "X Y")
        self.assertEqual(parsed.meta["given"], "C D E")

    def test_empty_given(self):
        parsed = parse_diagram("# given:\nX -> Y = 1\n")
        self.assertEqual(parsed.meta["given"], "")

    def test_errors_carry_line_numbers(self):
        cases = [
            ("X -> Y = 1\nX => Y = 1\n", 2),
            ("X -> Y = abc\n", 1),
            ("X -> Y = nan\n", 1),
            ("var X = 1\nvar X = 2\n", 2),
            ("X -> X = 1\n", 1),
        ]
        for text, line in cases:
            with self.subTest(text=text):
                with self.assertRaises(DiagramParseError) as ctx:
                    parse_diagram(text)
                self.assertEqual(ctx.exception.line, line)


class FormatTests(SimpleTestCase):
    def test_header_written_as_comments(self):
        text = format_diagram(figures.load("chain"), query_header("X", "Y", ["Z"], seed=3))
        self.assertTrue(text.startswith("# query: X Y\n# given: Z\n# seed: 3\n"))
        self.assertIn("X -> Y = 1.0\n", text)

    def test_figures_survive_a_round_trip(self):
        for name in figures.ALL:
            with self.subTest(name=name):
                diagram = figures.load(name)
                self.assertEqual(parse_diagram(format_diagram(diagram)).diagram, diagram)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1), st.booleans())
    def test_random_diagrams_survive_a_round_trip(self, seed, tree):
        diagram = random_diagram(GeneratorConfig(node_count=7, seed=seed, singly_connected=tree))
        self.assertEqual(parse_diagram(format_diagram(diagram)).diagram, diagram)
