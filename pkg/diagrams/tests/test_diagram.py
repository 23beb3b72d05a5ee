import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from diagrams.diagram import (
    Edge,
    PathDiagram,
    coefficient_matrix,
    error_covariance_matrix,
    is_positive_definite,
    require_valid,
    validate,
)
from diagrams.exceptions import DiagramError
from diagrams.harness import GeneratorConfig, random_diagram

from . import figures


class EdgeTests(SimpleTestCase):
    def test_bidirected_edges_are_stored_in_name_order(self):
        e = Edge.bidirected("Y", "X", 0.2)
        self.assertEqual(e.endpoints, ("X", "Y"))
        self.assertEqual(e, Edge.bidirected("X", "Y", 0.2))

    def test_self_loop_rejected(self):
        with self.assertRaises(ValidationError):
            Edge.directed("A", "A", 1.0)

    def test_bad_node_name_rejected(self):
        with self.assertRaises(ValidationError):
            Edge.directed("A-1", "B", 1.0)

    def test_arrowheads(self):
        d = Edge.directed("A", "B", 1.0)
        self.assertFalse(d.has_arrowhead_at("A"))
        self.assertTrue(d.has_arrowhead_at("B"))
        b = Edge.bidirected("A", "B", 0.1)
        self.assertTrue(b.has_arrowhead_at("A"))
        self.assertTrue(b.has_arrowhead_at("B"))
        with self.assertRaises(DiagramError):
            d.has_arrowhead_at("C")


class PathDiagramTests(SimpleTestCase):
    def test_nodes_inferred_and_variances_defaulted(self):
        diagram = PathDiagram.from_parts([Edge.directed("B", "A", 0.5)], {"C": 2.0})
        self.assertEqual(diagram.nodes, ("A", "B", "C"))
        self.assertEqual(diagram.error_variance, {"A": 1.0, "B": 1.0, "C": 2.0})

    def test_neighbourhoods(self):
        diagram = figures.load("split_two_children")
        self.assertEqual(diagram.children("A"), {"B", "C"})
        self.assertEqual(diagram.parents("A"), {"P"})
        self.assertEqual(diagram.spouses("A"), {"Q"})

    def test_child_and_spouse_at_once(self):
        diagram = figures.load("child_and_spouse")
        self.assertIn("S", diagram.children("R"))
        self.assertIn("S", diagram.spouses("R"))
        self.assertTrue(validate(diagram).ok)

    def test_unknown_node(self):
        with self.assertRaises(DiagramError):
            figures.load("chain").parents("Q")

    def test_ancestors_and_descendants_include_the_start(self):
        diagram = figures.load("chain")
        self.assertEqual(diagram.descendants_of(["Y"]), {"Y", "Z"})
        self.assertEqual(diagram.ancestors_of(["Y"]), {"X", "Y"})

    def test_singly_connected(self):
        self.assertTrue(figures.load("chain").is_singly_connected())
        self.assertFalse(figures.load("child_and_spouse").is_singly_connected())
        self.assertFalse(figures.load("reversible").is_singly_connected())


class ValidateTests(SimpleTestCase):
    def test_chain_is_valid(self):
        report = validate(figures.load("chain"))
        self.assertTrue(report.ok)
        self.assertEqual(report.model_dump()["ok"], True)

    def test_directed_cycle(self):
        diagram = PathDiagram.from_parts([Edge.directed("X", "Y", 1.0), Edge.directed("Y", "X", 1.0)])
        kinds = [v.kind for v in validate(diagram).violations]
        self.assertEqual(kinds, ["directed cycle"])
        with self.assertRaises(DiagramError):
            require_valid(diagram)

    def test_duplicate_edge(self):
        diagram = PathDiagram.from_parts([Edge.directed("X", "Y", 1.0), Edge.directed("X", "Y", 2.0)])
        self.assertIn("duplicate edge", [v.kind for v in validate(diagram).violations])

    def test_parallel_directed_and_bidirected_allowed(self):
        diagram = PathDiagram.from_parts([Edge.directed("R", "S", 0.5), Edge.bidirected("R", "S", 0.3)])
        self.assertTrue(validate(diagram).ok)

    def test_dangling_endpoint(self):
        diagram = PathDiagram(nodes=("X",), edges=(Edge.directed("X", "Y", 1.0),), error_variance={"X": 1.0})
        self.assertEqual([v.kind for v in validate(diagram).violations], ["dangling endpoint"])

    def test_omega_not_positive_definite(self):
        diagram = PathDiagram.from_parts([Edge.bidirected("X", "Y", 1.5)])
        self.assertEqual([v.kind for v in validate(diagram).violations], ["Ω not positive definite"])

    def test_zero_variance_is_not_positive_definite(self):
        self.assertFalse(is_positive_definite(np.diag([1.0, 0.0])))
        self.assertTrue(is_positive_definite(np.zeros((0, 0))))


class MatrixTests(SimpleTestCase):
    def test_chain_matrices(self):
        diagram = figures.load("chain")
        lam = coefficient_matrix(diagram)
        i = diagram.index
        self.assertEqual(lam[i["X"], i["Y"]], 1.0)
        self.assertEqual(lam[i["Y"], i["Z"]], 1.0)
        self.assertEqual(np.count_nonzero(lam), 2)
        np.testing.assert_array_equal(error_covariance_matrix(diagram), np.eye(3))

    def test_error_covariances_only_at_bidirected_pairs(self):
        diagram = figures.load("root_spine")
        omega = error_covariance_matrix(diagram)
        off = {
            tuple(sorted((diagram.nodes[a], diagram.nodes[b])))
            for a, b in zip(*np.nonzero(omega - np.diag(np.diag(omega))))
        }
        self.assertEqual(off, {("F", "X_3"), ("E", "F")})

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_coefficient_matrix_is_nilpotent(self, seed):
        diagram = random_diagram(GeneratorConfig(node_count=6, edge_density=0.5, seed=seed))
        lam = coefficient_matrix(diagram)
        power = np.linalg.matrix_power(lam, len(diagram.nodes))
        self.assertTrue(np.allclose(power, 0.0))
