import itertools

import numpy as np
from django.test import SimpleTestCase, tag
from hypothesis import given, settings, strategies as st

from diagrams.conf import close
from diagrams.diagram import Edge, PathDiagram
from diagrams.exceptions import DiagramError, NumericalError, PremiseError
from diagrams.gaussian import (
    CovarianceMatrix,
    implied_covariance,
    lemma_aux1_update,
    lemma_aux2_update,
    lemma_aux3_update,
    partial_covariance,
    partial_matrix,
    partial_variance,
    regression_coefficient,
    wright_covariance,
)
from diagrams.harness import GeneratorConfig, random_diagram, random_instance
from diagrams.sampling import sample_parameters
from diagrams.separation import m_separated

from . import figures

seeds = st.integers(min_value=0, max_value=2**32 - 1)


class ImpliedCovarianceTests(SimpleTestCase):
    def test_chain(self):
        sigma = implied_covariance(figures.load("chain"))
        expected = {
            ("X", "X"): 1.0, ("X", "Y"): 1.0, ("Y", "Y"): 2.0,
            ("Y", "Z"): 2.0, ("Z", "Z"): 3.0, ("X", "Z"): 1.0,
        }
        for (a, b), value in expected.items():
            self.assertAlmostEqual(sigma.entry(a, b), value, places=12)
            self.assertAlmostEqual(sigma.entry(b, a), value, places=12)

    def test_invalid_diagram_refused(self):
        diagram = PathDiagram.from_parts([Edge.directed("X", "Y", 1.0), Edge.directed("Y", "X", 1.0)])
        with self.assertRaises(DiagramError):
            implied_covariance(diagram)

    def test_values_are_read_only(self):
        sigma = implied_covariance(figures.load("chain"))
        with self.assertRaises(ValueError):
            sigma.values[0, 0] = 5.0


class PartialCovarianceTests(SimpleTestCase):
    def test_chain(self):
        sigma = implied_covariance(figures.load("chain"))
        self.assertAlmostEqual(partial_covariance(sigma, "X", "Y", ["Z"]), 1 / 3, places=12)
        self.assertAlmostEqual(partial_covariance(sigma, "X", "Z", ["Y"]), 0.0, places=12)
        self.assertEqual(partial_covariance(sigma, "X", "Y"), sigma.entry("X", "Y"))
        self.assertAlmostEqual(partial_variance(sigma, "Y", ["Z"]), 2 / 3, places=12)

    def test_regression_coefficient(self):
        sigma = implied_covariance(figures.load("chain"))
        self.assertAlmostEqual(regression_coefficient(sigma, "Y", "X"), 1.0, places=12)
        self.assertAlmostEqual(regression_coefficient(sigma, "Z", "X", ["Y"]), 0.0, places=12)

    def test_singular_conditioning_block(self):
        sigma = CovarianceMatrix(nodes=("A", "B", "C"), values=[[1, 1, 0], [1, 1, 0], [0, 0, 1]])
        with self.assertRaises(NumericalError):
            partial_covariance(sigma, "C", "C", ["A", "B"])

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_conditioning_in_two_steps(self, seed):
        diagram = random_diagram(GeneratorConfig(node_count=6, edge_density=0.5, seed=seed))
        sigma = implied_covariance(diagram)
        x, y, a, b, c, _ = diagram.nodes
        step = partial_matrix(sigma, [a])
        self.assertTrue(close(
            partial_covariance(step, x, y, [b, c]),
            partial_covariance(sigma, x, y, [a, b, c]),
            abs_tol=1e-9 * sigma.scale(),
        ))

    def test_partial_matrix_without_z_is_identity(self):
        sigma = implied_covariance(figures.load("chain"))
        self.assertIs(partial_matrix(sigma, []), sigma)


class WrightTests(SimpleTestCase):
    def test_chain_single_term(self):
        decomposition = wright_covariance(figures.load("chain"), "X", "Y")
        [term] = decomposition.terms
        self.assertEqual(term.path.label(), "X -> Y")
        self.assertEqual(term.root, "X")
        self.assertAlmostEqual(term.monomial, 1.0)
        self.assertAlmostEqual(decomposition.total, 1.0)

    def test_bidirected_term(self):
        diagram = PathDiagram.from_parts([Edge.directed("X", "Y", 0.5), Edge.bidirected("X", "Y", 0.3)])
        decomposition = wright_covariance(diagram, "X", "Y")
        self.assertEqual(len(decomposition.terms), 2)
        self.assertEqual(sorted(t.covariance for t in decomposition.terms if t.root is None), [0.3])
        self.assertAlmostEqual(decomposition.total, 0.8, places=12)

    def test_total_matches_implied_covariance(self):
        for name in ("root_spine", "arrowhead_spine", "two_segments", "mixed_root", "reversible"):
            diagram = figures.load(name)
            sigma = implied_covariance(diagram)
            for x, y in (("X", "Y"), ("X1", "X4"), ("X", "S")):
                if x in diagram.index and y in diagram.index:
                    with self.subTest(name=name, x=x, y=y):
                        total = wright_covariance(diagram, x, y).total
                        self.assertTrue(close(total, sigma.entry(x, y), abs_tol=1e-12))


    @tag("sweep")
    def test_random_diagrams_all_pairs(self):
        for seed in range(500):
            config = GeneratorConfig(node_count=5, edge_density=0.5, bidirected_fraction=0.3, seed=seed)
            diagram = random_diagram(config)
            sigma = implied_covariance(diagram)
            for x, y in itertools.combinations(diagram.nodes, 2):
                total = wright_covariance(diagram, x, y).total
                self.assertTrue(close(total, sigma.entry(x, y), rel_tol=1e-9, abs_tol=1e-12), (seed, x, y))


class MarkovTests(SimpleTestCase):
    @settings(max_examples=80, deadline=None)
    @given(seeds, st.booleans())
    def test_separated_pairs_have_zero_partial_covariance(self, trial, tree):
        config = GeneratorConfig(node_count=6, edge_density=0.35, bidirected_fraction=0.3, singly_connected=tree, seed=21)
        diagram, query = random_instance(config, trial)
        sigma = implied_covariance(diagram)
        for x, y in itertools.combinations([n for n in diagram.nodes if n not in query.s], 2):
            if m_separated(diagram, x, y, query.s):
                value = partial_covariance(sigma, x, y, query.s)
                self.assertLessEqual(abs(value), 1e-9 * sigma.scale(), (x, y, query.s))

class LemmaTests(SimpleTestCase):
    def test_deflation_through_the_middle_node(self):
        diagram = figures.load("chain")
        sigma = implied_covariance(diagram)
        value = lemma_aux1_update(sigma, "X", "Y", r="Y", w="Z", diagram=diagram)
        self.assertAlmostEqual(value, 1 / 3, places=12)

    def test_deflation_at_an_endpoint(self):
        diagram = figures.load("chain")
        sigma = implied_covariance(diagram)
        value = lemma_aux2_update(sigma, "Y", "X", "Z", diagram=diagram)
        self.assertAlmostEqual(value, partial_covariance(sigma, "X", "Y", ["Z"]), places=12)

    def test_separated_node_changes_nothing(self):
        diagram = PathDiagram.from_parts([Edge.directed("X", "Y", 0.8), Edge.directed("W", "Y", 0.5)])
        sigma = implied_covariance(diagram)
        value = lemma_aux3_update(sigma, "X", "Y", "W", diagram=diagram)
        self.assertAlmostEqual(value, partial_covariance(sigma, "X", "Y", ["W"]), places=12)

    def test_strict_mode_checks_premises(self):
        diagram = figures.load("chain")
        sigma = implied_covariance(diagram)
        with self.assertRaises(PremiseError):
            lemma_aux3_update(sigma, "X", "Z", "Y", diagram=diagram)
        with self.assertRaises(PremiseError):
            lemma_aux2_update(sigma, "X", "Z", "Y", diagram=diagram)
        # without the diagram the identity is applied unchecked
        lemma_aux3_update(sigma, "X", "Z", "Y")

    def test_naive_substitution_fails_where_deflation_holds(self):
        structure = figures.load("chain")
        naive_misses = 0
        trials = 200
        for trial in range(trials):
            diagram = sample_parameters(structure, np.random.default_rng([7, trial]))
            sigma = implied_covariance(diagram)
            alpha = diagram.directed_edge("X", "Y").weight
            truth = partial_covariance(sigma, "X", "Y", ["Z"])
            naive = alpha * partial_variance(sigma, "X", ["Z"])
            naive_misses += not close(naive, truth, rel_tol=1e-9, abs_tol=1e-12)
            deflated = lemma_aux1_update(sigma, "X", "Y", r="Y", w="Z")
            self.assertTrue(close(deflated, truth, rel_tol=1e-9, abs_tol=1e-12))
        self.assertGreaterEqual(naive_misses, 0.99 * trials)

    @tag("sweep")
    def test_identities_hold_whenever_premises_do(self):
        """Premises decided by m-separation; strict mode must agree with them."""
        applied = {"aux1": 0, "aux2": 0, "aux3": 0}
        for trial in range(500):
            config = GeneratorConfig(node_count=6, edge_density=0.35, bidirected_fraction=0.2, seed=trial)
            diagram = random_diagram(config)
            sigma = implied_covariance(diagram)
            rng = np.random.default_rng([13, trial])
            x, y, r, w, *rest = rng.permutation(diagram.nodes).tolist()
            z = tuple(n for n in rest if rng.random() < 0.5)
            truth = partial_covariance(sigma, x, y, z + (w,))

            def sep(a, b, given):
                return m_separated(diagram, a, b, given)

            cases = (
                (
                    "aux1",
                    all(sep(a, b, z + (r,)) for a, b in ((x, w), (y, w), (x, y))),
                    lambda strict: lemma_aux1_update(sigma, x, y, r, w, z, diagram=strict),
                ),
                (
                    "aux2",
                    sep(y, w, z + (x,)),
                    lambda strict: lemma_aux2_update(sigma, x, y, w, z, diagram=strict),
                ),
                (
                    "aux3",
                    sep(x, w, z) or sep(y, w, z),
                    lambda strict: lemma_aux3_update(sigma, x, y, w, z, diagram=strict),
                ),
            )
            for name, holds, update in cases:
                if holds:
                    applied[name] += 1
                    self.assertTrue(close(update(diagram), truth, rel_tol=1e-9, abs_tol=1e-12), (name, trial))
                else:
                    with self.assertRaises(PremiseError, msg=(name, trial)):
                        update(diagram)
        for name, count in applied.items():
            self.assertGreater(count, 0, name)
