import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from diagrams.conditioning import condition
from diagrams.exceptions import InapplicableError, QueryError
from diagrams.factorize import (
    Failure,
    chained_factorization,
    check_reentrant_routes,
    classify_segment,
    common_segments,
    factorized_partial_covariance,
    find_spine,
    partition_order_experiment,
    sign_preservation_check,
    spine_candidates,
)
from diagrams.gaussian import implied_covariance, partial_covariance, partial_variance
from diagrams.sampling import sample_parameters
from diagrams.separation import enumerate_open_paths
from diagrams.simpson import three_node_diagram

from . import figures


def spine_of(name, s, x="X", y="Y"):
    conditioned = condition(figures.load(name), s)
    paths = enumerate_open_paths(conditioned.diagram, x, y, conditioned.z)
    return conditioned, paths, find_spine(paths)


class SpineTests(SimpleTestCase):
    def test_root_spine(self):
        _, paths, spine = spine_of("root_spine", ["C", "D", "E"])
        self.assertEqual(len(paths), 6)
        self.assertEqual(spine.nodes, ("X_1", "X_2", "X_3"))
        self.assertEqual((spine.m, spine.n, spine.variant, spine.theorem), (2, 1, "root", 1))

    def test_arrowhead_spine(self):
        _, _, spine = spine_of("arrowhead_spine", ["C", "D"])
        self.assertEqual(spine.nodes, ("X1", "X2", "X3"))
        self.assertEqual((spine.variant, spine.attachment, spine.theorem), ("nonroot", "arrowhead", 2))

    def test_two_shared_segments(self):
        conditioned = condition(figures.load("two_segments"), ["A", "B", "D"])
        paths = enumerate_open_paths(conditioned.diagram, "X1", "X4", conditioned.z)
        self.assertEqual([s.nodes for s in common_segments(paths)], [("X1", "X2"), ("X3", "X4")])

    def test_mixed_root_role(self):
        _, paths, _ = spine_of("mixed_root", ["S"])
        first = spine_candidates(paths)[0]
        self.assertEqual(first.nodes, ("R", "Y"))
        found = classify_segment(first, paths)
        self.assertIsInstance(found, Failure)
        self.assertEqual((found.kind, found.node), ("mixed-root-role", "R"))

    def test_reentrant_route(self):
        conditioned, _, spine = spine_of("child_and_spouse", ["S"])
        found = [v for v in check_reentrant_routes(conditioned.diagram, spine, conditioned.z) if v.found]
        self.assertEqual([(v.index, v.node) for v in found], [(2, "R")])
        self.assertEqual(found[0].route.label(), "R -> S <-> R")

    def test_passing_back_through_a_spine_node_is_not_reentrant(self):
        conditioned, _, spine = spine_of("chain", ["Z"])
        self.assertEqual(spine.nodes, ("X", "Y"))
        self.assertFalse(any(v.found for v in check_reentrant_routes(conditioned.diagram, spine, conditioned.z)))

    def test_no_reentrant_route_in_the_root_example(self):
        conditioned, _, spine = spine_of("root_spine", ["C", "D", "E"])
        self.assertFalse(any(v.found for v in check_reentrant_routes(conditioned.diagram, spine, conditioned.z)))


class FactorizationTests(SimpleTestCase):
    def assertAgrees(self, outcome):
        self.assertTrue(outcome.report.applicable, [f.label for f in outcome.report.failures])
        self.assertTrue(outcome.result.agrees, (outcome.result.value, outcome.result.oracle))

    def test_chain(self):
        outcome = factorized_partial_covariance(figures.load("chain"), "X", "Y", ["Z"])
        self.assertAgrees(outcome)
        self.assertAlmostEqual(outcome.result.value, 1 / 3, places=12)
        self.assertEqual(outcome.result.theorem_used, 1)
        ratios = {t.node: t for t in outcome.result.terms}
        self.assertEqual(ratios["Y"].numerator, ("Z",))
        self.assertEqual(ratios["Y"].denominator, ())

    def test_root_example(self):
        """C keeps only outgoing edges, so conditioning leaves it isolated and it lands in the leftovers."""
        outcome = factorized_partial_covariance(figures.load("root_spine"), "X", "Y", ["C", "D", "E"])
        self.assertAgrees(outcome)
        part = outcome.partition
        self.assertEqual(part.z_upper, (("C__X_1",), ("C__X_2",), ()))
        self.assertEqual(part.z_lower, (("D", "E__D"), (), ("E",)))
        self.assertEqual(part.leftovers, ("C",))
        self.assertEqual(part.witnesses["D"].label(), "X_1 -> D")
        terms = [(t.node, t.numerator, t.denominator) for t in outcome.result.terms]
        self.assertEqual(terms, [
            ("X_1", ("C__X_1", "D", "E__D"), ()),
            ("X_2", ("C__X_1", "C__X_2", "D", "E__D"), ("C__X_1", "C__X_2", "D", "E__D")),
            ("X_3", ("C__X_1", "C__X_2", "D", "E", "E__D"), ("C__X_1", "C__X_2", "D", "E__D")),
        ])
        self.assertEqual(outcome.result.terms[1].ratio, 1.0)

    def test_arrowhead_example_has_unit_ratios(self):
        outcome = factorized_partial_covariance(figures.load("arrowhead_spine"), "X", "Y", ["C", "D"])
        self.assertAgrees(outcome)
        part = outcome.partition
        self.assertEqual(part.z_upper, (("C__X1",), ("C__X2", "D__E"), ()))
        self.assertEqual(part.z_lower, ((), (), ()))
        self.assertEqual(part.leftovers, ("C", "D", "D__Y"))
        self.assertEqual([t.ratio for t in outcome.result.terms], [1.0, 1.0, 1.0])
        self.assertEqual(outcome.result.value, outcome.result.base)
        self.assertEqual(outcome.result.theorem_used, 2)

    def test_two_segments_need_the_chain(self):
        diagram = figures.load("two_segments")
        single = factorized_partial_covariance(diagram, "X1", "X4", ["A", "B", "D"])
        self.assertFalse(single.report.applicable)
        self.assertIn("unpartitionable-leftover", single.report.kinds())
        self.assertIsNone(single.result)

        outcome = chained_factorization(diagram, "X1", "X4", ["A", "B", "D"])
        self.assertAgrees(outcome)
        self.assertEqual(outcome.result.theorem_used, "chained")
        part = outcome.partition
        self.assertEqual(part.z_upper, ((), ("A__X2",), ("B__X3",), ("B__X4",)))
        self.assertEqual(part.z_lower, (("A",), (), (), ("D",)))
        self.assertEqual(part.leftovers, ("B",))
        terms = outcome.result.terms
        self.assertEqual((terms[0].numerator, terms[0].denominator), (("A",), ()))
        self.assertEqual([t.ratio for t in terms[1:3]], [1.0, 1.0])
        self.assertEqual(terms[3].numerator, ("A", "A__X2", "B__X3", "B__X4", "D"))
        self.assertEqual(terms[3].denominator, ("A", "A__X2", "B__X3", "B__X4"))

    def test_child_of_y_in_s_is_applicable(self):
        outcome = factorized_partial_covariance(three_node_diagram("X->Y->S"), "X", "Y", ["S"])
        self.assertNotIn("reentrant-route", outcome.report.kinds())
        self.assertAgrees(outcome)
        self.assertEqual(outcome.partition.z_lower, ((), ("S",)))

    def test_chain_on_a_single_segment_delegates(self):
        outcome = chained_factorization(figures.load("root_spine"), "X", "Y", ["C", "D", "E"])
        self.assertEqual(outcome.result.theorem_used, 1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_chain_holds_for_random_parameters(self, seed):
        diagram = sample_parameters(figures.load("two_segments"), np.random.default_rng(seed))
        self.assertAgrees(chained_factorization(diagram, "X1", "X4", ["A", "B", "D"]))

    def test_known_inapplicable_diagrams(self):
        mixed = factorized_partial_covariance(figures.load("mixed_root"), "X", "Y", ["S"])
        self.assertEqual([f.label for f in mixed.report.failures], ["mixed-root-role"])
        reentrant = factorized_partial_covariance(figures.load("child_and_spouse"), "X", "Y", ["S"])
        self.assertEqual([f.label for f in reentrant.report.failures], ["reentrant-route(2)"])
        with self.assertRaises(InapplicableError):
            chained_factorization(figures.load("child_and_spouse"), "X", "Y", ["S"])

    def test_collider_on_open_path(self):
        diagram = figures.load("reversible")
        outcome = factorized_partial_covariance(diagram, "X", "S", ["Y"])
        self.assertEqual(outcome.report.kinds(), ["collider-on-open-path"])

    def test_separated_query_is_zero(self):
        outcome = factorized_partial_covariance(figures.load("chain"), "X", "Z", ["Y"])
        self.assertTrue(outcome.report.applicable)
        self.assertEqual(outcome.paths, ())
        self.assertEqual(outcome.result.value, 0.0)
        self.assertIsNone(outcome.result.theorem_used)
        self.assertTrue(outcome.result.agrees)

    def test_base_is_taken_in_the_conditioned_diagram(self):
        diagram = figures.load("root_spine")
        outcome = factorized_partial_covariance(diagram, "X", "Y", ["C", "D", "E"])
        conditioned = condition(diagram, ["C", "D", "E"])
        sigma = implied_covariance(conditioned.diagram)
        self.assertEqual(outcome.result.base, sigma.entry("X", "Y"))
        self.assertEqual(outcome.result.original_covariance, implied_covariance(diagram).entry("X", "Y"))
        first = outcome.result.terms[0]
        self.assertAlmostEqual(first.numerator_value, partial_variance(sigma, "X_1", first.numerator), places=12)
        self.assertAlmostEqual(
            outcome.result.oracle,
            partial_covariance(implied_covariance(diagram), "X", "Y", ["C", "D", "E"]),
            places=12,
        )

    def test_ratios_never_exceed_one(self):
        for name, x, y, s in (
            ("root_spine", "X", "Y", ["C", "D", "E"]),
            ("arrowhead_spine", "X", "Y", ["C", "D"]),
            ("chain", "X", "Y", ["Z"]),
        ):
            for term in factorized_partial_covariance(figures.load(name), x, y, s).result.terms:
                self.assertLessEqual(term.ratio, 1.0 + 1e-12)
                self.assertGreater(term.ratio, 0.0)

    def test_endpoint_in_s(self):
        with self.assertRaises(QueryError):
            factorized_partial_covariance(figures.load("chain"), "X", "Y", ["X"])

    def test_serializes(self):
        outcome = factorized_partial_covariance(figures.load("chain"), "X", "Y", ["Z"])
        record = outcome.model_dump(mode="json")
        self.assertTrue(record["report"]["applicable"])
        self.assertEqual(record["result"]["theorem_used"], 1)
        self.assertIn("ratio", record["result"]["terms"][0])


class SignTests(SimpleTestCase):
    def test_root_example_keeps_its_sign(self):
        report = sign_preservation_check(figures.load("root_spine"), "X", "Y", [], ["C", "D", "E"])
        self.assertTrue(report.base_consistent)
        self.assertTrue(report.agrees)
        self.assertEqual(report.signs, (1, 1))

    def test_separated_sets_give_zero(self):
        report = sign_preservation_check(figures.load("chain"), "X", "Z", ["Y"], ["Y"])
        self.assertEqual(report.signs, (0, 0))
        self.assertTrue(report.base_consistent)

    def test_inapplicable_set_is_refused(self):
        with self.assertRaises(InapplicableError):
            sign_preservation_check(figures.load("child_and_spouse"), "X", "Y", [], ["S"])


class OrderExperimentTests(SimpleTestCase):
    def test_worked_example_is_order_independent(self):
        experiment = partition_order_experiment(figures.load("root_spine"), "X", "Y", ["C", "D", "E"], runs=10, seed=3)
        self.assertEqual(experiment.runs, 10)
        self.assertEqual(experiment.divergences, ())

    def test_inapplicable_instance_is_refused(self):
        with self.assertRaises(InapplicableError):
            partition_order_experiment(figures.load("mixed_root"), "X", "Y", ["S"])
