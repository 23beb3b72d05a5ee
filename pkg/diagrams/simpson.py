"""
Collapsibility of association measures and Simpson's paradox for
linear-Gaussian path diagrams.

For Gaussian models the conditional covariance does not depend on the value
of the conditioning set, so collapsibility reduces to comparing the
conditional measure with the marginal one.
"""
import logging
from enum import Enum
from typing import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field

from .conf import close, get_settings, sign
from .diagram import Edge, PathDiagram
from .exceptions import GenerationError, QueryError
from .factorize import factorized_partial_covariance
from .gaussian import implied_covariance, partial_covariance, regression_coefficient
from .sampling import COEFFICIENT_RANGE, VARIANCE_RANGE, sample_coefficient, sample_parameters

logger = logging.getLogger(__name__)


class AssociationMeasure(str, Enum):
    COVARIANCE = "covariance"
    REGRESSION = "regression_coefficient"


class CollapsibilityVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    measure: AssociationMeasure
    marginal: float
    conditional: float
    collapsible: bool

    @property
    def label(self) -> str:
        return "collapsible" if self.collapsible else "not_collapsible"


def _measure(sigma, x: str, y: str, given: tuple[str, ...], measure: AssociationMeasure) -> float:
    if measure is AssociationMeasure.COVARIANCE:
        return partial_covariance(sigma, x, y, given)
    return regression_coefficient(sigma, y, x, given)


def collapsibility_check(
    diagram: PathDiagram,
    x: str,
    y: str,
    s: Iterable[str],
    measure: AssociationMeasure | str = AssociationMeasure.COVARIANCE,
) -> CollapsibilityVerdict:
    measure = AssociationMeasure(measure)
    s = tuple(sorted(set(s)))
    for end in (x, y):
        if end in s:
            raise QueryError(f"endpoint {end} is in the conditioning set")
    sigma = implied_covariance(diagram)
    marginal = _measure(sigma, x, y, (), measure)
    conditional = _measure(sigma, x, y, s, measure)
    cfg = get_settings()
    return CollapsibilityVerdict(
        measure=measure,
        marginal=marginal,
        conditional=conditional,
        collapsible=close(marginal, conditional, abs_tol=max(cfg.abs_tol, cfg.rel_tol * sigma.scale())),
    )


# --- Three-node structures ---

THREE_NODE_EDGES = {
    "S<-X->Y": (("X", "S"), ("X", "Y")),
    "S->X->Y": (("S", "X"), ("X", "Y")),
    "X->Y<-S": (("X", "Y"), ("S", "Y")),
    "X->Y->S": (("X", "Y"), ("Y", "S")),
}

# (covariance collapsible, regression coefficient collapsible)
EXPECTED_COLLAPSIBILITY = {
    "S<-X->Y": (False, True),
    "S->X->Y": (False, True),
    "X->Y<-S": (True, True),
    "X->Y->S": (False, False),
}


def three_node_diagram(
    kind: str,
    coefficients: tuple[float, float] | None = None,
    variances: dict[str, float] | None = None,
    rng: np.random.Generator | None = None,
) -> PathDiagram:
    """
    One of the four structures over X, Y, S. Parameters are taken as given,
    drawn from ``rng`` when omitted, or default to unit values.
    """
    try:
        pairs = THREE_NODE_EDGES[kind]
    except KeyError:
        raise QueryError(f"unknown three-node structure {kind!r}") from None
    if coefficients is None:
        if rng is None:
            coefficients = (1.0, 1.0)
        else:
            coefficients = tuple(sample_coefficient(rng, *COEFFICIENT_RANGE) for _ in pairs)
    if variances is None and rng is not None:
        variances = {n: float(rng.uniform(*VARIANCE_RANGE)) for n in ("S", "X", "Y")}
    edges = [Edge.directed(a, b, w) for (a, b), w in zip(pairs, coefficients)]
    return PathDiagram.from_parts(edges, variances or {}, nodes=("S", "X", "Y"))


class SuiteEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str
    trials: int
    expected_covariance: bool
    expected_regression: bool
    covariance_matches: int
    regression_matches: int
    factorization_agreements: int

    @computed_field
    @property
    def passed(self) -> bool:
        return self.covariance_matches == self.regression_matches == self.factorization_agreements == self.trials


class SuiteReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: tuple[SuiteEntry, ...]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)


def four_diagram_suite(trials: int = 100, seed: int = 0) -> SuiteReport:
    """
    Collapsibility verdicts of the four three-node structures under random
    parameters, plus the factorization identity behind each verdict.
    """
    entries = []
    for kind, (want_cov, want_reg) in EXPECTED_COLLAPSIBILITY.items():
        cov_hits = reg_hits = agreements = 0
        for trial in range(trials):
            rng = np.random.default_rng([seed, trial])
            diagram = three_node_diagram(kind, rng=rng)
            cov = collapsibility_check(diagram, "X", "Y", ["S"], AssociationMeasure.COVARIANCE)
            reg = collapsibility_check(diagram, "X", "Y", ["S"], AssociationMeasure.REGRESSION)
            cov_hits += cov.collapsible == want_cov
            reg_hits += reg.collapsible == want_reg
            outcome = factorized_partial_covariance(diagram, "X", "Y", ["S"])
            agreements += bool(outcome.result and outcome.result.agrees)
        entries.append(SuiteEntry(
            kind=kind,
            trials=trials,
            expected_covariance=want_cov,
            expected_regression=want_reg,
            covariance_matches=cov_hits,
            regression_matches=reg_hits,
            factorization_agreements=agreements,
        ))
    return SuiteReport(entries=tuple(entries))


# --- Witness search ---

class SimpsonWitness(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial: int
    seed: int
    diagram: PathDiagram
    beta_marginal: float
    beta_conditional: float


def is_reversal(marginal: float, conditional: float, floor: float | None = None) -> bool:
    """Opposite signs with both magnitudes above the floor."""
    floor = get_settings().witness_floor if floor is None else floor
    if abs(marginal) <= floor or abs(conditional) <= floor:
        return False
    return sign(marginal, band=0.0) * sign(conditional, band=0.0) < 0


def simpson_witness_search(
    diagram: PathDiagram,
    x: str,
    y: str,
    s: Iterable[str],
    trials: int = 1000,
    seed: int = 0,
) -> SimpsonWitness | None:
    """
    Random parameterizations of the diagram's structure for which the
    regression coefficient of Y on X changes sign upon conditioning on S.
    """
    s = tuple(sorted(set(s)))
    for end in (x, y):
        if end in s:
            raise QueryError(f"endpoint {end} is in the conditioning set")
    diagram.require(x, y, *s)
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        try:
            candidate = sample_parameters(diagram, rng)
        except GenerationError:
            continue
        sigma = implied_covariance(candidate)
        marginal = regression_coefficient(sigma, y, x)
        conditional = regression_coefficient(sigma, y, x, s)
        if is_reversal(marginal, conditional):
            logger.debug("sign reversal at trial %d: %.6g -> %.6g", trial, marginal, conditional)
            return SimpsonWitness(
                trial=trial,
                seed=seed,
                diagram=candidate,
                beta_marginal=marginal,
                beta_conditional=conditional,
            )
    return None
