"""
Random instances and the bulk sweeps that back the soundness claims.

Every trial draws from ``np.random.default_rng([seed, trial])``, so a sweep
is reproducible from its config and any single trial can be regenerated on
its own.
"""
import logging
import sys
from collections import Counter
from typing import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from tqdm import tqdm

from .conf import get_settings, sign
from .diagram import Edge, PathDiagram
from .exceptions import GenerationError, PathLimitExceeded, QueryError
from .factorize import Factorization, factorized_partial_covariance
from .fileformat import DiagramFile, format_diagram, parse_diagram, query_header
from .gaussian import implied_covariance, regression_coefficient
from .sampling import sample_parameters
from .simpson import is_reversal, simpson_witness_search

logger = logging.getLogger(__name__)


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    node_count: int = Field(6, ge=2, le=20)
    edge_density: float = Field(0.3, ge=0.0, le=1.0)
    bidirected_fraction: float = Field(0.2, ge=0.0, le=1.0)
    singly_connected: bool = False
    coefficient_range: tuple[float, float] = (0.1, 2.0)
    variance_range: tuple[float, float] = (0.5, 2.0)
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _ranges(self):
        for name in ("coefficient_range", "variance_range"):
            low, high = getattr(self, name)
            if not 0 < low <= high:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        return self


class Query(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    s: tuple[str, ...] = ()


def node_names(count: int) -> list[str]:
    return [f"V{i:02d}" for i in range(count)]


def random_structure(config: GeneratorConfig, rng: np.random.Generator) -> PathDiagram:
    """Edges only (unit weights); a random permutation fixes the causal order."""
    names = node_names(config.node_count)
    order = [names[i] for i in rng.permutation(config.node_count)]
    edges: list[Edge] = []

    def connect(a: str, b: str) -> None:
        if rng.random() < config.bidirected_fraction:
            edges.append(Edge.bidirected(a, b, 0.0))
        else:
            edges.append(Edge.directed(a, b, 1.0))

    if config.singly_connected:
        # random spanning tree: each node hangs off an earlier one
        for i in range(1, len(order)):
            connect(order[int(rng.integers(0, i))], order[i])
    else:
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                if rng.random() >= config.edge_density:
                    continue
                connect(order[i], order[j])
                if edges[-1].is_directed and rng.random() < config.bidirected_fraction / 2:
                    edges.append(Edge.bidirected(order[i], order[j], 0.0))
    return PathDiagram.from_parts(edges, nodes=names)


def random_diagram(config: GeneratorConfig, rng: np.random.Generator | None = None) -> PathDiagram:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    structure = random_structure(config, rng)
    return sample_parameters(
        structure,
        rng,
        coefficient_range=config.coefficient_range,
        variance_range=config.variance_range,
        loading=True,
    )


def random_query(diagram: PathDiagram, rng: np.random.Generator) -> Query:
    """X != Y, and S of uniform size 0 ... n-2 drawn from the other nodes."""
    nodes = list(diagram.nodes)
    if len(nodes) < 2:
        raise QueryError("a query needs two nodes")
    x, y = rng.choice(nodes, size=2, replace=False).tolist()
    others = [n for n in nodes if n not in (x, y)]
    size = int(rng.integers(0, len(others) + 1))
    s = rng.choice(others, size=size, replace=False).tolist() if size else []
    return Query(x=x, y=y, s=tuple(sorted(s)))


def random_instance(config: GeneratorConfig, trial: int) -> tuple[PathDiagram, Query]:
    rng = np.random.default_rng([config.seed, trial])
    diagram = random_diagram(config, rng)
    return diagram, random_query(diagram, rng)


# --- Artifacts ---

class FailureArtifact(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial: int
    query: Query
    reason: str
    text: str


def make_artifact(diagram: PathDiagram, query: Query, seed: int, trial: int, reason: str) -> FailureArtifact:
    header = [f"failure: {reason}"] + query_header(query.x, query.y, query.s, seed=seed, trial=trial)
    return FailureArtifact(trial=trial, query=query, reason=reason, text=format_diagram(diagram, header))


def replay(parsed: DiagramFile) -> Factorization:
    """Re-run the factorization recorded in an artifact's header."""
    try:
        x, y = parsed.meta["query"].split()
    except (KeyError, ValueError):
        raise QueryError("artifact has no '# query: X Y' header") from None
    s = parsed.meta.get("given", "").split()
    return factorized_partial_covariance(parsed.diagram, x, y, s)


def replay_artifact(text: str) -> Factorization:
    return replay(parse_diagram(text))


# --- Sweeps ---

class SoundnessStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    trials: int = 0
    passed: int = 0
    failed: int = 0
    separated: int = 0
    inapplicable: int = 0
    # instances per failure kind; one instance may count under several kinds
    inapplicable_kinds: dict[str, int] = {}
    collider_instances: int = 0
    skipped: int = 0
    max_relative_error: float = 0.0
    first_failure: FailureArtifact | None = None

    @computed_field
    @property
    def applicable(self) -> int:
        return self.passed + self.failed


def _trials(trials: int, progress: bool, label: str) -> Iterable[int]:
    return tqdm(range(trials), desc=label, disable=not progress, file=sys.stderr)


def sweep_soundness(config: GeneratorConfig, trials: int, progress: bool = False) -> SoundnessStats:
    """
    Factorization against the Schur oracle over random instances. Mismatches
    among applicable instances are failures; the first one is kept as an
    artifact for replay.
    """
    cfg = get_settings()
    passed = failed = separated = colliders = skipped = inapplicable = 0
    kinds_seen: Counter[str] = Counter()
    worst = 0.0
    first_failure = None
    for trial in _trials(trials, progress, "soundness"):
        try:
            diagram, query = random_instance(config, trial)
            outcome = factorized_partial_covariance(diagram, query.x, query.y, query.s)
        except (GenerationError, PathLimitExceeded) as exc:
            logger.warning("trial %d skipped: %s", trial, exc)
            skipped += 1
            continue

        if not outcome.report.applicable:
            kinds = set(outcome.report.kinds())
            kinds_seen.update(kinds)
            inapplicable += 1
            colliders += "collider-on-open-path" in kinds
            continue

        result = outcome.result
        if not outcome.paths:
            separated += 1
        else:
            worst = max(worst, abs(result.value - result.oracle) / max(abs(result.oracle), cfg.abs_tol))
        if result.agrees:
            passed += 1
            continue
        failed += 1
        logger.warning("trial %d: factorization %.12g, oracle %.12g", trial, result.value, result.oracle)
        if first_failure is None:
            first_failure = make_artifact(diagram, query, config.seed, trial, "oracle mismatch")

    stats = SoundnessStats(
        trials=trials,
        passed=passed,
        failed=failed,
        separated=separated,
        inapplicable=inapplicable,
        inapplicable_kinds=dict(sorted(kinds_seen.items())),
        collider_instances=colliders,
        skipped=skipped,
        max_relative_error=worst,
        first_failure=first_failure,
    )
    logger.info("soundness sweep: %d passed, %d failed, %d inapplicable", passed, failed, inapplicable)
    return stats


class SimpsonStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    trials: int = 0
    applicable: int = 0
    separated: int = 0
    inapplicable: int = 0
    skipped: int = 0
    reversals: int = 0
    base_sign_mismatches: int = 0
    witnesses: int = 0
    first_failure: FailureArtifact | None = None


def sweep_simpson(
    config: GeneratorConfig,
    trials: int,
    witness_trials: int = 0,
    progress: bool = False,
) -> SimpsonStats:
    """
    Sign behaviour of the regression coefficient of Y on X over random
    applicable instances: reversals of β_YX upon conditioning, and mismatches
    between the sign of the factorized value and its base covariance. With
    ``witness_trials`` each applicable structure is also searched for a
    reversing parameterization.
    """
    applicable = separated = inapplicable = skipped = reversals = mismatches = witnesses = 0
    first_failure = None
    for trial in _trials(trials, progress, "simpson"):
        try:
            diagram, query = random_instance(config, trial)
            outcome = factorized_partial_covariance(diagram, query.x, query.y, query.s)
        except (GenerationError, PathLimitExceeded) as exc:
            logger.warning("trial %d skipped: %s", trial, exc)
            skipped += 1
            continue
        if not outcome.report.applicable:
            inapplicable += 1
            continue
        if not outcome.paths:
            separated += 1
            continue
        applicable += 1

        result = outcome.result
        sigma = implied_covariance(diagram)
        scale = sigma.scale()
        if sign(result.value, scale) != sign(result.base, scale):
            mismatches += 1
            if first_failure is None:
                first_failure = make_artifact(diagram, query, config.seed, trial, "base sign mismatch")

        marginal = regression_coefficient(sigma, query.y, query.x)
        conditional = regression_coefficient(sigma, query.y, query.x, query.s)
        if is_reversal(marginal, conditional):
            reversals += 1
            logger.debug("trial %d reverses: %.6g -> %.6g", trial, marginal, conditional)
            if first_failure is None and config.singly_connected:
                first_failure = make_artifact(diagram, query, config.seed, trial, "sign reversal")

        if witness_trials:
            found = simpson_witness_search(diagram, query.x, query.y, query.s, trials=witness_trials, seed=trial)
            witnesses += found is not None

    return SimpsonStats(
        trials=trials,
        applicable=applicable,
        separated=separated,
        inapplicable=inapplicable,
        skipped=skipped,
        reversals=reversals,
        base_sign_mismatches=mismatches,
        witnesses=witnesses,
        first_failure=first_failure,
    )
