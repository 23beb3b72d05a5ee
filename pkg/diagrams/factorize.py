"""
Factorized partial covariances on conditioned path diagrams.

After conditioning on S (Z = S ∪ S′), σ_XY·Z is the marginal σ_XY times one
partial-variance ratio per spine node, provided that the Z-open paths are
collider-free, share a common spine, admit no re-entrant route at any spine
node but the first, and Z splits into the ordered sets Z^i / Z_i with only
separated leftovers.

Pipeline: condition -> enumerate Π -> collider check -> spine candidates ->
re-entrant routes -> Z partition -> ratio terms, cross-checked against the
Schur oracle on the original diagram.
"""
import logging
from functools import cached_property
from typing import Iterable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field, model_validator

from .conditioning import ConditionedDiagram, condition
from .conf import close, get_settings, sign
from .diagram import PathDiagram, require_valid
from .exceptions import InapplicableError, QueryError
from .gaussian import CovarianceMatrix, implied_covariance, partial_covariance, partial_variance
from .separation import (
    Path,
    Route,
    enumerate_open_paths,
    find_open_path,
    is_collider_at,
    m_separated,
    search_open_walk,
)

logger = logging.getLogger(__name__)

FailureKind = Literal[
    "collider-on-open-path",
    "no-common-spine",
    "mixed-root-role",
    "reentrant-route",
    "unpartitionable-leftover",
]


# --- Records ---

class Failure(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: FailureKind
    index: int | None = None
    node: str | None = None
    detail: str = ""

    @property
    def label(self) -> str:
        if self.kind == "reentrant-route":
            return f"{self.kind}({self.index})"
        if self.kind == "unpartitionable-leftover":
            return f"{self.kind}({self.node})"
        return self.kind


class ApplicabilityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    failures: tuple[Failure, ...] = ()

    @computed_field
    @property
    def applicable(self) -> bool:
        return not self.failures

    def kinds(self) -> list[str]:
        return [f.kind for f in self.failures]


class Segment(BaseModel):
    """A subpath shared by every open path, in the paths' X -> Y direction."""

    model_config = ConfigDict(frozen=True)

    nodes: tuple[str, ...]
    position: int


class Spine(BaseModel):
    model_config = ConfigDict(frozen=True)

    # X_1 ... X_{m+n}
    nodes: tuple[str, ...]
    m: int
    n: int
    variant: Literal["root", "nonroot"]
    attachment: Literal["root", "bidirected", "arrowhead"]
    # True when the spine's edges point toward X and it is read from Y
    mirrored: bool = False
    segments: tuple[tuple[str, ...], ...] = ()

    @model_validator(mode="after")
    def _arms(self):
        if self.m < 1 or self.n < 0 or self.m + self.n != len(self.nodes):
            raise ValueError("spine arms must cover the spine nodes")
        return self

    @property
    def theorem(self) -> int:
        return 1 if self.variant == "root" else 2


class ZPartition(BaseModel):
    model_config = ConfigDict(frozen=True)

    z_upper: tuple[tuple[str, ...], ...]
    z_lower: tuple[tuple[str, ...], ...]
    leftovers: tuple[str, ...] = ()
    witnesses: dict[str, Path] = {}

    def assigned(self, upto_upper: int, upto_lower: int) -> tuple[str, ...]:
        """Z^{1:upto_upper} ∪ Z_{1:upto_lower}, sorted."""
        found = set()
        for group in self.z_upper[:upto_upper]:
            found.update(group)
        for group in self.z_lower[:upto_lower]:
            found.update(group)
        return tuple(sorted(found))

    def shape(self) -> tuple:
        return (
            tuple(frozenset(g) for g in self.z_upper),
            tuple(frozenset(g) for g in self.z_lower),
            frozenset(self.leftovers),
        )


class FactorTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    node: str
    numerator: tuple[str, ...]
    denominator: tuple[str, ...]
    numerator_value: float
    denominator_value: float

    @computed_field
    @property
    def ratio(self) -> float:
        return self.numerator_value / self.denominator_value


class FactorizationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    base: float
    terms: tuple[FactorTerm, ...] = ()
    value: float
    theorem_used: Literal[1, 2, "chained"] | None = None
    oracle: float
    agrees: bool
    original_covariance: float


class Factorization(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    s: tuple[str, ...]
    z: tuple[str, ...]
    paths: tuple[Path, ...]
    report: ApplicabilityReport
    spine: Spine | None = None
    partition: ZPartition | None = None
    result: FactorizationResult | None = None


class ReentrantVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    node: str
    route: Route | None = None

    @property
    def found(self) -> bool:
        return self.route is not None


# --- Spine ---

def common_segments(paths: Sequence[Path]) -> list[Segment]:
    """
    Maximal runs of edges traversed the same way by every path, plus common
    nodes outside such runs, in the order of the first path.
    """
    if not paths:
        return []
    first, others = paths[0], paths[1:]
    steps = [{(p.nodes[i], p.nodes[i + 1], e.key) for i, e in enumerate(p.edges)} for p in others]
    shared = [
        all((first.nodes[i], first.nodes[i + 1], e.key) in st for st in steps)
        for i, e in enumerate(first.edges)
    ]
    common = set(first.nodes).intersection(*(set(p.nodes) for p in others))

    segments: list[Segment] = []
    covered: set[str] = set()
    i = 0
    while i < len(shared):
        if not shared[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(shared) and shared[j + 1]:
            j += 1
        run = first.nodes[i:j + 2]
        covered.update(run)
        segments.append(Segment(nodes=run, position=i))
        i = j + 1
    for pos, node in enumerate(first.nodes):
        if node in common and node not in covered:
            segments.append(Segment(nodes=(node,), position=pos))
    return sorted(segments, key=lambda s: s.position)


def _outside_edges(path: Path, segment: Segment):
    start = path.nodes.index(segment.nodes[0])
    end = start + len(segment.nodes) - 1
    left = path.edges[start - 1] if start > 0 else None
    right = path.edges[end] if end < len(path.edges) else None
    return left, right


def classify_segment(segment: Segment, paths: Sequence[Path]) -> Spine | Failure:
    """Read a common segment as a spine X_1 ... X_{m+n}, or report a mixed root role."""
    nodes = segment.nodes
    k = len(nodes) - 1
    path = next(p for p in paths if nodes[0] in p.nodes)
    start = path.nodes.index(nodes[0])
    edges = path.edges[start:start + k]

    bidirected = [j for j, e in enumerate(edges) if not e.is_directed]
    if bidirected:
        b = bidirected[0]
        return Spine(
            nodes=(nodes[b],) + tuple(reversed(nodes[:b])) + nodes[b + 1:],
            m=b + 1,
            n=k - b,
            variant="nonroot",
            attachment="bidirected",
            segments=(nodes,),
        )

    # edges point left up to r, right from r on; nodes[r] has no arrowhead inside the segment
    r = next((j for j, e in enumerate(edges) if e.tail == nodes[j]), k)
    roles = set()
    for p in paths:
        left, right = _outside_edges(p, segment)
        if r == 0 and left is not None and left.has_arrowhead_at(nodes[0]):
            roles.add("left")
        elif r == k and right is not None and right.has_arrowhead_at(nodes[k]):
            roles.add("right")
        else:
            roles.add("root")
    if len(roles) > 1:
        return Failure(
            kind="mixed-root-role",
            node=nodes[r],
            detail=f"{nodes[r]} is a root in some open paths and not in others",
        )
    role = roles.pop()
    if role == "root":
        return Spine(
            nodes=(nodes[r],) + tuple(reversed(nodes[:r])) + nodes[r + 1:],
            m=r + 1,
            n=k - r,
            variant="root",
            attachment="root",
            segments=(nodes,),
        )
    if role == "left":
        return Spine(nodes=nodes, m=1, n=k, variant="nonroot", attachment="arrowhead", segments=(nodes,))
    return Spine(
        nodes=tuple(reversed(nodes)),
        m=1,
        n=k,
        variant="nonroot",
        attachment="arrowhead",
        mirrored=True,
        segments=(nodes,),
    )


def spine_candidates(paths: Sequence[Path]) -> list[Segment]:
    """Common segments, longest first; ties keep path order."""
    return sorted(common_segments(paths), key=lambda s: (-len(s.nodes), s.position))


def find_spine(paths: Sequence[Path]) -> Spine | Failure:
    """The longest common segment that reads as a spine."""
    candidates = spine_candidates(paths)
    if not candidates:
        return Failure(kind="no-common-spine", detail="the open paths share no node")
    first_failure = None
    for segment in candidates:
        found = classify_segment(segment, paths)
        if isinstance(found, Spine):
            return found
        first_failure = first_failure or found
    return first_failure


# --- Applicability checks ---

def collider_failures(paths: Sequence[Path]) -> list[Failure]:
    failures = []
    for p in paths:
        for pos in range(1, len(p.nodes) - 1):
            if is_collider_at(p, pos):
                failures.append(Failure(kind="collider-on-open-path", node=p.nodes[pos], detail=p.label()))
                break
    return failures


def check_reentrant_routes(conditioned: PathDiagram, spine: Spine, z: Iterable[str]) -> list[ReentrantVerdict]:
    """
    For every spine node X_i with i > 1, look for a Z-open route that leaves
    X_i along a directed edge and comes back into X_i with an arrowhead,
    touching X_i only at its two ends.
    """
    z = frozenset(z)
    verdicts = []
    for index, node in enumerate(spine.nodes[1:], start=2):
        route = search_open_walk(
            conditioned,
            node,
            z,
            z,
            is_goal=lambda e, w, node=node: w == node and e.has_arrowhead_at(node),
            first_edge=lambda e, node=node: e.is_directed and e.tail == node,
            avoid=frozenset({node}),
        )
        verdicts.append(ReentrantVerdict(index=index, node=node, route=route))
    return verdicts


def build_z_partition(
    conditioned: PathDiagram,
    spine: Spine,
    z: Iterable[str],
    paths: Sequence[Path],
    order: Sequence[str] | None = None,
) -> tuple[ZPartition, list[Failure]]:
    """
    Greedy construction of Z^i (connected through parents and spouses) and Z_i
    (connected through children) for i = 1 ... m+n, Z^i first. Candidates are
    tried in ``order`` (lexicographic by default) and each set is grown to a
    fixpoint. Nodes left over must be separated from X or from Y given
    everything assigned before them.
    """
    x, y = paths[0].source, paths[0].target
    z = frozenset(z)
    remaining = [w for w in (order if order is not None else sorted(z)) if w in z]
    on_paths = frozenset(n for p in paths for n in p.nodes)
    assigned: list[str] = []
    witnesses: dict[str, Path] = {}
    upper: list[tuple[str, ...]] = []
    lower: list[tuple[str, ...]] = []

    def grow(node: str, first_hop) -> tuple[str, ...]:
        admitted: list[str] = []
        avoid = on_paths - {node}
        progress = True
        while progress:
            progress = False
            for w in list(remaining):
                witness = find_open_path(conditioned, node, w, assigned, first_hop=first_hop, avoid=avoid)
                if witness is None:
                    continue
                logger.debug("admitted %s at %s via %s", w, node, witness.label())
                witnesses[w] = witness
                admitted.append(w)
                assigned.append(w)
                remaining.remove(w)
                progress = True
        return tuple(admitted)

    for node in spine.nodes:
        upper.append(grow(node, "parents_spouses"))
        lower.append(grow(node, "children"))

    failures = []
    given = list(assigned)
    for w in remaining:
        if not (m_separated(conditioned, x, w, given) or m_separated(conditioned, y, w, given)):
            failures.append(Failure(
                kind="unpartitionable-leftover",
                node=w,
                detail=f"{w} is connected to both {x} and {y}",
            ))
        given.append(w)

    partition = ZPartition(
        z_upper=tuple(upper),
        z_lower=tuple(lower),
        leftovers=tuple(remaining),
        witnesses=witnesses,
    )
    return partition, failures


# --- Pipeline ---

class _Context(BaseModel):
    model_config = ConfigDict(frozen=True)

    original: PathDiagram
    conditioned: ConditionedDiagram
    x: str
    y: str
    paths: tuple[Path, ...]

    @cached_property
    def sigma(self) -> CovarianceMatrix:
        return implied_covariance(self.conditioned.diagram)

    @cached_property
    def sigma_original(self) -> CovarianceMatrix:
        return implied_covariance(self.original)

    @cached_property
    def oracle(self) -> float:
        return partial_covariance(self.sigma_original, self.x, self.y, self.conditioned.s_nodes)

    def agrees(self, value: float) -> bool:
        cfg = get_settings()
        return close(value, self.oracle, abs_tol=max(cfg.abs_tol, cfg.rel_tol * self.sigma_original.scale()))


def _prepare(original: PathDiagram, x: str, y: str, s: Iterable[str]) -> _Context:
    s = tuple(sorted(set(s)))
    original.require(x, y, *s)
    if x == y:
        raise QueryError(f"endpoints coincide: {x}")
    for end in (x, y):
        if end in s:
            raise QueryError(f"endpoint {end} is in the conditioning set")
    require_valid(original)
    conditioned = condition(original, s)
    paths = enumerate_open_paths(conditioned.diagram, x, y, conditioned.z)
    return _Context(original=original, conditioned=conditioned, x=x, y=y, paths=tuple(paths))


def _terms(spine: Spine, partition: ZPartition, sigma: CovarianceMatrix) -> list[FactorTerm]:
    terms = []
    for i, node in enumerate(spine.nodes, start=1):
        numerator = partition.assigned(i, i)
        denominator = partition.assigned(i, i - 1)
        if i == 1 and spine.variant == "root":
            denominator = ()
        terms.append(FactorTerm(
            node=node,
            numerator=numerator,
            denominator=denominator,
            numerator_value=partial_variance(sigma, node, numerator),
            denominator_value=partial_variance(sigma, node, denominator),
        ))
    return terms


def _attempt(ctx: _Context, spine: Spine, order: Sequence[str] | None = None):
    """Re-entrant and partition checks for one spine reading."""
    diagram, z = ctx.conditioned.diagram, ctx.conditioned.z
    failures = [
        Failure(kind="reentrant-route", index=v.index, node=v.node, detail=v.route.label())
        for v in check_reentrant_routes(diagram, spine, z)
        if v.found
    ]
    if failures:
        return None, failures
    partition, failures = build_z_partition(diagram, spine, z, ctx.paths, order=order)
    return partition, failures


def _finish(ctx: _Context, report: ApplicabilityReport, spine=None, partition=None, theorem=None) -> Factorization:
    result = None
    if report.applicable:
        base = ctx.sigma.entry(ctx.x, ctx.y)
        if spine is None:
            terms, value = [], 0.0
        else:
            terms = _terms(spine, partition, ctx.sigma)
            value = base * float(np.prod([t.ratio for t in terms]))
        result = FactorizationResult(
            base=base,
            terms=tuple(terms),
            value=value,
            theorem_used=theorem,
            oracle=ctx.oracle,
            agrees=ctx.agrees(value),
            original_covariance=ctx.sigma_original.entry(ctx.x, ctx.y),
        )
        if not result.agrees:
            logger.warning(
                "factorized %s..%s given %s: %.12g differs from oracle %.12g",
                ctx.x, ctx.y, list(ctx.conditioned.s_nodes), value, ctx.oracle,
            )
    return Factorization(
        x=ctx.x,
        y=ctx.y,
        s=ctx.conditioned.s_nodes,
        z=ctx.conditioned.z,
        paths=ctx.paths,
        report=report,
        spine=spine,
        partition=partition,
        result=result,
    )


def factorized_partial_covariance(
    original: PathDiagram,
    x: str,
    y: str,
    s: Iterable[str],
    order: Sequence[str] | None = None,
) -> Factorization:
    """
    σ_XY·S as a product of partial-variance ratios, with the applicability
    report. Inapplicable instances carry the failures and no value.
    """
    ctx = _prepare(original, x, y, s)
    if not ctx.paths:
        return _finish(ctx, ApplicabilityReport())

    colliders = collider_failures(ctx.paths)
    if colliders:
        return _finish(ctx, ApplicabilityReport(failures=tuple(colliders)))

    candidates = spine_candidates(ctx.paths)
    if not candidates:
        return _finish(ctx, ApplicabilityReport(failures=(Failure(kind="no-common-spine"),)))

    first_failures = None
    for segment in candidates:
        found = classify_segment(segment, ctx.paths)
        if isinstance(found, Failure):
            failures = [found]
            partition = None
        else:
            partition, failures = _attempt(ctx, found, order)
        if not failures:
            return _finish(ctx, ApplicabilityReport(), found, partition, found.theorem)
        logger.debug("spine %s rejected: %s", segment.nodes, [f.label for f in failures])
        if first_failures is None:
            first_failures = failures
    return _finish(ctx, ApplicabilityReport(failures=tuple(first_failures)))


def _interior_segments(paths: Sequence[Path]) -> list[Segment]:
    """Common segments other than the bare endpoints."""
    if not paths:
        return []
    ends = ((paths[0].source,), (paths[0].target,))
    return [seg for seg in common_segments(paths) if seg.nodes not in ends]


def _chain(ctx: _Context, paths: Sequence[Path]) -> Spine | Failure:
    segments = _interior_segments(paths)
    readings = [classify_segment(seg, paths) for seg in segments]
    for reading in readings:
        if isinstance(reading, Failure):
            return reading
    head, rest = readings[0], readings[1:]
    if head.mirrored:
        return Failure(kind="no-common-spine", detail=f"segment {head.segments[0]} points back toward the source")
    for reading in rest:
        if reading.attachment != "arrowhead" or reading.mirrored:
            return Failure(kind="no-common-spine", detail=f"segment {reading.segments[0]} is not entered through an arrowhead")
    nodes = tuple(n for r in readings for n in r.nodes)
    return Spine(
        nodes=nodes,
        m=head.m,
        n=len(nodes) - head.m,
        variant=head.variant,
        attachment=head.attachment,
        segments=tuple(r.segments[0] for r in readings),
    )


def chained_factorization(original: PathDiagram, x: str, y: str, s: Iterable[str]) -> Factorization:
    """
    Segment-wise factorization when the open paths share several disjoint
    subpaths: the first segment may take any spine shape, every later one
    must be entered through an arrowhead. If the X -> Y reading fails the
    Y -> X reading is tried.
    """
    ctx = _prepare(original, x, y, s)
    if len(_interior_segments(ctx.paths)) <= 1:
        single = factorized_partial_covariance(original, x, y, s)
        if not single.report.applicable:
            raise InapplicableError(single.report)
        return single

    colliders = collider_failures(ctx.paths)
    if colliders:
        raise InapplicableError(ApplicabilityReport(failures=tuple(colliders)))

    first_failures = None
    for paths in (list(ctx.paths), [p.reversed() for p in ctx.paths]):
        found = _chain(ctx, paths)
        if isinstance(found, Failure):
            failures = [found]
            partition = None
        else:
            partition, failures = _attempt(ctx, found)
        if not failures:
            return _finish(ctx, ApplicabilityReport(), found, partition, "chained")
        first_failures = first_failures or failures
    raise InapplicableError(ApplicabilityReport(failures=tuple(first_failures)), "segment inapplicable")


# --- Sign preservation ---

class SignReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    s1: tuple[str, ...]
    s2: tuple[str, ...]
    original_sign: int
    signs: tuple[int, int]
    base_signs: tuple[int, int]
    # every ratio is positive, so sign(value) = sign(base) on applicable sets
    base_consistent: bool
    agrees: bool


def sign_preservation_check(
    original: PathDiagram,
    x: str,
    y: str,
    s1: Iterable[str],
    s2: Iterable[str],
) -> SignReport:
    """Signs of σ_XY, σ_XY·S1 and σ_XY·S2 for two applicable sets."""
    outcomes = [factorized_partial_covariance(original, x, y, s) for s in (s1, s2)]
    for outcome in outcomes:
        if not outcome.report.applicable:
            raise InapplicableError(outcome.report)
    sigma = implied_covariance(original)
    scale = sigma.scale()
    original_sign = sign(sigma.entry(x, y), scale)
    signs = tuple(sign(o.result.value, scale) for o in outcomes)
    base_signs = tuple(sign(o.result.base, scale) if o.paths else 0 for o in outcomes)
    return SignReport(
        x=x,
        y=y,
        s1=outcomes[0].s,
        s2=outcomes[1].s,
        original_sign=original_sign,
        signs=signs,
        base_signs=base_signs,
        base_consistent=signs == base_signs,
        agrees=signs[0] == signs[1] == original_sign,
    )


# --- Partition order experiment ---

class OrderDivergence(BaseModel):
    model_config = ConfigDict(frozen=True)

    order: tuple[str, ...]
    partition: ZPartition
    applicable: bool


class OrderExperiment(BaseModel):
    model_config = ConfigDict(frozen=True)

    runs: int
    reference: ZPartition
    divergences: tuple[OrderDivergence, ...] = ()


def partition_order_experiment(
    original: PathDiagram,
    x: str,
    y: str,
    s: Iterable[str],
    runs: int = 20,
    seed: int = 0,
) -> OrderExperiment:
    """Re-run the Z partition under random candidate orders and collect the ones that differ."""
    outcome = factorized_partial_covariance(original, x, y, s)
    if not outcome.report.applicable or outcome.spine is None:
        raise InapplicableError(outcome.report)
    ctx = _prepare(original, x, y, s)
    rng = np.random.default_rng(seed)
    reference = outcome.partition
    divergences = []
    for _ in range(runs):
        order = tuple(rng.permutation(sorted(outcome.z)).tolist())
        partition, failures = build_z_partition(ctx.conditioned.diagram, outcome.spine, outcome.z, ctx.paths, order=order)
        if partition.shape() != reference.shape() or failures:
            logger.debug("partition order %s diverges", order)
            divergences.append(OrderDivergence(order=order, partition=partition, applicable=not failures))
    return OrderExperiment(runs=runs, reference=reference, divergences=tuple(divergences))
