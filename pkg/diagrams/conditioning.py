"""
Observational conditioning by node splitting.

Conditioning on S replaces every edge A -> B with A in S by A__B -> B, where
A__B is a new parentless node with its own error term. σ_XY·S in the original
diagram equals σ_XY·S∪S′ in the result, S′ being the new nodes.
"""
import logging
from functools import cached_property
from typing import Iterable

from pydantic import BaseModel, ConfigDict

from .conf import close, get_settings
from .diagram import Edge, PathDiagram
from .exceptions import NameCollisionError, QueryError
from .gaussian import implied_covariance, partial_covariance

logger = logging.getLogger(__name__)

SPLIT_SEPARATOR = "__"


class Split(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str
    child: str
    node: str


class ConditionedDiagram(BaseModel):
    model_config = ConfigDict(frozen=True)

    diagram: PathDiagram
    base: PathDiagram
    splits: tuple[Split, ...] = ()
    s_nodes: tuple[str, ...] = ()

    @cached_property
    def split_map(self) -> dict[tuple[str, str], str]:
        return {(s.source, s.child): s.node for s in self.splits}

    @property
    def s_prime(self) -> tuple[str, ...]:
        return tuple(sorted(s.node for s in self.splits))

    @property
    def z(self) -> tuple[str, ...]:
        """S ∪ S′, the conditioning set in the conditioned diagram."""
        return tuple(sorted(set(self.s_nodes) | set(self.s_prime)))


def split_name(source: str, child: str, taken: set[str], attempts: int) -> str:
    name = f"{source}{SPLIT_SEPARATOR}{child}"
    if name not in taken:
        return name
    for k in range(1, attempts + 1):
        candidate = f"{name}_{k}"
        if candidate not in taken:
            return candidate
    raise NameCollisionError(f"cannot name the split of {source} -> {child}: {name} is taken")


def condition(diagram: PathDiagram, s: Iterable[str], split_variance: float | None = None) -> ConditionedDiagram:
    cfg = get_settings()
    variance = cfg.split_variance if split_variance is None else split_variance
    s_nodes = tuple(sorted(set(s)))
    diagram.require(*s_nodes)

    taken = set(diagram.nodes)
    splits: list[Split] = []
    for a in s_nodes:
        for b in sorted(diagram.children(a)):
            name = split_name(a, b, taken, cfg.split_suffix_attempts)
            taken.add(name)
            splits.append(Split(source=a, child=b, node=name))

    renamed = {(sp.source, sp.child): sp.node for sp in splits}
    edges = []
    for e in diagram.edges:
        if e.is_directed and (e.tail, e.head) in renamed:
            edges.append(Edge.directed(renamed[(e.tail, e.head)], e.head, e.weight))
        else:
            edges.append(e)

    error_variance = dict(diagram.error_variance)
    for sp in splits:
        error_variance[sp.node] = variance

    conditioned = PathDiagram(
        nodes=tuple(diagram.nodes) + tuple(sp.node for sp in splits),
        edges=tuple(edges),
        error_variance=error_variance,
    )
    logger.debug("conditioned on %s: created %s", list(s_nodes), [sp.node for sp in splits])
    return ConditionedDiagram(diagram=conditioned, base=diagram, splits=tuple(splits), s_nodes=s_nodes)


class EquivalenceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    s: tuple[str, ...]
    original: float
    conditioned: float
    agrees: bool


def equivalence_check(
    original: PathDiagram,
    s: Iterable[str],
    conditioned: ConditionedDiagram,
    x: str,
    y: str,
) -> EquivalenceReport:
    """σ_XY·S on the original against σ_XY·S∪S′ on the conditioned diagram."""
    s_nodes = tuple(sorted(set(s)))
    for end in (x, y):
        if end in s_nodes:
            raise QueryError(f"{end} is in the conditioning set")
    before = partial_covariance(implied_covariance(original), x, y, s_nodes)
    after = partial_covariance(implied_covariance(conditioned.diagram), x, y, conditioned.z)
    return EquivalenceReport(x=x, y=y, s=s_nodes, original=before, conditioned=after, agrees=close(before, after))
