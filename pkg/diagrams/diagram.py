"""
Parameterized path diagrams: linear SEMs on acyclic directed mixed graphs.

Directed edges carry path coefficients (Λ), bidirected edges carry error
covariances and every node an error variance (Ω). Diagrams are immutable;
all iteration is in lexicographic node order.
"""
import logging
import re
from enum import Enum
from functools import cached_property
from typing import Iterable, Literal

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator
from scipy import linalg

from .conf import get_settings
from .exceptions import DiagramError

logger = logging.getLogger(__name__)

NODE_RE = re.compile(r"^[A-Za-z0-9_]+$")

DEFAULT_ERROR_VARIANCE = 1.0


class EdgeKind(str, Enum):
    DIRECTED = "directed"
    BIDIRECTED = "bidirected"


def check_node_name(name: str) -> str:
    if not isinstance(name, str) or not NODE_RE.match(name):
        raise ValueError(f"invalid node name {name!r}")
    return name


# --- Edges ---

class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: EdgeKind
    tail: str
    head: str
    weight: float

    @field_validator("tail", "head")
    @classmethod
    def _node_name(cls, v: str) -> str:
        return check_node_name(v)

    @model_validator(mode="before")
    @classmethod
    def _canonical(cls, data):
        # bidirected edges are unordered: store them with tail < head
        if isinstance(data, dict) and data.get("kind") in (EdgeKind.BIDIRECTED, "bidirected"):
            tail, head = data.get("tail"), data.get("head")
            if isinstance(tail, str) and isinstance(head, str) and head < tail:
                data = {**data, "tail": head, "head": tail}
        return data

    @model_validator(mode="after")
    def _no_self_loop(self):
        if self.tail == self.head:
            raise ValueError(f"self-loop at {self.tail}")
        return self

    @classmethod
    def directed(cls, tail: str, head: str, weight: float) -> "Edge":
        return cls(kind=EdgeKind.DIRECTED, tail=tail, head=head, weight=weight)

    @classmethod
    def bidirected(cls, a: str, b: str, weight: float) -> "Edge":
        return cls(kind=EdgeKind.BIDIRECTED, tail=a, head=b, weight=weight)

    @property
    def is_directed(self) -> bool:
        return self.kind is EdgeKind.DIRECTED

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind.value, self.tail, self.head)

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.tail, self.head)

    def other(self, node: str) -> str:
        if node == self.tail:
            return self.head
        if node == self.head:
            return self.tail
        raise DiagramError(f"{node} is not an endpoint of {self.label()}")

    def has_arrowhead_at(self, node: str) -> bool:
        if node not in self.endpoints:
            raise DiagramError(f"{node} is not an endpoint of {self.label()}")
        return not self.is_directed or node == self.head

    def label(self) -> str:
        arrow = "->" if self.is_directed else "<->"
        return f"{self.tail} {arrow} {self.head}"

    def sort_key(self) -> tuple[str, str, str]:
        return (self.tail, self.head, self.kind.value)


# --- Diagrams ---

class PathDiagram(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes: tuple[str, ...] = ()
    edges: tuple[Edge, ...] = ()
    error_variance: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _fill(cls, data):
        if not isinstance(data, dict):
            return data
        edges = tuple(data.get("edges", ()))
        variance = dict(data.get("error_variance") or {})
        nodes = data.get("nodes")
        if nodes is None:
            found = set(variance)
            for e in edges:
                if isinstance(e, Edge):
                    found.update(e.endpoints)
                else:
                    found.update((e["tail"], e["head"]))
            nodes = found
        nodes = tuple(sorted(set(nodes)))
        for n in nodes:
            variance.setdefault(n, DEFAULT_ERROR_VARIANCE)
        return {**data, "nodes": nodes, "edges": edges, "error_variance": variance}

    @field_validator("nodes")
    @classmethod
    def _node_names(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        for n in v:
            check_node_name(n)
        return v

    @field_validator("edges")
    @classmethod
    def _edge_order(cls, v: tuple[Edge, ...]) -> tuple[Edge, ...]:
        # duplicates are kept for validate() to report
        return tuple(sorted(v, key=Edge.sort_key))

    @classmethod
    def from_parts(
        cls,
        edges: Iterable[Edge] = (),
        error_variance: dict[str, float] | None = None,
        nodes: Iterable[str] | None = None,
    ) -> "PathDiagram":
        return cls(
            nodes=None if nodes is None else tuple(nodes),
            edges=tuple(edges),
            error_variance=error_variance or {},
        )

    # Cached lookups. Build derived diagrams through the constructor, not model_copy.

    @cached_property
    def index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def incident(self) -> dict[str, tuple[Edge, ...]]:
        table: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in sorted(self.edges, key=Edge.sort_key):
            for end in e.endpoints:
                table.setdefault(end, []).append(e)
        return {n: tuple(es) for n, es in table.items()}

    @cached_property
    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((e.tail, e.head) for e in self.edges if e.is_directed)
        return g

    def require(self, *nodes: str) -> None:
        for n in nodes:
            if n not in self.index:
                raise DiagramError(f"unknown node {n!r}")

    def parents(self, x: str) -> frozenset[str]:
        self.require(x)
        return frozenset(e.tail for e in self.incident[x] if e.is_directed and e.head == x)

    def children(self, x: str) -> frozenset[str]:
        self.require(x)
        return frozenset(e.head for e in self.incident[x] if e.is_directed and e.tail == x)

    def spouses(self, x: str) -> frozenset[str]:
        self.require(x)
        return frozenset(e.other(x) for e in self.incident[x] if not e.is_directed)

    def directed_edge(self, tail: str, head: str) -> Edge | None:
        for e in self.incident.get(tail, ()):
            if e.is_directed and e.tail == tail and e.head == head:
                return e
        return None

    def bidirected_edge(self, a: str, b: str) -> Edge | None:
        for e in self.incident.get(a, ()):
            if not e.is_directed and e.other(a) == b:
                return e
        return None

    def descendants_of(self, nodes: Iterable[str]) -> frozenset[str]:
        """The given nodes and everything reachable from them along directed edges."""
        found = set()
        for n in nodes:
            self.require(n)
            found.add(n)
            found.update(nx.descendants(self.digraph, n))
        return frozenset(found)

    def ancestors_of(self, nodes: Iterable[str]) -> frozenset[str]:
        """The given nodes and every node with a directed path into one of them."""
        found = set()
        for n in nodes:
            self.require(n)
            found.add(n)
            found.update(nx.ancestors(self.digraph, n))
        return frozenset(found)

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.digraph)

    def topological_order(self) -> list[str]:
        return list(nx.lexicographical_topological_sort(self.digraph))

    def is_singly_connected(self) -> bool:
        # skeleton with parallel edges kept, so X -> Y plus X <-> Y is a cycle
        g = nx.MultiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(e.endpoints for e in self.edges)
        return g.number_of_edges() == g.number_of_nodes() - nx.number_connected_components(g)


# --- Validation ---

ViolationKind = Literal[
    "dangling endpoint",
    "duplicate edge",
    "directed cycle",
    "Ω not positive definite",
]


class Violation(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ViolationKind
    detail: str


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    violations: tuple[Violation, ...] = ()

    @computed_field
    @property
    def ok(self) -> bool:
        return not self.violations


def is_positive_definite(matrix: np.ndarray, pivot_tol: float | None = None) -> bool:
    """Cholesky attempt plus a floor on the squared pivots."""
    if matrix.shape[0] == 0:
        return True
    tol = get_settings().pivot_tol if pivot_tol is None else pivot_tol
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
        return False
    try:
        factor = linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(factor) ** 2) > tol)


def validate(diagram: PathDiagram) -> ValidationReport:
    """
    Check every PathDiagram invariant; violations are returned, never raised.
    """
    violations: list[Violation] = []
    known = set(diagram.nodes)

    dangling = sorted(
        {end for e in diagram.edges for end in e.endpoints if end not in known}
        | {n for n in diagram.error_variance if n not in known}
    )
    for n in dangling:
        violations.append(Violation(kind="dangling endpoint", detail=f"{n} is not a declared node"))

    seen: set[tuple[str, str, str]] = set()
    for e in diagram.edges:
        if e.key in seen:
            violations.append(Violation(kind="duplicate edge", detail=e.label()))
        seen.add(e.key)

    if not dangling:
        try:
            cycle = nx.find_cycle(diagram.digraph)
        except nx.NetworkXNoCycle:
            cycle = None
        if cycle:
            trail = " -> ".join([u for u, _ in cycle] + [cycle[0][0]])
            violations.append(Violation(kind="directed cycle", detail=trail))

        omega = error_covariance_matrix(diagram)
        if not is_positive_definite(omega):
            violations.append(Violation(kind="Ω not positive definite", detail="error covariance matrix"))

    if violations:
        logger.debug("diagram invalid: %s", [v.kind for v in violations])
    return ValidationReport(violations=tuple(violations))


def require_valid(diagram: PathDiagram) -> None:
    report = validate(diagram)
    if not report.ok:
        first = report.violations[0]
        raise DiagramError(f"{first.kind}: {first.detail}")


# --- Matrices ---

def _position(diagram: PathDiagram, node: str) -> int:
    try:
        return diagram.index[node]
    except KeyError:
        raise DiagramError(f"unknown node {node!r}") from None


def error_covariance_matrix(diagram: PathDiagram) -> np.ndarray:
    """Ω in ``diagram.nodes`` order."""
    size = len(diagram.nodes)
    omega = np.zeros((size, size))
    for n, v in diagram.error_variance.items():
        i = _position(diagram, n)
        omega[i, i] = v
    for e in diagram.edges:
        if not e.is_directed:
            i, j = _position(diagram, e.tail), _position(diagram, e.head)
            omega[i, j] = omega[j, i] = e.weight
    return omega


def coefficient_matrix(diagram: PathDiagram) -> np.ndarray:
    """Λ in ``diagram.nodes`` order; Λ[i, j] is the coefficient of i -> j."""
    size = len(diagram.nodes)
    lam = np.zeros((size, size))
    for e in diagram.edges:
        if e.is_directed:
            lam[_position(diagram, e.tail), _position(diagram, e.head)] = e.weight
    return lam
