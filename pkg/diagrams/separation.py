"""
Z-open paths and routes on path diagrams, and m-separation.

Two openness rules are used throughout:

- path semantics: every collider is in Z or has a descendant in Z, and every
  non-collider is outside Z;
- route semantics: every collider occurrence is in Z, every non-collider
  occurrence is outside Z (nodes may repeat).

Existence questions are answered by reachability over (node, arrived with an
arrowhead) states, never by enumeration. Explicit enumeration is kept for the
open-path list the factorization needs and is capped.
"""
import logging
from collections import deque
from typing import Callable, Iterable, Literal

from pydantic import BaseModel, ConfigDict, model_validator

from .conf import get_settings
from .diagram import Edge, PathDiagram
from .exceptions import PathLimitExceeded, QueryError, WalkNotOpenError

logger = logging.getLogger(__name__)

FirstHop = Literal["parents_spouses", "children"]


# --- Walks ---

class Walk(BaseModel):
    """Alternating node/edge sequence; ``edges[i]`` joins ``nodes[i]`` and ``nodes[i + 1]``."""

    model_config = ConfigDict(frozen=True)

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...] = ()

    @model_validator(mode="after")
    def _consecutive(self):
        if not self.nodes:
            raise ValueError("a walk has at least one node")
        if len(self.edges) != len(self.nodes) - 1:
            raise ValueError("a walk needs exactly one edge between consecutive nodes")
        for i, e in enumerate(self.edges):
            if {self.nodes[i], self.nodes[i + 1]} != set(e.endpoints):
                raise ValueError(f"edge {e.label()} does not join {self.nodes[i]} and {self.nodes[i + 1]}")
        return self

    @property
    def source(self) -> str:
        return self.nodes[0]

    @property
    def target(self) -> str:
        return self.nodes[-1]

    def __len__(self) -> int:
        return len(self.edges)

    def label(self) -> str:
        parts = [self.nodes[0]]
        for i, e in enumerate(self.edges):
            if not e.is_directed:
                arrow = "<->"
            elif e.tail == self.nodes[i]:
                arrow = "->"
            else:
                arrow = "<-"
            parts += [arrow, self.nodes[i + 1]]
        return " ".join(parts)

    def sort_key(self) -> tuple:
        return (self.nodes, tuple(e.kind.value for e in self.edges))

    def reversed(self):
        return type(self)(nodes=self.nodes[::-1], edges=self.edges[::-1])


class Path(Walk):
    @model_validator(mode="after")
    def _distinct(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path nodes must be distinct")
        return self


class Route(Walk):
    pass


class Blocker(BaseModel):
    model_config = ConfigDict(frozen=True)

    node: str
    position: int
    reason: Literal["non-collider-in-Z", "collider-not-activated"]


class OpennessVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    open: bool
    blocker: Blocker | None = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.open != (self.blocker is None):
            raise ValueError("open iff no blocker")
        return self


def is_collider_at(walk: Walk, position: int) -> bool:
    """True iff both traversed edges at the interior occurrence ``position`` point into it."""
    if not 0 < position < len(walk.nodes) - 1:
        raise QueryError(f"position {position} is not an interior occurrence")
    node = walk.nodes[position]
    return walk.edges[position - 1].has_arrowhead_at(node) and walk.edges[position].has_arrowhead_at(node)


# --- Query checks ---

def check_query(diagram: PathDiagram, x: str, y: str, z: Iterable[str]) -> frozenset[str]:
    z = frozenset(z)
    diagram.require(x, y, *sorted(z))
    if x == y:
        raise QueryError(f"endpoints coincide: {x}")
    for end in (x, y):
        if end in z:
            raise QueryError(f"endpoint {end} is in the conditioning set")
    return z


def _check_walk(diagram: PathDiagram, walk: Walk, z: frozenset[str]) -> None:
    diagram.require(*walk.nodes, *sorted(z))
    keys = {e.key for e in diagram.edges}
    for e in walk.edges:
        if e.key not in keys:
            raise QueryError(f"edge {e.label()} is not in the diagram")
    for end in (walk.source, walk.target):
        if end in z:
            raise QueryError(f"endpoint {end} is in the conditioning set")


def _verdict(walk: Walk, z: frozenset[str], openers: frozenset[str]) -> OpennessVerdict:
    for pos in range(1, len(walk.nodes) - 1):
        node = walk.nodes[pos]
        if is_collider_at(walk, pos):
            if node not in openers:
                return OpennessVerdict(open=False, blocker=Blocker(node=node, position=pos, reason="collider-not-activated"))
        elif node in z:
            return OpennessVerdict(open=False, blocker=Blocker(node=node, position=pos, reason="non-collider-in-Z"))
    return OpennessVerdict(open=True)


def path_is_open(diagram: PathDiagram, path: Walk, z: Iterable[str]) -> OpennessVerdict:
    z = frozenset(z)
    _check_walk(diagram, path, z)
    return _verdict(path, z, diagram.ancestors_of(z))


def route_is_open(diagram: PathDiagram, route: Walk, z: Iterable[str]) -> OpennessVerdict:
    z = frozenset(z)
    _check_walk(diagram, route, z)
    return _verdict(route, z, z)


# --- Reachability over (node, arrowhead) states ---

State = tuple[str, bool]
EdgeFilter = Callable[[Edge], bool]


def _first_hop_filter(source: str, first_hop: FirstHop | None) -> EdgeFilter | None:
    if first_hop is None:
        return None
    if first_hop == "children":
        return lambda e: e.is_directed and e.tail == source
    return lambda e: e.has_arrowhead_at(source)


def search_open_walk(
    diagram: PathDiagram,
    source: str,
    z: frozenset[str],
    openers: frozenset[str],
    is_goal: Callable[[Edge, str], bool],
    first_edge: EdgeFilter | None = None,
    avoid: frozenset[str] = frozenset(),
) -> Route | None:
    """
    Breadth-first search for an open walk out of ``source``.

    A collider occurrence passes when it is in ``openers``, a non-collider
    when it is outside ``z``. The walk ends on the first traversal for which
    ``is_goal(edge, reached)`` holds; goal nodes are never expanded.
    """
    parent: dict[State, tuple[State | None, Edge]] = {}
    queue: deque[State] = deque()

    def finish(last: State | None, edge: Edge, reached: str) -> Route:
        nodes, edges = [reached], [edge]
        state = last
        while state is not None:
            nodes.append(state[0])
            state, step = parent[state]
            edges.append(step)
        nodes.append(source)
        return Route(nodes=tuple(reversed(nodes)), edges=tuple(reversed(edges)))

    for e in diagram.incident[source]:
        if first_edge is not None and not first_edge(e):
            continue
        w = e.other(source)
        if is_goal(e, w):
            return Route(nodes=(source, w), edges=(e,))
        if w in avoid:
            continue
        state = (w, e.has_arrowhead_at(w))
        if state not in parent:
            parent[state] = (None, e)
            queue.append(state)

    while queue:
        state = queue.popleft()
        v, arrowhead = state
        for f in diagram.incident[v]:
            collider = arrowhead and f.has_arrowhead_at(v)
            if collider and v not in openers:
                continue
            if not collider and v in z:
                continue
            w = f.other(v)
            if is_goal(f, w):
                return finish(state, f, w)
            if w in avoid:
                continue
            nxt = (w, f.has_arrowhead_at(w))
            if nxt not in parent:
                parent[nxt] = (state, f)
                queue.append(nxt)
    return None


def shorten(walk: Walk) -> Path:
    """
    Cut loops out of a walk until its nodes are distinct: at the first node
    that repeats, drop everything between its first and last occurrence.
    The result uses a subset of the walk's edges.
    """
    nodes, edges = list(walk.nodes), list(walk.edges)
    while True:
        first: dict[str, int] = {}
        cut = None
        for i, n in enumerate(nodes):
            if n in first:
                cut = first[n]
                break
            first[n] = i
        if cut is None:
            return Path(nodes=tuple(nodes), edges=tuple(edges))
        node = nodes[cut]
        last = max(i for i, n in enumerate(nodes) if n == node)
        nodes = nodes[: cut + 1] + nodes[last + 1:]
        edges = edges[:cut] + edges[last:]


def find_open_path(
    diagram: PathDiagram,
    source: str,
    target: str,
    z: Iterable[str],
    first_hop: FirstHop | None = None,
    avoid: Iterable[str] = (),
) -> Path | None:
    """
    A Z-open path from ``source`` to ``target`` that leaves the source through
    ``first_hop`` (parents and spouses, or children) and touches no node of
    ``avoid``; None when there is none.
    """
    z = check_query(diagram, source, target, z)
    # the source is never revisited, so the first edge survives shortening
    blocked = frozenset(avoid) | {source}
    if target in blocked:
        return None
    walk = search_open_walk(
        diagram,
        source,
        z,
        diagram.ancestors_of(z),
        is_goal=lambda _e, w: w == target,
        first_edge=_first_hop_filter(source, first_hop),
        avoid=blocked,
    )
    return None if walk is None else shorten(walk)


def m_separated(diagram: PathDiagram, x: str, y: str, z: Iterable[str]) -> bool:
    """True iff no Z-open path joins x and y."""
    return find_open_path(diagram, x, y, z) is None


def find_open_route(
    diagram: PathDiagram,
    x: str,
    y: str,
    z: Iterable[str],
    first_edge: EdgeFilter | None = None,
) -> Route | None:
    z = frozenset(z)
    diagram.require(x, y, *sorted(z))
    return search_open_walk(diagram, x, z, z, is_goal=lambda _e, w: w == y, first_edge=first_edge)


def has_open_route(diagram: PathDiagram, x: str, y: str, z: Iterable[str]) -> bool:
    check_query(diagram, x, y, z)
    return find_open_route(diagram, x, y, z) is not None


# --- Enumeration ---

def enumerate_open_paths(
    diagram: PathDiagram,
    x: str,
    y: str,
    z: Iterable[str],
    cap: int | None = None,
) -> list[Path]:
    """All Z-open paths from x to y, ordered by node sequence."""
    z = check_query(diagram, x, y, z)
    cap = get_settings().path_cap if cap is None else cap
    openers = diagram.ancestors_of(z)
    found: list[Path] = []
    nodes, edges = [x], []
    on_path = {x}

    def extend(v: str, arrival: Edge | None) -> None:
        for f in diagram.incident[v]:
            w = f.other(v)
            if w in on_path:
                continue
            if arrival is not None:
                collider = arrival.has_arrowhead_at(v) and f.has_arrowhead_at(v)
                if collider and v not in openers:
                    continue
                if not collider and v in z:
                    continue
            if w == y:
                found.append(Path(nodes=tuple(nodes + [w]), edges=tuple(edges + [f])))
                if len(found) > cap:
                    logger.warning("open path enumeration %s..%s exceeded cap %d", x, y, cap)
                    raise PathLimitExceeded(cap)
                continue
            nodes.append(w)
            edges.append(f)
            on_path.add(w)
            extend(w, f)
            on_path.discard(w)
            edges.pop()
            nodes.pop()

    extend(x, None)
    return sorted(found, key=Walk.sort_key)


def enumerate_open_routes(
    diagram: PathDiagram,
    x: str,
    y: str,
    z: Iterable[str],
    max_length: int | None = None,
    cap: int | None = None,
) -> list[Route]:
    """
    Z-open routes from x to y (route semantics). Each edge is traversed at
    most twice per direction and routes are at most ``max_length`` edges long
    (default twice the edge count). Routes stop at their first visit to y.
    """
    z = check_query(diagram, x, y, z)
    cap = get_settings().path_cap if cap is None else cap
    limit = 2 * len(diagram.edges) if max_length is None else max_length
    found: list[Route] = []
    used: dict[tuple, int] = {}
    nodes, edges = [x], []

    def extend(v: str, arrival: Edge | None) -> None:
        if len(edges) >= limit:
            return
        for f in diagram.incident[v]:
            if arrival is not None:
                collider = arrival.has_arrowhead_at(v) and f.has_arrowhead_at(v)
                if collider and v not in z:
                    continue
                if not collider and v in z:
                    continue
            w = f.other(v)
            step = (f.key, v)
            if used.get(step, 0) >= 2:
                continue
            if w == y:
                found.append(Route(nodes=tuple(nodes + [w]), edges=tuple(edges + [f])))
                if len(found) > cap:
                    raise PathLimitExceeded(cap)
                continue
            used[step] = used.get(step, 0) + 1
            nodes.append(w)
            edges.append(f)
            extend(w, f)
            edges.pop()
            nodes.pop()
            used[step] -= 1

    extend(x, None)
    return sorted(found, key=Walk.sort_key)


# --- Route <-> path reductions ---

def route_to_path(diagram: PathDiagram, route: Walk, z: Iterable[str]) -> Path:
    """A Z-open path whose edges are a subset of the open route's edges."""
    z = frozenset(z)
    verdict = route_is_open(diagram, route, z)
    if not verdict.open:
        raise WalkNotOpenError(f"route is blocked at {verdict.blocker.node} ({verdict.blocker.reason})")
    return shorten(route)


def _descent_to(diagram: PathDiagram, start: str, z: frozenset[str]) -> list[Edge] | None:
    """Directed edges of a shortest path start -> ... -> some node of z, passing outside z."""
    previous: dict[str, Edge | None] = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v in z:
            trail = []
            while previous[v] is not None:
                trail.append(previous[v])
                v = previous[v].tail
            return trail[::-1]
        for c in sorted(diagram.children(v)):
            if c not in previous:
                previous[c] = diagram.directed_edge(v, c)
                queue.append(c)
    return None


def path_to_route(diagram: PathDiagram, path: Walk, z: Iterable[str]) -> Route:
    """
    Replace every collider C outside z by the detour C -> ... -> W <- ... <- C
    down to a node W in z, giving a Z-open route.
    """
    z = frozenset(z)
    verdict = path_is_open(diagram, path, z)
    if not verdict.open:
        raise WalkNotOpenError(f"path is blocked at {verdict.blocker.node} ({verdict.blocker.reason})")
    nodes, edges = [path.nodes[0]], []
    for pos in range(1, len(path.nodes)):
        edges.append(path.edges[pos - 1])
        node = path.nodes[pos]
        nodes.append(node)
        if pos == len(path.nodes) - 1 or node in z or not is_collider_at(path, pos):
            continue
        detour = _descent_to(diagram, node, z)
        if not detour:
            raise WalkNotOpenError(f"collider {node} has no directed path into the conditioning set")
        down = [e.head for e in detour]
        nodes += down + down[-2::-1] + [node]
        edges += detour + detour[::-1]
    return Route(nodes=tuple(nodes), edges=tuple(edges))
