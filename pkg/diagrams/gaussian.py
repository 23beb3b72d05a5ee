"""
Exact Gaussian numerics for path diagrams.

The oracle throughout is the Schur complement
σ_XY·Z = Σ_XY − Σ_XZ Σ_ZZ⁻¹ Σ_ZY, solved by Cholesky, never by inversion.
"""
import logging
from typing import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import linalg

from .conf import get_settings
from .diagram import PathDiagram, coefficient_matrix, error_covariance_matrix, require_valid
from .exceptions import DiagramError, NumericalError, PremiseError
from .separation import Path, check_query, enumerate_open_paths, is_collider_at, m_separated

logger = logging.getLogger(__name__)


# --- Covariance matrices ---

class CovarianceMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: tuple[str, ...]
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _square_symmetric(cls, v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("covariance matrix must be square")
        v = (v + v.T) / 2.0
        v.setflags(write=False)
        return v

    @model_validator(mode="after")
    def _shape_matches(self):
        if self.values.shape[0] != len(self.nodes):
            raise ValueError("one row per node")
        return self

    def position(self, node: str) -> int:
        try:
            return self.nodes.index(node)
        except ValueError:
            raise DiagramError(f"unknown node {node!r}") from None

    def positions(self, nodes: Iterable[str]) -> list[int]:
        return [self.position(n) for n in nodes]

    def entry(self, a: str, b: str) -> float:
        return float(self.values[self.position(a), self.position(b)])

    def scale(self) -> float:
        """Largest diagonal entry; the yardstick for sign bands."""
        return float(np.max(np.diag(self.values))) if self.nodes else 1.0


class PartialQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    z: tuple[str, ...] = ()

    @field_validator("z", mode="before")
    @classmethod
    def _sorted(cls, v):
        return tuple(sorted(set(v)))

    @model_validator(mode="after")
    def _endpoints_outside(self):
        for end in (self.x, self.y):
            if end in self.z:
                raise ValueError(f"{end} is in the conditioning set")
        return self


def implied_covariance(diagram: PathDiagram) -> CovarianceMatrix:
    """Σ = (I − Λ)⁻ᵀ Ω (I − Λ)⁻¹ in ``diagram.nodes`` order."""
    require_valid(diagram)
    size = len(diagram.nodes)
    if size == 0:
        return CovarianceMatrix(nodes=(), values=np.zeros((0, 0)))
    lam = coefficient_matrix(diagram)
    omega = error_covariance_matrix(diagram)
    # X = Λᵀ X + ε, hence X = (I − Λᵀ)⁻¹ ε
    mix = linalg.solve(np.eye(size) - lam.T, np.eye(size))
    return CovarianceMatrix(nodes=diagram.nodes, values=mix @ omega @ mix.T)


def _factor(block: np.ndarray):
    try:
        factor = linalg.cho_factor(block, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("conditioning block is not positive definite") from exc
    if np.min(np.diag(factor[0]) ** 2) <= get_settings().pivot_tol:
        raise NumericalError("conditioning block is numerically singular")
    return factor


def partial_covariance(sigma: CovarianceMatrix, x: str, y: str, z: Iterable[str] = ()) -> float:
    """σ_XY·Z by Schur complement; z empty gives Σ_XY."""
    q = PartialQuery(x=x, y=y, z=tuple(z))
    i, j = sigma.position(q.x), sigma.position(q.y)
    if not q.z:
        return float(sigma.values[i, j])
    zs = sigma.positions(q.z)
    factor = _factor(sigma.values[np.ix_(zs, zs)])
    solved = linalg.cho_solve(factor, sigma.values[zs, j])
    return float(sigma.values[i, j] - sigma.values[i, zs] @ solved)


def partial_variance(sigma: CovarianceMatrix, x: str, z: Iterable[str] = ()) -> float:
    return partial_covariance(sigma, x, x, z)


def partial_matrix(sigma: CovarianceMatrix, z: Iterable[str]) -> CovarianceMatrix:
    """Schur complement of Σ_ZZ: the covariance of the remaining nodes given z."""
    z = sorted(set(z))
    rest = [n for n in sigma.nodes if n not in z]
    if not z:
        return sigma
    zs, rs = sigma.positions(z), sigma.positions(rest)
    factor = _factor(sigma.values[np.ix_(zs, zs)])
    cross = sigma.values[np.ix_(zs, rs)]
    values = sigma.values[np.ix_(rs, rs)] - cross.T @ linalg.cho_solve(factor, cross)
    return CovarianceMatrix(nodes=tuple(rest), values=values)


def regression_coefficient(sigma: CovarianceMatrix, y: str, x: str, z: Iterable[str] = ()) -> float:
    """β_YX·Z = σ_XY·Z / σ²_X·Z."""
    z = tuple(z)
    variance = partial_variance(sigma, x, z)
    if variance <= 0:
        raise NumericalError(f"partial variance of {x} is not positive")
    return partial_covariance(sigma, x, y, z) / variance


# --- Wright's rule ---

class WrightTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: Path
    coefficients: tuple[float, ...]
    # error covariance of the path's bidirected edge, or None when the path has a root
    covariance: float | None = None
    root: str | None = None
    root_variance: float | None = None
    monomial: float


class WrightDecomposition(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    terms: tuple[WrightTerm, ...] = ()
    total: float = 0.0


def _root_of(path: Path) -> str:
    for pos, node in enumerate(path.nodes):
        before = pos > 0 and path.edges[pos - 1].has_arrowhead_at(node)
        after = pos < len(path.edges) and path.edges[pos].has_arrowhead_at(node)
        if not before and not after:
            return node
    raise DiagramError(f"path {path.label()} has no root")


def wright_covariance(diagram: PathDiagram, x: str, y: str) -> WrightDecomposition:
    """
    σ_XY as a sum over ∅-open paths: the product of the path's coefficients
    times either its bidirected edge's error covariance or the implied variance
    of its root.
    """
    check_query(diagram, x, y, ())
    sigma = implied_covariance(diagram)
    terms = []
    for path in enumerate_open_paths(diagram, x, y, ()):
        assert not any(is_collider_at(path, p) for p in range(1, len(path.nodes) - 1)), path.label()
        bidirected = [e for e in path.edges if not e.is_directed]
        assert len(bidirected) <= 1, path.label()
        coefficients = tuple(e.weight for e in path.edges if e.is_directed)
        product = float(np.prod(coefficients)) if coefficients else 1.0
        if bidirected:
            term = WrightTerm(
                path=path,
                coefficients=coefficients,
                covariance=bidirected[0].weight,
                monomial=product * bidirected[0].weight,
            )
        else:
            root = _root_of(path)
            root_variance = sigma.entry(root, root)
            term = WrightTerm(
                path=path,
                coefficients=coefficients,
                root=root,
                root_variance=root_variance,
                monomial=product * root_variance,
            )
        terms.append(term)
    total = float(sum(t.monomial for t in terms))
    return WrightDecomposition(x=x, y=y, terms=tuple(terms), total=total)


# --- Covariance-update identities ---

def _separated(diagram: PathDiagram, a: str, b: str, given: Iterable[str]) -> bool:
    given = frozenset(given)
    if a in given or b in given:
        return True
    if a == b:
        return False
    return m_separated(diagram, a, b, given)


def lemma_aux1_update(
    sigma: CovarianceMatrix,
    x: str,
    y: str,
    r: str,
    w: str,
    z: Iterable[str] = (),
    diagram: PathDiagram | None = None,
) -> float:
    """
    σ_XY·ZW as σ_XY·Z · σ²_R·ZW / σ²_R·Z.

    Valid when X ⟂ W, Y ⟂ W and X ⟂ Y given Z ∪ {R}. Passing ``diagram``
    re-checks the three separations first.
    """
    z = tuple(sorted(set(z)))
    if diagram is not None:
        given = set(z) | {r}
        for a, b in ((x, w), (y, w), (x, y)):
            if not _separated(diagram, a, b, given):
                raise PremiseError(f"{a} and {b} are connected given {sorted(given)}")
    zw = z + (w,)
    return partial_covariance(sigma, x, y, z) * partial_variance(sigma, r, zw) / partial_variance(sigma, r, z)


def lemma_aux2_update(
    sigma: CovarianceMatrix,
    x: str,
    y: str,
    w: str,
    z: Iterable[str] = (),
    diagram: PathDiagram | None = None,
) -> float:
    """σ_XY·ZW as σ_XY·Z · σ²_X·ZW / σ²_X·Z, valid when Y ⟂ W | Z ∪ {X}."""
    z = tuple(sorted(set(z)))
    if diagram is not None and not _separated(diagram, y, w, set(z) | {x}):
        raise PremiseError(f"{y} and {w} are connected given {sorted(set(z) | {x})}")
    zw = z + (w,)
    return partial_covariance(sigma, x, y, z) * partial_variance(sigma, x, zw) / partial_variance(sigma, x, z)


def lemma_aux3_update(
    sigma: CovarianceMatrix,
    x: str,
    y: str,
    w: str,
    z: Iterable[str] = (),
    diagram: PathDiagram | None = None,
) -> float:
    """σ_XY·ZW = σ_XY·Z, valid when X ⟂ W | Z or Y ⟂ W | Z."""
    z = tuple(sorted(set(z)))
    if diagram is not None and not (_separated(diagram, x, w, z) or _separated(diagram, y, w, z)):
        raise PremiseError(f"{w} is connected to both {x} and {y} given {list(z)}")
    return partial_covariance(sigma, x, y, z)
