"""Random parameters for a fixed diagram structure."""
import logging

import numpy as np

from .conf import get_settings
from .diagram import Edge, PathDiagram, error_covariance_matrix, is_positive_definite
from .exceptions import GenerationError

logger = logging.getLogger(__name__)

COEFFICIENT_RANGE = (0.1, 2.0)
VARIANCE_RANGE = (0.5, 2.0)


def sample_coefficient(rng: np.random.Generator, low: float, high: float) -> float:
    """Magnitude uniform in [low, high], sign uniform."""
    magnitude = rng.uniform(low, high)
    return float(magnitude if rng.random() < 0.5 else -magnitude)


def _loaded(diagram: PathDiagram, amount: float) -> PathDiagram:
    return PathDiagram(
        nodes=diagram.nodes,
        edges=diagram.edges,
        error_variance={n: v + amount for n, v in diagram.error_variance.items()},
    )


def sample_parameters(
    structure: PathDiagram,
    rng: np.random.Generator,
    coefficient_range: tuple[float, float] = COEFFICIENT_RANGE,
    variance_range: tuple[float, float] = VARIANCE_RANGE,
    loading: bool = False,
) -> PathDiagram:
    """
    Fresh coefficients, error variances and error covariances on the edges
    of ``structure``. Draws whose Ω is not positive definite are rejected;
    with ``loading`` the variances are first raised in small steps.
    """
    cfg = get_settings()
    for attempt in range(cfg.pd_attempts):
        variance = {n: float(rng.uniform(*variance_range)) for n in structure.nodes}
        edges = []
        for e in structure.edges:
            if e.is_directed:
                edges.append(Edge.directed(e.tail, e.head, sample_coefficient(rng, *coefficient_range)))
            else:
                bound = float(np.sqrt(variance[e.tail] * variance[e.head]))
                edges.append(Edge.bidirected(e.tail, e.head, float(rng.uniform(-bound, bound))))
        candidate = PathDiagram(nodes=structure.nodes, edges=tuple(edges), error_variance=variance)
        if is_positive_definite(error_covariance_matrix(candidate)):
            return candidate
        if loading:
            for step in range(1, cfg.loading_max + 1):
                loaded = _loaded(candidate, cfg.loading_step * step)
                if is_positive_definite(error_covariance_matrix(loaded)):
                    return loaded
        logger.debug("Ω not positive definite, attempt %d rejected", attempt + 1)
    logger.warning("no positive definite Ω after %d attempts", cfg.pd_attempts)
    raise GenerationError(f"no positive definite error covariance after {cfg.pd_attempts} attempts")
