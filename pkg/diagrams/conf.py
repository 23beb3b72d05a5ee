"""Analysis tunables, read from ``settings.CONDPATH``."""
from pydantic import BaseModel, ConfigDict, Field


class AnalysisSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_tol: float = Field(1e-9, gt=0)
    abs_tol: float = Field(1e-12, ge=0)
    pivot_tol: float = Field(1e-10, gt=0)
    sign_band: float = Field(1e-9, ge=0)
    path_cap: int = Field(10000, ge=1)
    split_variance: float = Field(1.0, gt=0)
    split_suffix_attempts: int = Field(3, ge=0)
    pd_attempts: int = Field(100, ge=1)
    loading_step: float = Field(0.1, gt=0)
    loading_max: int = Field(5, ge=0)
    witness_floor: float = Field(1e-6, ge=0)


def get_settings() -> AnalysisSettings:
    """
    Current tunables. Outside a configured Django process (plain library
    use) the defaults apply.
    """
    from django.conf import settings
    from django.core.exceptions import ImproperlyConfigured

    try:
        raw = getattr(settings, "CONDPATH", {})
    except ImproperlyConfigured:
        return AnalysisSettings()
    return AnalysisSettings(**raw)


def close(a: float, b: float, rel_tol: float | None = None, abs_tol: float | None = None) -> bool:
    # relative tolerance with an absolute floor for true zeros
    cfg = get_settings()
    rel = cfg.rel_tol if rel_tol is None else rel_tol
    floor = cfg.abs_tol if abs_tol is None else abs_tol
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), floor)


def sign(value: float, scale: float = 1.0, band: float | None = None) -> int:
    """-1, 0 or 1; values inside ±band·scale count as zero."""
    width = (get_settings().sign_band if band is None else band) * max(scale, 1.0)
    if value > width:
        return 1
    if value < -width:
        return -1
    return 0
