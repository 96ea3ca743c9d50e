"""Soil moisture to relative permittivity (Topp) and moisture unit conversion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOPP_COEFFS = (3.03, 9.3, 146.0, -76.6)
DEFAULT_BULK_DENSITY = 1.3  # g/cm^3, loam


class DomainError(ValueError):
    """Input outside the physical domain of a model."""


def _check_theta(theta):
    arr = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"moisture fraction must lie in [0, 1], got {theta!r}")
    return arr


def topp_permittivity(theta):
    """Relative permittivity of moist soil at gravimetric water fraction ``theta``.

    Accepts scalars or arrays; values outside [0, 1] raise ``DomainError``
    instead of being extrapolated.
    """
    t = _check_theta(theta)
    c0, c1, c2, c3 = TOPP_COEFFS
    eps = c0 + c1 * t + c2 * t**2 + c3 * t**3
    return float(eps) if eps.ndim == 0 else eps


def vwc_to_gwc(vwc, bulk_density=DEFAULT_BULK_DENSITY):
    """Volumetric water content to gravimetric, dividing by bulk density (g/cm^3)."""
    if not bulk_density > 0:
        raise DomainError(f"bulk density must be positive, got {bulk_density!r}")
    v = np.asarray(vwc, dtype=float)
    if np.any(v < 0):
        raise DomainError(f"volumetric water content must be >= 0, got {vwc!r}")
    out = v / bulk_density
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SoilSample:
    theta_gwc: float
    epsilon: float

    def __post_init__(self):
        _check_theta(self.theta_gwc)
        if self.epsilon < 1.0:
            raise DomainError("relative permittivity cannot be below vacuum")
        if not np.isclose(self.epsilon, topp_permittivity(self.theta_gwc), rtol=1e-12, atol=0):
            raise DomainError("epsilon is inconsistent with the Topp curve")

    @classmethod
    def from_moisture(cls, theta_gwc: float) -> "SoilSample":
        return cls(float(theta_gwc), topp_permittivity(theta_gwc))

    @classmethod
    def from_percent(cls, percent: float) -> "SoilSample":
        return cls.from_moisture(percent / 100.0)
