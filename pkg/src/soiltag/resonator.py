"""Lumped-element model of the soil-loaded DGS bandstop resonator.

The slot etched in the ground plane behaves as a parallel L_C/C_C tank in
series with the line-to-ground capacitance C_1. Soil facing the slot raises
the effective permittivity seen by C_C, which pulls the notch down in
frequency. Geometry maps to lumped values through a quasi-static plate model
whose two constants are pinned once, at import, from a single anchor design.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .soil import DomainError, topp_permittivity

EPS0 = 8.8541878128e-12  # F/m
EPS_FR4 = 4.4

GAIN_FLOOR_DB = -80.0
GAIN_CEIL_DB = 20.0

DEFAULT_Z = 50.0
DEFAULT_C1 = 0.4e-12
DEFAULT_R_LOSS = 0.2

# Anchor used to pin the geometry->lumped constants: a=10 mm, w=0.1 mm on dry
# soil resonates at 2.55 GHz with C_C = 0.15 pF. That split keeps the 0-20 %
# tag's in-band response distinct between every pair of adjacent levels.
ANCHOR_A_MM = 10.0
ANCHOR_W_MM = 0.1
ANCHOR_FC_HZ = 2.55e9
ANCHOR_CC = 0.15e-12


class InfeasibleBandError(ValueError):
    def __init__(self, band, nearest_fc):
        self.band = tuple(band)
        self.nearest_fc = nearest_fc
        super().__init__(
            f"no geometry places the first-level resonance in "
            f"[{band[0] / 1e9:.4f}, {band[1] / 1e9:.4f}] GHz; "
            f"nearest achievable f_c is {nearest_fc / 1e9:.4f} GHz"
        )


@dataclass(frozen=True)
class DgsGeometry:
    w: float  # slot width, mm
    a: float  # slot length, mm
    substrate_thickness: float = 1.2
    line_width: float = 2.24

    def __post_init__(self):
        if not (self.w > 0 and self.a > 0):
            raise DomainError(f"slot dimensions must be positive, got w={self.w}, a={self.a}")


@dataclass(frozen=True)
class CircuitParams:
    z_line: float
    z_source: float
    c1: float
    cc: float
    lc: float
    r_loss: float = DEFAULT_R_LOSS

    def __post_init__(self):
        for name in ("z_line", "z_source", "c1", "cc", "lc"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        if self.r_loss < 0:
            raise DomainError("r_loss must be non-negative")


@dataclass(frozen=True)
class FrequencyResponse:
    freqs: np.ndarray
    gain_db: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        g = np.asarray(self.gain_db, dtype=float)
        if f.ndim != 1 or f.size == 0 or f.shape != g.shape:
            raise ValueError("freqs and gain_db must be matching non-empty 1-D arrays")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "gain_db", g)

    def at(self, freqs) -> np.ndarray:
        """Gain in dB at ``freqs``, linear interpolation in dB; no extrapolation."""
        q = np.asarray(freqs, dtype=float)
        if np.any(q < self.freqs[0]) or np.any(q > self.freqs[-1]):
            raise ValueError(
                f"requested frequencies outside the response grid "
                f"[{self.freqs[0]:.6g}, {self.freqs[-1]:.6g}] Hz"
            )
        return np.interp(q, self.freqs, self.gain_db)

    @property
    def notch_hz(self) -> float:
        """Frequency of minimum gain; a clipped flat bottom reports its middle point."""
        idx = np.flatnonzero(self.gain_db == self.gain_db.min())
        return float(self.freqs[idx[idx.size // 2]])


def impedance(params: CircuitParams, omega):
    """Z_R(omega) of the slot branch plus C_1, in ohms.

    At the tank pole (omega = 1/sqrt(L_C C_C)) the branch admittance vanishes
    and the result is complex infinity.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("angular frequency must be positive")
    y_tank = 1j * w * params.cc + 1.0 / (1j * w * params.lc)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_tank = np.where(y_tank == 0, complex(np.inf, 0.0), 1.0 / np.where(y_tank == 0, 1.0, y_tank))
    z_tank = np.where(np.isinf(z_tank), complex(np.inf, 0.0), z_tank + params.r_loss)
    z = np.where(np.isinf(z_tank), complex(np.inf, 0.0), z_tank + 1.0 / (1j * w * params.c1))
    return complex(z) if z.ndim == 0 else z


def _transfer_magnitude(params: CircuitParams, z_r):
    zl, zo = params.z_line, params.z_source
    z_r = np.asarray(z_r, dtype=complex)
    out = np.empty(z_r.shape, dtype=float)
    inf = np.isinf(z_r)
    zero = z_r == 0
    mid = ~(inf | zero)
    out[inf] = zo / (2 * zl + zo)
    out[zero] = 0.0
    zm = z_r[mid]
    # U_out/U_in divided through by Z_R to stay finite near the pole
    den = (zl * zl + zo * zl) / zm + 2 * zl + zo
    out[mid] = zo / np.abs(den)
    return out


def frequency_response(
    params: CircuitParams, freqs, floor_db=GAIN_FLOOR_DB, ceil_db=GAIN_CEIL_DB
) -> FrequencyResponse:
    f = np.asarray(freqs, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-D array")
    if np.any(np.diff(f) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    mag = _transfer_magnitude(params, np.atleast_1d(impedance(params, 2 * np.pi * f)))
    with np.errstate(divide="ignore"):
        g = 20 * np.log10(mag)
    return FrequencyResponse(f, np.clip(g, floor_db, ceil_db))


def resonant_frequency(params: CircuitParams) -> float:
    return 1.0 / (2 * math.pi * math.sqrt(params.lc * (params.c1 + params.cc)))


def low_frequency_gain_db(params: CircuitParams) -> float:
    """Gain limit where |Z_R| dominates the line impedances."""
    return 20 * math.log10(params.z_source / (2 * params.z_line + params.z_source))


def effective_permittivity(epsilon_soil: float, epsilon_substrate: float = EPS_FR4) -> float:
    return 0.5 * (epsilon_substrate + epsilon_soil)


def _calibrate():
    eps_eff = effective_permittivity(topp_permittivity(0.0))
    kappa_c = ANCHOR_CC / (EPS0 * eps_eff * (ANCHOR_A_MM / ANCHOR_W_MM))
    lc = 1.0 / ((2 * math.pi * ANCHOR_FC_HZ) ** 2 * (DEFAULT_C1 + ANCHOR_CC))
    kappa_l = lc / (ANCHOR_A_MM * 1e-3)
    return kappa_c, kappa_l


KAPPA_C, KAPPA_L = _calibrate()  # metres, henry per metre


def lump_from_geometry(
    geom: DgsGeometry,
    epsilon_soil: float,
    *,
    c1: float = DEFAULT_C1,
    z_line: float = DEFAULT_Z,
    z_source: float = DEFAULT_Z,
    r_loss: float = DEFAULT_R_LOSS,
) -> CircuitParams:
    if epsilon_soil < 1.0:
        raise DomainError("soil permittivity cannot be below vacuum")
    eps_eff = effective_permittivity(epsilon_soil)
    cc = KAPPA_C * EPS0 * eps_eff * (geom.a / geom.w)
    lc = KAPPA_L * geom.a * 1e-3
    return CircuitParams(z_line=z_line, z_source=z_source, c1=c1, cc=cc, lc=lc, r_loss=r_loss)


def tag_response(geom: DgsGeometry, theta: float, freqs, **circuit_kw) -> FrequencyResponse:
    """Frequency response of ``geom`` buried in soil at moisture fraction ``theta``."""
    return frequency_response(lump_from_geometry(geom, topp_permittivity(theta), **circuit_kw), freqs)


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 10)


@dataclass(frozen=True)
class SearchSpace:
    w_mm: tuple = field(default_factory=lambda: tuple(_grid(0.1, 2.0, 0.1)))
    a_mm: tuple = field(default_factory=lambda: tuple(_grid(4.0, 14.0, 0.5)))

    @classmethod
    def from_ranges(cls, w_range, a_range):
        """Build from ``(lo, hi, step)`` triples."""
        return cls(tuple(_grid(*w_range)), tuple(_grid(*a_range)))


@dataclass(frozen=True)
class TuneResult:
    geometry: DgsGeometry
    delta_f_hz: tuple
    fc_per_level_hz: tuple
    n_candidates: int

    @property
    def min_delta_f_hz(self) -> float:
        return min(self.delta_f_hz)


def fc_table(thetas, w_mm, a_mm, **circuit_kw) -> np.ndarray:
    """Resonant frequency for every (level, w, a) triple; shape (levels, len(w), len(a))."""
    c1 = circuit_kw.get("c1", DEFAULT_C1)
    eps_eff = effective_permittivity(np.asarray(topp_permittivity(np.asarray(thetas, dtype=float))))
    w = np.asarray(w_mm, dtype=float)[None, :, None]
    a = np.asarray(a_mm, dtype=float)[None, None, :]
    cc = KAPPA_C * EPS0 * eps_eff[:, None, None] * (a / w)
    lc = KAPPA_L * a * 1e-3
    return 1.0 / (2 * np.pi * np.sqrt(lc * (c1 + cc)))


def tune_geometry(moisture_levels, band, search_space: SearchSpace | None = None, **circuit_kw) -> TuneResult:
    """Two-step design search over the (w, a) grid.

    Step one keeps geometries whose resonance at the driest level falls inside
    ``band``; step two picks the one whose smallest adjacent-level frequency
    offset is largest. Ties go to the smaller tag (smaller a, then smaller w).
    """
    levels = [float(t) for t in moisture_levels]
    if len(levels) < 2:
        raise ValueError("need at least two moisture levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("moisture levels must be strictly ascending")
    lo, hi = float(band[0]), float(band[1])
    if not (2.4e9 <= lo < hi <= 3.0e9):
        raise ValueError("band must satisfy 2.4 GHz <= lo < hi <= 3.0 GHz")
    space = search_space or SearchSpace()

    fc = fc_table(levels, space.w_mm, space.a_mm, **circuit_kw)
    dry = fc[0]
    feasible = (dry >= lo) & (dry <= hi)
    if not feasible.any():
        dist = np.minimum(np.abs(dry - lo), np.abs(dry - hi))
        raise InfeasibleBandError((lo, hi), float(dry.flat[np.argmin(dist)]))

    delta = fc[:-1] - fc[1:]
    score = delta.min(axis=0)
    best = None
    for i, j in zip(*np.nonzero(feasible)):
        key = (-score[i, j], space.a_mm[j], space.w_mm[i])
        if best is None or key < best[0]:
            best = (key, i, j)
    _, i, j = best
    geom = DgsGeometry(w=float(space.w_mm[i]), a=float(space.a_mm[j]))
    return TuneResult(
        geometry=geom,
        delta_f_hz=tuple(float(x) for x in delta[:, i, j]),
        fc_per_level_hz=tuple(float(x) for x in fc[:, i, j]),
        n_candidates=int(feasible.sum()),
    )
