"""Passive beam alignment toward a battery-free tag.

AoD comes from a Tx beam scan profiled at the receiver, AoA from MUSIC over
the Rx array while the Tx beam dwells on the tag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, Scenario, complex_noise, steering_vector
from .linalg import jacobi_eigh


class TagNotDetected(RuntimeError):
    pass


class TagNotResolved(RuntimeError):
    pass


class DegenerateSubspaceError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialProfile:
    angles_deg: np.ndarray
    power_db: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles_deg, dtype=float)
        p = np.asarray(self.power_db, dtype=float)
        if a.shape != p.shape or a.ndim != 1:
            raise ValueError("angles and powers must be matching 1-D arrays")
        if np.any(np.diff(a) <= 0):
            raise ValueError("angle grid must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("profile powers must be finite")
        object.__setattr__(self, "angles_deg", a)
        object.__setattr__(self, "power_db", p)

    @property
    def linear(self) -> np.ndarray:
        return 10 ** (self.power_db / 10)


@dataclass(frozen=True)
class AlignmentResult:
    aod_deg: float
    aoa_deg: float
    confidence_db: float

    def __post_init__(self):
        for a in (self.aod_deg, self.aoa_deg):
            if not 0.0 <= a <= 180.0:
                raise ValueError(f"angle {a} outside [0, 180]")


def beamforming_weights(array: ArrayGeometry, angle_deg: float) -> np.ndarray:
    """Unit-power weights whose Hermitian product with the target steering vector is maximal."""
    a = steering_vector(array, angle_deg)
    return a / math.sqrt(array.num_elements)


def scan_angles(step_deg: float) -> np.ndarray:
    n = 180.0 / step_deg
    if step_deg <= 0 or abs(n - round(n)) > 1e-9:
        raise ValueError("scan step must divide 180 degrees")
    return np.linspace(0.0, 180.0, int(round(n)) + 1)


def beam_scan_profile(scenario: Scenario, scan_step_deg: float = 1.0, packets_per_angle: int = 1, stream: int = 1) -> SpatialProfile:
    """Receiver-side power for each Tx beam direction, averaged over packets."""
    angles = scan_angles(scan_step_deg)
    rx_part, a_tx = scenario.tx_responses()
    W = steering_vector(scenario.tx, angles)  # (A, Ntx), unit amplitude per element
    tx_gain = np.einsum("pft,at->pfa", a_tx.conj(), W)
    h = np.einsum("pfr,pfa->afr", rx_part, tx_gain)
    rng = scenario.rng(stream)
    power = np.zeros(angles.size)
    for _ in range(packets_per_angle):
        noisy = h + complex_noise(rng, h.shape, scenario.noise_power)
        power += np.mean(np.abs(noisy) ** 2, axis=(1, 2))
    power /= packets_per_angle
    return SpatialProfile(angles, 10 * np.log10(np.maximum(power, 1e-300)))


def smooth3(x: np.ndarray) -> np.ndarray:
    y = np.array(x, dtype=float)
    if y.size >= 3:
        y[1:-1] = (x[:-2] + x[1:-1] + x[2:]) / 3.0
    return y


def find_peaks(values: np.ndarray) -> list[int]:
    """Strict local maxima; a flat top counts once, at its centre. Endpoints never qualify."""
    v = np.asarray(values, dtype=float)
    peaks = []
    i = 1
    while i < v.size - 1:
        if v[i] > v[i - 1]:
            j = i
            while j + 1 < v.size and v[j + 1] == v[i]:
                j += 1
            if j + 1 < v.size and v[j + 1] < v[i]:
                peaks.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    return peaks


def _ranked_peaks(power_db, min_rel_db):
    s = smooth3(power_db)
    pk = [i for i in find_peaks(s) if s[i] >= s.max() - min_rel_db]
    return sorted(pk, key=lambda i: -s[i]), s


def estimate_aod(
    with_tag: SpatialProfile,
    without_tag: SpatialProfile | None = None,
    min_rel_db: float = 10.0,
    min_tag_fraction: float = 0.1,
) -> float:
    """Tag direction from a scan profile.

    Alone, the profile's second-largest peak is taken as the tag (the largest
    is the receiver). Peaks more than ``min_rel_db`` under the maximum are
    ignored so array sidelobes are not mistaken for the tag. With a tag-free
    profile the angle of largest linear power excess is returned instead; it
    must carry at least ``min_tag_fraction`` of the power there.
    """
    if with_tag.angles_deg[0] > 0 or with_tag.angles_deg[-1] < 180:
        raise ValueError("profile must cover 0..180 degrees")
    if without_tag is not None:
        if not np.array_equal(with_tag.angles_deg, without_tag.angles_deg):
            raise ValueError("profiles must share an angle grid")
        diff = smooth3(with_tag.linear - without_tag.linear)
        i = int(np.argmax(diff))
        if diff[i] <= min_tag_fraction * smooth3(with_tag.linear)[i]:
            raise TagNotDetected("no angle shows a tag power excess")
        return float(with_tag.angles_deg[i])
    ranked, _ = _ranked_peaks(with_tag.power_db, min_rel_db)
    if len(ranked) < 2:
        raise TagNotDetected("scan profile has fewer than two peaks")
    return float(with_tag.angles_deg[ranked[1]])


def aod_confidence_db(profile: SpatialProfile, aod_deg: float) -> float:
    i = int(np.argmin(np.abs(profile.angles_deg - aod_deg)))
    s = smooth3(profile.power_db)
    return float(s[i] - np.median(s))


def spatial_covariance(snapshots: np.ndarray) -> np.ndarray:
    X = np.asarray(snapshots, dtype=complex)
    return X @ X.conj().T / X.shape[1]


def music_spectrum(snapshots, num_sources: int, angle_grid, array: ArrayGeometry | None = None, rank_tol=1e-10) -> np.ndarray:
    """MUSIC pseudo-spectrum over ``angle_grid`` (linear units).

    ``snapshots`` is elements x time. Raises ``DegenerateSubspaceError`` when
    the covariance rank is below ``num_sources``.
    """
    X = np.asarray(snapshots, dtype=complex)
    m, t = X.shape
    if array is None:
        array = ArrayGeometry(m)
    if array.num_elements != m:
        raise ValueError("snapshot rows must match the array size")
    if not 0 < num_sources < m:
        raise ValueError("need 0 < num_sources < number of elements")
    if t < num_sources:
        raise ValueError("need at least as many snapshots as sources")
    evals, evecs = jacobi_eigh(spatial_covariance(X))
    rank = int(np.sum(evals > rank_tol * max(evals[-1], 1e-300)))
    if rank < num_sources:
        raise DegenerateSubspaceError(f"covariance rank {rank} is below num_sources={num_sources}")
    En = evecs[:, : m - num_sources]
    A = steering_vector(array, np.asarray(angle_grid, dtype=float))  # (G, m)
    proj = A.conj() @ En  # (G, m-K)
    denom = np.sum(np.abs(proj) ** 2, axis=1)
    return 1.0 / np.maximum(denom, np.finfo(float).eps * 1e-6)


def music_db(spectrum) -> np.ndarray:
    s = np.asarray(spectrum, dtype=float)
    return 10 * np.log10(s / s.max())


def tag_snapshots(scenario: Scenario, aod_deg: float, packets: int = 2, stream: int = 2) -> np.ndarray:
    """Rx element snapshots (elements x packets*subcarriers) with the Tx beam on ``aod_deg``."""
    w = beamforming_weights(scenario.tx, aod_deg)
    clean = scenario.clean(w)
    cols = [scenario.packet(w, k, stream=stream, clean=clean).T for k in range(packets)]
    return np.concatenate(cols, axis=1)


def estimate_aoa(
    scenario: Scenario,
    aod_deg: float,
    reference: Scenario | None = None,
    predicted_deg: float | None = None,
    num_sources: int = 2,
    grid_step_deg: float = 0.5,
    packets: int = 2,
    min_rel_db: float = 15.0,
    min_excess_db: float = 6.0,
    return_spectra: bool = False,
):
    """Tag angle at the Rx array.

    With a tag-free ``reference`` scene, the strongest MUSIC peak that is
    absent from the reference spectrum is the tag: it must lie within
    ``min_rel_db`` of the spectrum maximum and at least ``min_excess_db``
    above the reference spectrum at the same angle (both normalised to their
    own maxima). Otherwise the peak nearest ``predicted_deg`` is used.
    """
    grid = scan_angles(grid_step_deg)
    spec = music_db(music_spectrum(tag_snapshots(scenario, aod_deg, packets), num_sources, grid, scenario.rx))
    peaks = sorted(find_peaks(spec), key=lambda i: -spec[i])
    ref_spec = None
    if reference is not None:
        ref_spec = music_db(music_spectrum(tag_snapshots(reference, aod_deg, packets), num_sources, grid, reference.rx))
        cands = [i for i in peaks if spec[i] >= -min_rel_db and spec[i] - ref_spec[i] >= min_excess_db]
        if not cands:
            raise TagNotResolved("no MUSIC peak distinguishes the tag from the background")
        best = cands[0]
    elif predicted_deg is not None:
        if not peaks:
            raise TagNotResolved("MUSIC spectrum has no peaks")
        best = min(peaks, key=lambda i: abs(grid[i] - predicted_deg))
    else:
        raise ValueError("need a tag-free reference scene or a predicted angle")
    aoa = float(grid[best])
    if return_spectra:
        return aoa, grid, spec, ref_spec
    return aoa


@dataclass
class AlignmentReport:
    result: AlignmentResult
    profile: SpatialProfile
    profile_without: SpatialProfile | None
    music_grid: np.ndarray
    music_with_db: np.ndarray
    music_without_db: np.ndarray | None


def align(
    scenario: Scenario,
    reference: Scenario | None = None,
    scan_step_deg: float = 1.0,
    packets_per_angle: int = 1,
    differential: bool | None = None,
) -> AlignmentReport:
    """Full passive alignment: scan for AoD, then MUSIC for AoA.

    ``differential`` defaults to True whenever a tag-free reference is given.
    """
    if differential is None:
        differential = reference is not None
    prof = beam_scan_profile(scenario, scan_step_deg, packets_per_angle)
    prof_ref = beam_scan_profile(reference, scan_step_deg, packets_per_angle) if reference is not None else None
    aod = estimate_aod(prof, prof_ref if differential else None)
    predicted = None
    if reference is None and scenario.tag_path is not None:
        predicted = scenario.tag_path.aoa_deg
    aoa, grid, spec, ref_spec = estimate_aoa(scenario, aod, reference, predicted_deg=predicted, return_spectra=True)
    res = AlignmentResult(aod, aoa, aod_confidence_db(prof, aod))
    return AlignmentReport(res, prof, prof_ref, grid, spec, ref_spec)
