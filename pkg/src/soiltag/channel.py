"""Plan-view multipath scene and per-subcarrier CSI synthesis for 2.4 GHz Wi-Fi.

Arrays are uniform linear arrays; angles are measured from the array axis
(0 deg endfire, 90 deg broadside). The tag path is the only one shaped by
the resonator response, applied as a real amplitude filter in dB.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .resonator import FrequencyResponse

C0 = 299_792_458.0
REF_FREQ = 2.44e9
N_CHANNELS = 13
N_SUBCARRIERS = 64
SUBCARRIER_SPACING = 312.5e3
CLUTTER_MEAN_DB = -10.0  # average clutter power relative to LoS
CLUTTER_EXCESS_DELAY = 200e-9


class GeometryError(ValueError):
    pass


class PathKind(str, enum.Enum):
    LOS = "los"
    TAG = "tag"
    CLUTTER = "clutter"


@dataclass(frozen=True)
class ArrayGeometry:
    num_elements: int
    spacing: float = 0.5  # wavelengths at REF_FREQ

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("array needs at least one element")
        if not self.spacing > 0:
            raise ValueError("element spacing must be positive")


@dataclass(frozen=True)
class Path:
    kind: PathKind
    aod_deg: float
    aoa_deg: float
    gain: complex
    delay_s: float

    def __post_init__(self):
        for a in (self.aod_deg, self.aoa_deg):
            if not 0.0 <= a <= 180.0:
                raise GeometryError(f"path angle {a} outside [0, 180]")
        if abs(self.gain) == 0:
            raise ValueError("path gain must be non-zero")

    def scaled(self, factor) -> "Path":
        return replace(self, gain=self.gain * factor)


@dataclass(frozen=True)
class CsiProfile:
    channel_index: int
    subcarrier_freqs: np.ndarray
    h: np.ndarray  # (subcarriers, rx elements)

    def __post_init__(self):
        if not 1 <= self.channel_index <= N_CHANNELS:
            raise ValueError(f"channel index {self.channel_index} outside 1..{N_CHANNELS}")
        if np.any(np.diff(self.subcarrier_freqs) <= 0):
            raise ValueError("subcarrier grid must be strictly increasing")
        if self.h.shape[0] != self.subcarrier_freqs.size:
            raise ValueError("CSI rows must match the subcarrier grid")


def channel_center(channel_index: int) -> float:
    if not 1 <= channel_index <= N_CHANNELS:
        raise ValueError(f"channel index {channel_index} outside 1..{N_CHANNELS}")
    return 2412e6 + 5e6 * (channel_index - 1)


def subcarrier_freqs(channel_index: int) -> np.ndarray:
    k = np.arange(N_SUBCARRIERS) - N_SUBCARRIERS // 2
    return channel_center(channel_index) + k * SUBCARRIER_SPACING


def band_edges() -> tuple[float, float]:
    return float(subcarrier_freqs(1)[0]), float(subcarrier_freqs(N_CHANNELS)[-1])


def steering_vector(array: ArrayGeometry, angle_deg, freq=REF_FREQ) -> np.ndarray:
    """ULA response; broadcasts over angles and frequencies, elements on the last axis."""
    ang = np.asarray(angle_deg, dtype=float)
    if np.any(ang < 0) or np.any(ang > 180):
        raise GeometryError("steering angle outside [0, 180]")
    f = np.asarray(freq, dtype=float)
    n = np.arange(array.num_elements)
    phase = array.spacing * (f / REF_FREQ)[..., None] * np.cos(np.deg2rad(ang))[..., None]
    if phase.ndim == 1:
        phase = phase[None, :]
    out = np.exp(-2j * np.pi * phase * n)
    return out[0] if np.ndim(ang) == 0 and np.ndim(f) == 0 else out


def _path_gains(paths, tag_fr, freqs):
    """(paths, freqs) complex path coefficients including delay rotation."""
    g = np.empty((len(paths), freqs.size), dtype=complex)
    for i, p in enumerate(paths):
        amp = np.full(freqs.size, p.gain, dtype=complex)
        if p.kind == PathKind.TAG:
            if tag_fr is None:
                raise ValueError("tag path present but no tag response given")
            amp = amp * 10 ** (tag_fr.at(freqs) / 20)
        g[i] = amp * np.exp(-2j * np.pi * freqs * p.delay_s)
    return g


def clean_csi(paths, tag_fr, tx_weights, tx: ArrayGeometry, rx: ArrayGeometry, freqs) -> np.ndarray:
    """Noise-free CSI on an arbitrary frequency grid; shape (freqs, rx elements)."""
    freqs = np.asarray(freqs, dtype=float)
    w = np.asarray(tx_weights, dtype=complex)
    if w.shape != (tx.num_elements,):
        raise ValueError(f"tx_weights must have length {tx.num_elements}")
    h = np.zeros((freqs.size, rx.num_elements), dtype=complex)
    if not paths:
        return h
    g = _path_gains(paths, tag_fr, freqs)
    for i, p in enumerate(paths):
        a_tx = steering_vector(tx, p.aod_deg, freqs)  # (F, Ntx)
        a_rx = steering_vector(rx, p.aoa_deg, freqs)  # (F, Nrx)
        tx_gain = a_tx.conj() @ w
        h += a_rx * (g[i] * tx_gain)[:, None]
    return h


def complex_noise(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    if power <= 0:
        return np.zeros(shape, dtype=complex)
    scale = math.sqrt(power / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_csi(
    paths,
    tag_fr: FrequencyResponse | None,
    tx_weights,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    channel_index: int,
    noise_power: float = 0.0,
    rng_seed=0,
) -> CsiProfile:
    freqs = subcarrier_freqs(channel_index)
    h = clean_csi(paths, tag_fr, tx_weights, tx, rx, freqs)
    h = h + complex_noise(np.random.default_rng(rng_seed), h.shape, noise_power)
    return CsiProfile(channel_index, freqs, h)


# --- scene geometry ---------------------------------------------------------

ENVIRONMENTS = {
    # name: (clutter paths, extra noise dB)
    "empty": (0, 0.0),
    "corridor": (3, 0.0),
    "lab": (4, 0.0),
    "office": (6, 0.0),
    "garden": (2, 0.0),
    "motion": (6, 6.0),
}


def _default_layout():
    # Tx at the origin along +x, Rx 4 m away at 40 deg, tag 3 m out at 102 deg;
    # the Rx axis is turned so the tag arrives at 60 deg.
    rx = (4 * math.cos(math.radians(40)), 4 * math.sin(math.radians(40)))
    tag = (3 * math.cos(math.radians(102)), 3 * math.sin(math.radians(102)))
    to_tag = math.degrees(math.atan2(tag[1] - rx[1], tag[0] - rx[0]))
    return rx, tag, to_tag - 60.0


_RX, _TAG, _RX_AXIS = _default_layout()


@dataclass
class SceneConfig:
    tx_pos: tuple = (0.0, 0.0)
    rx_pos: tuple = _RX
    tag_pos: tuple | None = _TAG
    tx_elements: int = 8
    rx_elements: int = 4
    tx_axis_deg: float = 0.0
    rx_axis_deg: float = _RX_AXIS
    environment: str = "empty"
    clutter: int | None = None  # overrides the preset count
    snr_db: float = 20.0
    seed: int = 0
    tag_gain_dbi: float = 16.8
    gain_scale: float = 1.0  # common factor on every path amplitude

    def __post_init__(self):
        if self.environment not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.environment!r}; choose from {sorted(ENVIRONMENTS)}")
        self.tx_pos = tuple(float(x) for x in self.tx_pos)
        self.rx_pos = tuple(float(x) for x in self.rx_pos)
        if self.tag_pos is not None:
            self.tag_pos = tuple(float(x) for x in self.tag_pos)

    @property
    def clutter_count(self) -> int:
        return ENVIRONMENTS[self.environment][0] if self.clutter is None else int(self.clutter)

    @property
    def tx_array(self) -> ArrayGeometry:
        return ArrayGeometry(self.tx_elements)

    @property
    def rx_array(self) -> ArrayGeometry:
        return ArrayGeometry(self.rx_elements)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["tx_pos"], d["rx_pos"] = list(self.tx_pos), list(self.rx_pos)
        d["tag_pos"] = None if self.tag_pos is None else list(self.tag_pos)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown scene keys: {sorted(extra)}")
        return cls(**d)


def _angle_from_axis(axis_deg, origin, target) -> float:
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    d = math.hypot(dx, dy)
    if d == 0:
        raise GeometryError(f"coincident positions at {origin}")
    ax = math.radians(axis_deg)
    c = (dx * math.cos(ax) + dy * math.sin(ax)) / d
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def _dist(p, q) -> float:
    d = math.hypot(p[0] - q[0], p[1] - q[1])
    if d == 0:
        raise GeometryError(f"coincident positions at {p}")
    return d


def los_amplitude(distance_m: float) -> float:
    return C0 / REF_FREQ / (4 * math.pi * distance_m)


def tag_amplitude(d_tx: float, d_rx: float, gain_dbi: float) -> float:
    # re-radiating tag: antenna gain with a 1/(d_tx*d_rx) spread, 1 m reference
    return 10 ** (gain_dbi / 20) * C0 / REF_FREQ / (4 * math.pi) / (d_tx * d_rx)


def make_scenario(cfg: SceneConfig) -> list[Path]:
    """Propagation paths for a scene, clutter drawn from ``cfg.seed``."""
    d_los = _dist(cfg.tx_pos, cfg.rx_pos)
    paths = [
        Path(
            PathKind.LOS,
            _angle_from_axis(cfg.tx_axis_deg, cfg.tx_pos, cfg.rx_pos),
            _angle_from_axis(cfg.rx_axis_deg, cfg.rx_pos, cfg.tx_pos),
            complex(los_amplitude(d_los) * cfg.gain_scale),
            d_los / C0,
        )
    ]
    if cfg.tag_pos is not None:
        d1, d2 = _dist(cfg.tx_pos, cfg.tag_pos), _dist(cfg.tag_pos, cfg.rx_pos)
        paths.append(
            Path(
                PathKind.TAG,
                _angle_from_axis(cfg.tx_axis_deg, cfg.tx_pos, cfg.tag_pos),
                _angle_from_axis(cfg.rx_axis_deg, cfg.rx_pos, cfg.tag_pos),
                complex(tag_amplitude(d1, d2, cfg.tag_gain_dbi) * cfg.gain_scale),
                (d1 + d2) / C0,
            )
        )
    rng = np.random.default_rng([cfg.seed, 0xC1])
    los_pow = abs(paths[0].gain) ** 2
    for _ in range(cfg.clutter_count):
        g = complex_noise(rng, (), los_pow * 10 ** (CLUTTER_MEAN_DB / 10))
        aod, aoa = rng.uniform(0, 180, size=2)
        delay = d_los / C0 + rng.uniform(0, CLUTTER_EXCESS_DELAY)
        paths.append(Path(PathKind.CLUTTER, float(aod), float(aoa), complex(g), float(delay)))
    return paths


def noise_power_for(paths, snr_db: float, extra_db: float = 0.0) -> float:
    """Per-subcarrier noise power so the LoS path sits ``snr_db`` above it."""
    los = [p for p in paths if p.kind == PathKind.LOS]
    if not los:
        raise ValueError("SNR is referenced to the LoS path, none present")
    return abs(los[0].gain) ** 2 / 10 ** ((snr_db - extra_db) / 10)


@dataclass
class Scenario:
    """Paths plus everything needed to synthesize packets from them."""

    paths: list
    tx: ArrayGeometry
    rx: ArrayGeometry
    noise_power: float
    tag_fr: FrequencyResponse | None = None
    seed: int = 0
    channels: tuple = field(default_factory=lambda: tuple(range(1, N_CHANNELS + 1)))
    noise_key: tuple = ()  # extra entropy so captures sharing clutter get fresh noise

    @classmethod
    def from_config(cls, cfg: SceneConfig, tag_fr=None, channels=None) -> "Scenario":
        paths = make_scenario(cfg)
        extra = ENVIRONMENTS[cfg.environment][1]
        sc = cls(paths, cfg.tx_array, cfg.rx_array, noise_power_for(paths, cfg.snr_db, extra), tag_fr, cfg.seed)
        if channels is not None:
            sc.channels = tuple(channels)
        return sc

    @property
    def has_tag(self) -> bool:
        return any(p.kind == PathKind.TAG for p in self.paths)

    @property
    def tag_path(self) -> Path | None:
        return next((p for p in self.paths if p.kind == PathKind.TAG), None)

    def without_tag(self) -> "Scenario":
        return replace(self, paths=[p for p in self.paths if p.kind != PathKind.TAG])

    def with_noise(self, noise_power: float) -> "Scenario":
        return replace(self, noise_power=noise_power)

    def freqs(self) -> np.ndarray:
        return np.concatenate([subcarrier_freqs(c) for c in self.channels])

    def clean(self, tx_weights) -> np.ndarray:
        """Noise-free CSI over all scenario channels; shape (channels*64, rx)."""
        return clean_csi(self.paths, self.tag_fr, tx_weights, self.tx, self.rx, self.freqs())

    def tx_responses(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-path Rx-side response and Tx steering, for fast weight sweeps.

        Returns ``(rx_part, a_tx)`` with shapes (paths, F, Nrx) and (paths, F, Ntx)
        so that CSI for weights w is ``einsum('pfr,pft,t->fr', rx_part, a_tx.conj(), w)``.
        """
        freqs = self.freqs()
        g = _path_gains(self.paths, self.tag_fr, freqs)
        rx_part = np.stack([steering_vector(self.rx, p.aoa_deg, freqs) * g[i][:, None] for i, p in enumerate(self.paths)])
        a_tx = np.stack([steering_vector(self.tx, p.aod_deg, freqs) for p in self.paths])
        return rx_part, a_tx

    def rng(self, *key) -> np.random.Generator:
        return np.random.default_rng([self.seed, *self.noise_key, *key])

    def packet(self, tx_weights, packet_index: int, stream: int = 0, clean=None) -> np.ndarray:
        """One noisy capture over all channels, seeded by (seed, noise_key, stream, packet)."""
        h = self.clean(tx_weights) if clean is None else clean
        return h + complex_noise(self.rng(stream, packet_index), h.shape, self.noise_power)

    def profiles(self, h: np.ndarray) -> list[CsiProfile]:
        out = []
        for i, c in enumerate(self.channels):
            sl = slice(i * N_SUBCARRIERS, (i + 1) * N_SUBCARRIERS)
            out.append(CsiProfile(c, subcarrier_freqs(c), h[sl]))
        return out
