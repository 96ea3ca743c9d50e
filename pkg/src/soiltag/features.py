"""Stitched filter-gain features from per-channel CSI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import N_SUBCARRIERS, CsiProfile
from .soil import DomainError

FILTER_GAIN_FLOOR_DB = -80.0
DEFAULT_SUBCARRIERS = 8


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    freqs: np.ndarray
    gain_db: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        g = np.asarray(self.gain_db, dtype=float)
        if f.shape != g.shape or f.ndim != 1:
            raise ShapeError("freqs and gains must be matching 1-D arrays")
        if np.any(np.diff(f) <= 0):
            raise ShapeError("feature frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "gain_db", g)

    def __len__(self):
        return self.freqs.size


def filter_gain(a, a_ref):
    """20*log10(a / a_ref) in dB; zero live amplitude clips to the floor."""
    a = np.asarray(a, dtype=float)
    a_ref = np.asarray(a_ref, dtype=float)
    if np.any(a_ref <= 0):
        raise DomainError("reference amplitude must be positive")
    if np.any(a < 0):
        raise DomainError("amplitude must be non-negative")
    with np.errstate(divide="ignore"):
        g = 20 * np.log10(a / a_ref)
    g = np.maximum(g, FILTER_GAIN_FLOOR_DB)
    return float(g) if g.ndim == 0 else g


def center_block(k: int, n: int = N_SUBCARRIERS) -> slice:
    if not 1 <= k <= n:
        raise ValueError(f"subcarriers per channel must be in 1..{n}")
    start = (n - k) // 2
    return slice(start, start + k)


def combine(h: np.ndarray, rx_weights=None) -> np.ndarray:
    """Single stream from per-element CSI: w^H h per subcarrier."""
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        return h
    m = h.shape[1]
    w = np.full(m, 1 / np.sqrt(m), dtype=complex) if rx_weights is None else np.asarray(rx_weights, dtype=complex)
    if w.shape != (m,):
        raise ShapeError(f"rx_weights must have length {m}")
    return h @ w.conj()


def average_profiles(captures) -> list[CsiProfile]:
    """Complex mean over packets, channel by channel.

    ``captures`` is a sequence of packets, each a list of CsiProfiles over the
    same channels.
    """
    captures = list(captures)
    if not captures:
        raise ValueError("need at least one capture")
    first = captures[0]
    out = []
    for i, prof in enumerate(first):
        acc = np.zeros_like(prof.h)
        for cap in captures:
            if cap[i].channel_index != prof.channel_index:
                raise ShapeError("captures cover different channel sets")
            acc = acc + cap[i].h
        out.append(CsiProfile(prof.channel_index, prof.subcarrier_freqs, acc / len(captures)))
    return out


def stitch_channels(
    per_channel,
    reference,
    subcarriers_per_channel: int = DEFAULT_SUBCARRIERS,
    rx_weights=None,
) -> FeatureVector:
    """Filter gain over centred subcarrier blocks of every channel, frequency ordered.

    Where blocks of adjacent channels overlap, the lower channel's subcarriers
    are kept.
    """
    live = sorted(per_channel, key=lambda p: p.channel_index)
    ref = sorted(reference, key=lambda p: p.channel_index)
    if [p.channel_index for p in live] != [p.channel_index for p in ref]:
        raise ShapeError("live and reference captures cover different channels")
    if len({p.channel_index for p in live}) != len(live):
        raise ShapeError("duplicate channel in capture")
    block = center_block(subcarriers_per_channel)
    freqs, gains = [], []
    last = -np.inf
    for lp, rp in zip(live, ref):
        if not np.array_equal(lp.subcarrier_freqs, rp.subcarrier_freqs):
            raise ShapeError(f"channel {lp.channel_index}: subcarrier grids differ")
        f = lp.subcarrier_freqs[block]
        g = filter_gain(np.abs(combine(lp.h, rx_weights)[block]), np.abs(combine(rp.h, rx_weights)[block]))
        keep = f > last
        freqs.append(f[keep])
        gains.append(np.atleast_1d(g)[keep])
        if keep.any():
            last = f[keep][-1]
    return FeatureVector(np.concatenate(freqs), np.concatenate(gains))


def selected_freqs(channels, subcarriers_per_channel: int = DEFAULT_SUBCARRIERS) -> np.ndarray:
    from .channel import subcarrier_freqs

    block = center_block(subcarriers_per_channel)
    out, last = [], -np.inf
    for c in sorted(channels):
        f = subcarrier_freqs(c)[block]
        f = f[f > last]
        out.append(f)
        if f.size:
            last = f[-1]
    return np.concatenate(out)
