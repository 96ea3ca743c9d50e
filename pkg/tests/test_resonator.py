import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from soiltag.resonator import (
    ANCHOR_FC_HZ,
    GAIN_FLOOR_DB,
    CircuitParams,
    DgsGeometry,
    InfeasibleBandError,
    SearchSpace,
    fc_table,
    frequency_response,
    impedance,
    lump_from_geometry,
    low_frequency_gain_db,
    resonant_frequency,
    tag_response,
    tune_geometry,
)
from soiltag.soil import DomainError, topp_permittivity

LEVELS = [0.0, 0.05, 0.10, 0.15, 0.20]


def _params(lc=1e-9, c1=1e-12, cc=3e-12, r=0.2):
    return CircuitParams(z_line=50.0, z_source=50.0, c1=c1, cc=cc, lc=lc, r_loss=r)


def test_resonance_hand_value():
    assert resonant_frequency(_params()) == pytest.approx(2.5165e9, rel=1e-4)


def test_quadrupled_capacitance_halves_fc():
    f = resonant_frequency(_params())
    assert resonant_frequency(_params(c1=4e-12, cc=12e-12)) == pytest.approx(f / 2)


def test_low_frequency_asymptote():
    assert low_frequency_gain_db(_params()) == pytest.approx(20 * math.log10(50 / 150))
    g = frequency_response(_params(), np.array([10e6])).gain_db[0]
    assert g == pytest.approx(-9.542, abs=0.1)


def test_lossless_notch_hits_floor():
    p = _params(r=0.0)
    fc = resonant_frequency(p)
    assert frequency_response(p, np.array([fc - 1e6, fc, fc + 1e6])).gain_db[1] == GAIN_FLOOR_DB


def test_impedance_rejects_nonpositive_frequency():
    with pytest.raises(DomainError):
        impedance(_params(), 0.0)


def test_anchor_design_on_dry_soil():
    g = DgsGeometry(w=0.1, a=10.0)
    fr = tag_response(g, 0.0, np.arange(2.3e9, 2.8e9, 0.1e6))
    assert 2.5e9 <= fr.notch_hz <= 2.6e9
    assert resonant_frequency(lump_from_geometry(g, topp_permittivity(0.0))) == pytest.approx(ANCHOR_FC_HZ)


def test_response_interpolation_refuses_extrapolation():
    fr = frequency_response(_params(), np.linspace(2.0e9, 3.0e9, 11))
    assert fr.at(2.05e9) == pytest.approx(np.interp(2.05e9, fr.freqs, fr.gain_db))
    with pytest.raises(ValueError):
        fr.at(3.1e9)


@given(
    st.floats(0.5e-9, 5e-9),
    st.floats(0.1e-12, 2e-12),
    st.floats(0.05e-12, 3e-12),
    st.floats(0.0, 0.5),
)
def test_notch_sits_at_resonance(lc, c1, cc, r):
    p = _params(lc, c1, cc, r)
    fc = resonant_frequency(p)
    grid = np.round(fc / 0.1e6) * 0.1e6 + 0.1e6 * np.arange(-200, 201)
    assert abs(frequency_response(p, grid).notch_hz - fc) <= 0.1e6


@given(st.floats(0.1, 2.0), st.floats(4.0, 14.0), st.floats(1.0, 40.0), st.floats(1.01, 1.5))
def test_geometry_trends(w, a, eps, k):
    fc = lambda ww, aa, ee: resonant_frequency(lump_from_geometry(DgsGeometry(ww, aa), ee))
    base = fc(w, a, eps)
    assert fc(w * k, a, eps) > base
    assert fc(w, a * k, eps) < base
    assert fc(w, a, eps * k) < base


def test_tune_default_design():
    r = tune_geometry(LEVELS, (2.5e9, 2.6e9))
    assert (r.geometry.w, r.geometry.a) == (0.1, 10.0)
    assert 2.5e9 <= r.fc_per_level_hz[0] <= 2.6e9
    assert all(d > 0 for d in r.delta_f_hz)
    assert r.n_candidates == 38


def test_tune_high_moisture_tag():
    # brute-force oracle over the same grid
    levels = [0.23, 0.25, 0.27, 0.29]
    r = tune_geometry(levels, (2.5e9, 2.6e9))
    s = SearchSpace()
    fc = fc_table(levels, s.w_mm, s.a_mm)
    best = max(
        (np.min(-np.diff(fc[:, i, j])), -s.a_mm[j], -s.w_mm[i])
        for i in range(len(s.w_mm))
        for j in range(len(s.a_mm))
        if 2.5e9 <= fc[0, i, j] <= 2.6e9
    )
    assert r.min_delta_f_hz == pytest.approx(best[0])
    assert (r.geometry.a, r.geometry.w) == (-best[1], -best[2])


def test_single_candidate_space():
    s = SearchSpace((0.1,), (10.0,))
    assert tune_geometry(LEVELS, (2.5e9, 2.6e9), s).n_candidates == 1
    with pytest.raises(InfeasibleBandError) as ei:
        tune_geometry(LEVELS, (2.7e9, 2.8e9), s)
    assert ei.value.nearest_fc == pytest.approx(ANCHOR_FC_HZ)


@pytest.mark.parametrize(
    "levels, band",
    [([0.1], (2.5e9, 2.6e9)), ([0.1, 0.05], (2.5e9, 2.6e9)), (LEVELS, (2.3e9, 2.6e9)), (LEVELS, (2.6e9, 2.5e9))],
)
def test_tune_rejects_bad_input(levels, band):
    with pytest.raises(ValueError):
        tune_geometry(levels, band)


def test_tuned_output_satisfies_band():
    for band in [(2.5e9, 2.6e9), (2.45e9, 2.55e9), (2.6e9, 2.9e9)]:
        r = tune_geometry(LEVELS, band)
        fc0 = resonant_frequency(lump_from_geometry(r.geometry, topp_permittivity(0.0)))
        assert band[0] <= fc0 <= band[1]
