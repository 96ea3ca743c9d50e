"""Acceptance criteria 1-13, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (shown even under
output capture) before asserting, so ``pytest tests/test_acceptance.py``
doubles as the acceptance report.
"""
import json
import math
import time

import numpy as np
import pytest

from soiltag.beam_align import beam_scan_profile, estimate_aod, music_spectrum, scan_angles
from soiltag.channel import ArrayGeometry, PathKind, SceneConfig, clean_csi, complex_noise, make_scenario, steering_vector
from soiltag.cli import main
from soiltag.estimator import dtw_distance
from soiltag.pipeline import DatasetPlan, build_dataset, level_scenarios, run_e2e, sweep
from soiltag.resonator import (
    CircuitParams,
    DgsGeometry,
    SearchSpace,
    fc_table,
    frequency_response,
    lump_from_geometry,
    resonant_frequency,
)
from soiltag.soil import topp_permittivity

TUNED = DgsGeometry(w=0.1, a=10.0)


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {name}: {detail}")
        assert ok, detail

    return emit


def test_c01_topp_oracle(report):
    t0 = time.perf_counter()
    theta = np.linspace(0.0, 1.0, 101)
    got = topp_permittivity(theta)
    ref = np.array([3.03 + 9.3 * t + 146.0 * t * t - 76.6 * t * t * t for t in theta.tolist()])
    rel = float(np.max(np.abs(got - ref) / np.abs(ref)))
    mono = bool(np.all(np.diff(got) > 0))
    dt = time.perf_counter() - t0
    report(1, "Topp oracle", rel <= 1e-12 and mono and dt < 1.0, f"max rel err {rel:.1e}, monotone={mono}, {dt:.3f} s")


def test_c02_resonance_consistency(report):
    t0 = time.perf_counter()
    r = np.random.default_rng(2)
    step = 0.1e6
    worst = 0.0
    for _ in range(200):
        p = CircuitParams(
            z_line=50.0,
            z_source=50.0,
            c1=r.uniform(0.1e-12, 1.0e-12),
            cc=r.uniform(0.05e-12, 1.0e-12),
            lc=r.uniform(2e-9, 15e-9),
            r_loss=r.uniform(0.0, 0.5),
        )
        fc = resonant_frequency(p)
        grid = np.round(fc / step) * step + step * np.arange(-500, 501)
        worst = max(worst, abs(frequency_response(p, grid).notch_hz - fc))
    dt = time.perf_counter() - t0
    report(2, "resonance consistency", worst <= step and dt < 10, f"worst |argmin - f_c| {worst / 1e3:.1f} kHz, {dt:.2f} s")


def test_c03_low_frequency_asymptote(report):
    p = lump_from_geometry(TUNED, topp_permittivity(0.0))
    g = float(frequency_response(p, np.array([10e6])).gain_db[0])
    target = 20 * math.log10(50 / 150)
    report(3, "low-frequency asymptote", abs(g - target) <= 0.1, f"gain {g:.4f} dB vs {target:.4f} dB")


def test_c04_design_feasibility(report, tmp_path):
    code = main(["--out-dir", str(tmp_path), "design"])
    rep = json.loads((tmp_path / "design_report.json").read_text())
    fc = rep["fc_per_level_hz"]
    ok = code == 0 and 2.5e9 <= fc[0] <= 2.6e9 and len(fc) == 5 and all(a > b for a, b in zip(fc, fc[1:]))
    report(
        4,
        "design feasibility",
        ok,
        f"w={rep['geometry']['w_mm']} a={rep['geometry']['a_mm']} mm, f_c GHz "
        + " ".join(f"{f / 1e9:.4f}" for f in fc),
    )


def test_c05_monotonicity_triple(report):
    t0 = time.perf_counter()
    s = SearchSpace()
    thetas = np.linspace(0.0, 0.5, 51)
    fc = fc_table(thetas, s.w_mm, s.a_mm)  # (eps, w, a)
    in_w = bool(np.all(np.diff(fc, axis=1) > 0))
    in_a = bool(np.all(np.diff(fc, axis=2) < 0))
    in_eps = bool(np.all(np.diff(fc, axis=0) < 0))
    dt = time.perf_counter() - t0
    report(
        5,
        "monotonicity triple",
        in_w and in_a and in_eps and dt < 5,
        f"up in w={in_w}, down in a={in_a}, down in eps={in_eps} over {fc.size} points, {dt:.2f} s",
    )


def test_c06_music_exactness(report):
    arr = ArrayGeometry(4)
    grid = scan_angles(0.5)
    r = np.random.default_rng(6)
    s = (r.standard_normal(20) + 1j * r.standard_normal(20)) / math.sqrt(2)
    X = np.outer(steering_vector(arr, 60.0), s)
    exact = grid[np.argmax(music_spectrum(X, 1, grid, arr))] == 60.0
    hits = 0
    for k in range(100):
        rk = np.random.default_rng([6, k])
        ang = float(rk.integers(20, 161))
        sig = (rk.standard_normal(100) + 1j * rk.standard_normal(100)) / math.sqrt(2)
        Xk = np.outer(steering_vector(arr, ang), sig)
        Xk = Xk + complex_noise(rk, Xk.shape, 0.01)
        hits += abs(grid[np.argmax(music_spectrum(Xk, 1, grid, arr))] - ang) <= 2.0
    report(6, "MUSIC exactness", exact and hits >= 95, f"noiseless exact={exact}, SNR 20 dB hits {hits}/100")


def test_c07_aod_second_peak(report):
    hits = 0
    for trial in range(100):
        live, _ = level_scenarios(SceneConfig(seed=trial, snr_db=20.0), TUNED, 20.0, 0)
        try:
            hits += abs(estimate_aod(beam_scan_profile(live, 1.0)) - 102.0) <= 2.0
        except Exception:
            pass
    report(7, "AoD second peak", hits >= 95, f"{hits}/100 within 2 deg of 102 deg")


def test_c08_array_gain(report):
    paths = [p for p in make_scenario(SceneConfig()) if p.kind == PathKind.TAG]
    tx, rx = ArrayGeometry(8), ArrayGeometry(4)
    f = np.array([2.44e9])
    flat = frequency_response(lump_from_geometry(TUNED, 3.03), np.array([2.3e9, 2.6e9]))
    single = clean_csi(paths, flat, np.eye(8)[0], tx, rx, f)
    aligned = clean_csi(paths, flat, steering_vector(tx, paths[0].aod_deg), tx, rx, f)
    gain = 10 * math.log10(np.sum(np.abs(aligned) ** 2) / np.sum(np.abs(single) ** 2))
    err = abs(gain - 10 * math.log10(64))
    report(8, "array gain", err <= 1e-6, f"{gain:.9f} dB (error {err:.1e} dB)")


def test_c09_filter_gain_trend(report):
    plan = DatasetPlan(levels_pct=(0.0, 5.0, 10.0, 15.0, 20.0), packets=100, snr_db=20.0, geometry={"w": 0.1, "a": 10.0})
    data, stats = build_dataset(plan, seed=0)
    means = [float(m.mean()) for _, m in data.level_means()]
    ok = stats.skipped == 0 and all(b > a for a, b in zip(means, means[1:]))
    report(9, "filter-gain trend", ok, "mean gain dB per level " + " ".join(f"{m:.2f}" for m in means))


def test_c10_distance_invariance(report):
    base = dict(levels_pct=(0.0, 10.0, 20.0), packets=1, snr_db=None, environments=("office",), aligned=False)
    a, _ = build_dataset(DatasetPlan(**base), seed=10)
    b, _ = build_dataset(DatasetPlan(**base, scene={"gain_scale": 3.7}), seed=10)
    worst = float(np.max(np.abs(a.X - b.X)))
    report(10, "distance invariance", worst <= 1e-9, f"max feature change {worst:.1e} dB")


def test_c11_end_to_end(report):
    t0 = time.perf_counter()
    p90 = run_e2e(DatasetPlan()).report.p90
    curve = [res.report.p90 for _, res in sweep(DatasetPlan(), [0, 10, 20, 30])]
    dt = time.perf_counter() - t0
    nonincreasing = all(b <= a for a, b in zip(curve, curve[1:]))
    report(
        11,
        "end-to-end regression",
        p90 <= 2.0 and nonincreasing and dt < 300,
        f"p90 {p90:.3f} at 25 dB; sweep p90 " + " ".join(f"{c:.3f}" for c in curve) + f"; {dt:.0f} s",
    )


def _textbook_dtw(x, y):
    n, m = len(x), len(y)
    inf = float("inf")
    D = [[inf] * (m + 1) for _ in range(n + 1)]
    D[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i][j] = abs(x[i - 1] - y[j - 1]) + min(D[i - 1][j - 1], D[i - 1][j], D[i][j - 1])
    return D[n][m]


def test_c12_dtw_oracle(report):
    r = np.random.default_rng(12)
    mismatches = 0
    for _ in range(100):
        x = r.normal(size=r.integers(1, 13)).tolist()
        y = r.normal(size=r.integers(1, 13)).tolist()
        mismatches += dtw_distance(x, y) != _textbook_dtw(x, y)
    report(12, "DTW oracle", mismatches == 0, f"{100 - mismatches}/100 exact matches")


def test_c13_determinism(report, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"levels_pct": [0, 10, 20], "packets": 8}))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"plan": {"levels_pct": [0, 10, 20], "packets": 8}, "forest": {"n_trees": 20}}))
    src = tmp_path / "src"
    assert main(["--out-dir", str(src), "--seed", "3", "simulate", "--packets", "3"]) == 0
    assert main(["--out-dir", str(src), "--seed", "3", "dataset", "--plan", str(plan)]) == 0
    assert main(["--out-dir", str(src), "--seed", "3", "train", "--dataset", str(src / "dataset.csv")]) == 0
    live, ref, ds, model = (str(src / n) for n in ("csi_live.csv", "csi_reference.csv", "dataset.csv", "model.json"))
    commands = {
        "design": ["design"],
        "simulate": ["simulate", "--packets", "3"],
        "align": ["align"],
        "features": ["features", "--live", live, "--reference", ref, "--label", "20"],
        "dataset": ["dataset", "--plan", str(plan)],
        "train": ["train", "--dataset", ds],
        "eval": ["eval", "--model", model, "--dataset", ds],
        "predict": ["predict", "--model", model, "--features", ds],
        "e2e": ["e2e", "--config", str(cfg)],
        "sweep": ["sweep", "--config", str(cfg), "--snr", "10", "30"],
    }
    differing = []
    for name, argv in commands.items():
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / name / rep
            assert main(["--out-dir", str(d), "--seed", "3", *argv]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        if outs[0] != outs[1] or not outs[0]:
            differing.append(name)
    report(13, "determinism", not differing, f"{len(commands) - len(differing)}/{len(commands)} commands byte-identical")
