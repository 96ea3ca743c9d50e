"""Tune the two tags (0-20 % and 23-29 %) and show their per-level resonances."""
from soiltag.resonator import tune_geometry

BAND = (2.5e9, 2.6e9)
for name, levels in (("0-20%", [0.0, 0.05, 0.10, 0.15, 0.20]), ("23-29%", [0.23, 0.25, 0.27, 0.29])):
    r = tune_geometry(levels, BAND)
    print(f"{name}: w={r.geometry.w} mm a={r.geometry.a} mm ({r.n_candidates} feasible)")
    print("  f_c GHz :", " ".join(f"{f / 1e9:.4f}" for f in r.fc_per_level_hz))
    print("  df  MHz :", " ".join(f"{d / 1e6:.1f}" for d in r.delta_f_hz))
