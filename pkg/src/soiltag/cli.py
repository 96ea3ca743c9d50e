"""``soiltag`` command line: design -> simulate -> align -> features -> train -> eval.

Exit codes: 0 success, 1 usage or config error, 2 domain or infeasibility error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .beam_align import DegenerateSubspaceError, TagNotDetected, TagNotResolved, align, beamforming_weights
from .channel import ArrayGeometry, GeometryError, SceneConfig
from .estimator import Dataset, DegenerateDataError, ForestModel, ForestParams, evaluate, train_forest
from .features import DEFAULT_SUBCARRIERS, FeatureVector, average_profiles, stitch_channels
from .pipeline import DatasetPlan, build_dataset, derive_seed, level_scenarios, run_e2e, sweep
from .resonator import DgsGeometry, InfeasibleBandError, SearchSpace, tag_response, tune_geometry
from .soil import DomainError

log = logging.getLogger("soiltag")

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2

DEFAULT_DESIGN = {
    "moisture_levels": [0.0, 0.05, 0.10, 0.15, 0.20],
    "band_hz": [2.5e9, 2.6e9],
    "search_space": {"w_mm": [0.1, 2.0, 0.1], "a_mm": [4.0, 14.0, 0.5]},
}
DEFAULT_TAG_LEVEL_PCT = 20.0
GAIN_CURVE_HZ = (2.2e9, 2.8e9, 1e6)
DEFAULT_SWEEP_SNR = [0.0, 10.0, 20.0, 30.0]

DOMAIN_ERRORS = (
    InfeasibleBandError,
    DomainError,
    DegenerateDataError,
    GeometryError,
    TagNotDetected,
    TagNotResolved,
    DegenerateSubspaceError,
)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(path, default=None) -> dict:
    if path is None:
        return json.loads(json.dumps(default or {}))
    try:
        cfg = sio.read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return cfg


def _out(args, name) -> Path:
    return Path(args.out_dir) / name


# --- design -----------------------------------------------------------------


def cmd_design(args) -> dict:
    spec = _load_config(args.spec, DEFAULT_DESIGN)
    unknown = set(spec) - set(DEFAULT_DESIGN)
    if unknown:
        raise UsageError(f"unknown design keys: {sorted(unknown)}")
    levels = spec.get("moisture_levels", [])
    if not isinstance(levels, list) or len(levels) < 2:
        raise UsageError("moisture_levels needs at least two entries")
    space = spec.get("search_space", DEFAULT_DESIGN["search_space"])
    search = SearchSpace.from_ranges(space["w_mm"], space["a_mm"])
    res = tune_geometry(levels, spec.get("band_hz", DEFAULT_DESIGN["band_hz"]), search)
    report = {
        "geometry": {"w_mm": res.geometry.w, "a_mm": res.geometry.a},
        "delta_f_hz": list(res.delta_f_hz),
        "fc_per_level_hz": list(res.fc_per_level_hz),
        "moisture_levels": [float(x) for x in levels],
        "n_candidates": res.n_candidates,
    }
    sio.write_json(_out(args, "design_report.json"), report)
    lo, hi, step = GAIN_CURVE_HZ
    freqs = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    rows = []
    for theta in levels:
        fr = tag_response(res.geometry, float(theta), freqs)
        rows += [(float(theta), f, g) for f, g in zip(freqs.tolist(), fr.gain_db.tolist())]
    sio.write_table(_out(args, "gain_curves"), ("theta", "freq_hz", "gain_db"), rows, args.format)
    return report


# --- scene commands ---------------------------------------------------------


def _scene(args):
    """Scene config, tag geometry and tag level from a scenario JSON."""
    raw = _load_config(args.scenario, {})
    level = float(raw.pop("level_pct", DEFAULT_TAG_LEVEL_PCT))
    geom = raw.pop("geometry", None)
    geom = DgsGeometry(w=geom["w_mm"], a=geom["a_mm"]) if geom else DgsGeometry(w=0.1, a=10.0)
    raw.setdefault("seed", derive_seed(args.seed, "scene"))
    try:
        cfg = SceneConfig.from_dict(raw)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.tag_pos is None:
        raise UsageError("scenario needs a tag_pos")
    return cfg, geom, level


def cmd_align(args) -> dict:
    cfg, geom, level = _scene(args)
    live, ref = level_scenarios(cfg, geom, level, 0)
    rep = align(live, ref, scan_step_deg=args.scan_step, differential=args.mode == "differential")
    out = {"aod_deg": rep.result.aod_deg, "aoa_deg": rep.result.aoa_deg, "confidence_db": rep.result.confidence_db}
    sio.write_json(_out(args, "alignment.json"), out)
    p, q = rep.profile, rep.profile_without
    sio.write_table(
        _out(args, "spatial_profile"),
        ("angle_deg", "power_db", "power_db_without_tag"),
        list(zip(p.angles_deg.tolist(), p.power_db.tolist(), q.power_db.tolist())),
        args.format,
    )
    sio.write_table(
        _out(args, "music_spectrum"),
        ("angle_deg", "spectrum_db", "spectrum_db_without_tag"),
        list(zip(rep.music_grid.tolist(), rep.music_with_db.tolist(), rep.music_without_db.tolist())),
        args.format,
    )
    return out


def cmd_simulate(args) -> dict:
    cfg, geom, level = _scene(args)
    live, ref = level_scenarios(cfg, geom, level, 0)
    aod = live.tag_path.aod_deg if args.aod is None else args.aod
    w = beamforming_weights(live.tx, aod)
    for name, sc, n in (("csi_live", live, args.packets), ("csi_reference", ref, args.ref_packets)):
        clean = sc.clean(w)
        packets = ((k, sc.profiles(sc.packet(w, k, stream=3, clean=clean))) for k in range(n))
        sio.write_csi(_out(args, name), packets, args.format)
    out = {"aod_deg": aod, "aoa_deg": live.tag_path.aoa_deg, "level_pct": level, "seed": cfg.seed}
    sio.write_json(_out(args, "simulate.json"), out)
    return out


def cmd_features(args) -> dict:
    live = sio.read_csi(args.live)
    ref = average_profiles(sio.read_csi(args.reference).values())
    m = next(iter(live.values()))[0].h.shape[1]
    w_rx = None if args.aoa is None else beamforming_weights(ArrayGeometry(m), args.aoa)
    feats = [stitch_channels(p, ref, args.subcarriers, w_rx) for p in live.values()]
    mean = FeatureVector(feats[0].freqs, np.mean([f.gain_db for f in feats], axis=0))
    sio.write_features(_out(args, "features"), mean, args.format)
    out = {"packets": len(feats), "length": len(mean)}
    if args.label is not None:
        data = Dataset(
            mean.freqs,
            np.array([f.gain_db for f in feats]),
            np.full(len(feats), args.label),
            [{"env": args.env, "packet": k} for k in live],
        )
        sio.write_dataset(_out(args, "dataset"), data, args.format)
        out["rows"] = len(data)
    sio.write_json(_out(args, "features.json"), out)
    return out


# --- dataset / model commands -------------------------------------------------


def _plan(cfg: dict) -> DatasetPlan:
    try:
        return DatasetPlan.from_dict(cfg)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


def _forest(cfg: dict, seed: int) -> ForestParams:
    cfg = dict(cfg)
    cfg.setdefault("seed", derive_seed(seed, "forest"))
    try:
        return ForestParams(**cfg)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


def _split_config(cfg: dict):
    unknown = set(cfg) - {"plan", "forest", "snr_db"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg.get("plan", {}), cfg.get("forest", {})


def cmd_dataset(args) -> dict:
    plan = _plan(_load_config(args.plan, {}))
    data, stats = build_dataset(plan, args.seed)
    if stats.skipped:
        print(f"warning: {stats.skipped} of {stats.cells} cells skipped (alignment failed)", file=sys.stderr)
    sio.write_dataset(_out(args, "dataset"), data, args.format)
    out = {"rows": len(data), "cells": stats.cells, "skipped_cells": stats.skipped, "features": int(data.freqs.size)}
    sio.write_json(_out(args, "dataset.json"), out)
    return out


def cmd_train(args) -> dict:
    data = sio.read_dataset(args.dataset)
    params = _forest(_load_config(args.config, {}), args.seed)
    model = train_forest(data, params)
    sio.atomic_write_text(_out(args, "model.json"), model.to_json() + "\n")
    return {"rows": len(data), "n_trees": params.n_trees, "features": model.n_features}


def _load_model(path) -> ForestModel:
    try:
        return ForestModel.from_json(Path(path).read_text())
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load model {path}: {exc}") from exc


def _write_report(args, rep, name) -> dict:
    summary = rep.summary()
    sio.write_json(_out(args, f"{name}.json"), summary)
    sio.write_table(
        _out(args, "error_cdf"),
        ("abs_error", "fraction"),
        list(zip(rep.cdf_error.tolist(), rep.cdf_fraction.tolist())),
        args.format,
    )
    return summary


def cmd_eval(args) -> dict:
    model = _load_model(args.model)
    return _write_report(args, evaluate(model, sio.read_dataset(args.dataset)), "eval_report")


def cmd_predict(args) -> dict:
    model = _load_model(args.model)
    header, _ = sio.read_table(args.features)
    if "label" in header:
        X = sio.read_dataset(args.features).X
    else:
        X = sio.read_features(args.features).gain_db[None, :]
    pred = np.atleast_1d(model.predict(X))
    sio.write_table(_out(args, "predictions"), ("row", "moisture_pct"), list(enumerate(pred.tolist())), args.format)
    return {"predictions": pred.tolist()}


def cmd_e2e(args) -> dict:
    plan_cfg, forest_cfg = _split_config(_load_config(args.config, {}))
    res = run_e2e(_plan(plan_cfg), _forest(forest_cfg, args.seed), args.seed)
    summary = _write_report(args, res.report, "e2e_report")
    summary.update(n_train=res.n_train, n_test=res.n_test, skipped_cells=res.stats.skipped)
    sio.write_json(_out(args, "e2e_report.json"), summary)
    return summary


def cmd_sweep(args) -> dict:
    cfg = _load_config(args.config, {})
    snrs = args.snr or cfg.get("snr_db", DEFAULT_SWEEP_SNR)
    plan_cfg, forest_cfg = _split_config(cfg)
    rows = []
    for snr, res in sweep(_plan(plan_cfg), snrs, _forest(forest_cfg, args.seed), args.seed):
        s = res.report.summary()
        rows.append((snr, s["n"], s["mean"], s["median"], s["p90"], res.stats.skipped))
    header = ("snr_db", "n", "mean", "median", "p90", "skipped_cells")
    sio.write_table(_out(args, "sweep"), header, rows, args.format)
    out = {"sweep": [dict(zip(header, r)) for r in rows]}
    sio.write_json(_out(args, "sweep.json"), out)
    return out


# --- entry point --------------------------------------------------------------


def build_parser() -> Parser:
    def global_flags(suppress):
        # flags may go before or after the subcommand; the sub-level copy must
        # not overwrite a value given at the top level
        g = Parser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=d(0), help="global seed (SOILTAG_SEED overrides)")
        g.add_argument("--out-dir", default=d("."), help="directory for outputs")
        g.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="format for tabular outputs")
        return g

    common = global_flags(suppress=True)
    p = Parser(prog="soiltag", description=__doc__.splitlines()[0], parents=[global_flags(suppress=False)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    s = add("design", cmd_design, "tune a tag geometry for a moisture range")
    s.add_argument("--spec", default=None, help="design spec JSON")
    s = add("simulate", cmd_simulate, "write raw live/reference CSI for a scene")
    s.add_argument("--scenario", default=None)
    s.add_argument("--packets", type=int, default=100)
    s.add_argument("--ref-packets", type=int, default=50)
    s.add_argument("--aod", type=float, default=None, help="Tx beam angle; default is the tag direction")
    s = add("align", cmd_align, "estimate tag AoD/AoA in a scene")
    s.add_argument("--scenario", default=None)
    s.add_argument("--scan-step", type=float, default=1.0)
    s.add_argument("--mode", choices=("differential", "second-peak"), default="differential")
    s = add("features", cmd_features, "filter-gain features from raw CSI")
    s.add_argument("--live", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--subcarriers", type=int, default=DEFAULT_SUBCARRIERS)
    s.add_argument("--aoa", type=float, default=None, help="Rx combining angle; default uniform weights")
    s.add_argument("--label", type=float, default=None, help="moisture %% label; also writes a dataset file")
    s.add_argument("--env", default="")
    s = add("dataset", cmd_dataset, "synthesize a labelled feature dataset")
    s.add_argument("--plan", default=None)
    s = add("train", cmd_train, "train the random-forest estimator")
    s.add_argument("--dataset", required=True)
    s.add_argument("--config", default=None, help="forest hyperparameters JSON")
    s = add("eval", cmd_eval, "evaluate a model on a dataset")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset", required=True)
    s = add("predict", cmd_predict, "predict moisture from features")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s = add("e2e", cmd_e2e, "dataset -> split -> train -> evaluate")
    s.add_argument("--config", default=None)
    s = add("sweep", cmd_sweep, "end-to-end error across SNR values")
    s.add_argument("--config", default=None)
    s.add_argument("--snr", type=float, nargs="+", default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    env_seed = os.environ.get("SOILTAG_SEED")
    if env_seed is not None:
        try:
            args.seed = int(env_seed)
        except ValueError:
            print(f"soiltag: error: SOILTAG_SEED must be an integer, got {env_seed!r}", file=sys.stderr)
            return EXIT_USAGE
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"soiltag: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"soiltag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(sio._plain(result), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
