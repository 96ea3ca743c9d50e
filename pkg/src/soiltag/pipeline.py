"""Dataset synthesis and the end-to-end experiment.

Every stochastic stage draws from a seed derived from the global seed and a
stage name, so stages can be rerun in isolation with identical results.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import beam_align
from .channel import N_CHANNELS, SceneConfig, Scenario
from .estimator import Dataset, ErrorReport, ForestModel, ForestParams, evaluate, train_forest, train_test_split
from .features import DEFAULT_SUBCARRIERS, average_profiles, selected_freqs, stitch_channels
from .resonator import DgsGeometry, frequency_response, lump_from_geometry, tune_geometry
from .soil import topp_permittivity

log = logging.getLogger(__name__)

DEFAULT_LEVELS_PCT = tuple(float(x) for x in np.round(np.linspace(0.0, 20.0, 10), 6))
DESIGN_BAND_HZ = (2.5e9, 2.6e9)


def derive_seed(seed: int, stage: str) -> int:
    """Stable 32-bit sub-seed for a named stage."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


@dataclass
class DatasetPlan:
    levels_pct: tuple = DEFAULT_LEVELS_PCT
    environments: tuple = ("empty",)
    packets: int = 100
    n_ref_packets: int = 50
    snr_db: float | None = 25.0  # None: noiseless
    subcarriers: int = DEFAULT_SUBCARRIERS
    geometry: dict | None = None  # {"w": mm, "a": mm}; None tunes on levels_pct
    band_hz: tuple = DESIGN_BAND_HZ
    scene: dict = field(default_factory=dict)  # SceneConfig overrides
    aligned: bool = True  # False: fixed beams at the geometric tag angles

    def __post_init__(self):
        self.levels_pct = tuple(float(x) for x in self.levels_pct)
        self.environments = tuple(self.environments)
        self.band_hz = tuple(float(x) for x in self.band_hz)
        if not self.levels_pct:
            raise ValueError("plan needs at least one moisture level")
        if any(not 0 <= x <= 100 for x in self.levels_pct):
            raise ValueError("moisture levels must be percentages in [0, 100]")
        if self.packets < 1:
            raise ValueError("packets must be >= 1")
        if self.n_ref_packets < 50:
            raise ValueError("reference averaging needs at least 50 packets")
        if not 1 <= self.subcarriers <= 64:
            raise ValueError("subcarriers must be in 1..64")
        # environment, SNR and seed are plan-level; everything else passes through
        reserved = {"environment", "snr_db", "seed"}
        bad = (set(self.scene) - set(SceneConfig.__dataclass_fields__)) | (reserved & set(self.scene))
        if bad:
            raise ValueError(f"scene overrides not allowed or unknown: {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["levels_pct"] = list(self.levels_pct)
        d["environments"] = list(self.environments)
        d["band_hz"] = list(self.band_hz)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetPlan":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown plan keys: {sorted(extra)}")
        return cls(**d)

    def resolve_geometry(self) -> DgsGeometry:
        if self.geometry is not None:
            return DgsGeometry(**self.geometry)
        if len(self.levels_pct) < 2:
            raise ValueError("tuning needs two or more levels; give an explicit geometry")
        return tune_geometry([x / 100 for x in sorted(self.levels_pct)], self.band_hz).geometry


@dataclass
class BuildStats:
    cells: int = 0
    skipped: int = 0
    skipped_cells: list = field(default_factory=list)  # (environment, level_pct, reason)
    alignments: list = field(default_factory=list)  # (environment, level_pct, aod, aoa)


def scene_for(plan: DatasetPlan, environment: str, seed: int) -> SceneConfig:
    kw = dict(plan.scene)
    kw.update(environment=environment, seed=derive_seed(seed, f"scene/{environment}"))
    if plan.snr_db is not None:
        kw["snr_db"] = plan.snr_db
    return SceneConfig(**kw)


def level_scenarios(cfg: SceneConfig, geom: DgsGeometry, level_pct: float, level_index: int, noiseless: bool = False):
    """Live (tag present) and reference (tag absent) scenes sharing clutter."""
    grid = np.unique(Scenario.from_config(cfg).freqs())  # adjacent channels overlap
    fr = frequency_response(lump_from_geometry(geom, float(topp_permittivity(level_pct / 100))), grid)
    live = Scenario.from_config(cfg, tag_fr=fr)
    live.noise_key = (level_index, 1)
    ref = live.without_tag()
    ref.noise_key = (level_index, 0)
    if noiseless:
        live, ref = live.with_noise(0.0), ref.with_noise(0.0)
    return live, ref


def choose_beams(live: Scenario, ref: Scenario, aligned: bool):
    if not aligned:
        tag = live.tag_path
        return tag.aod_deg, tag.aoa_deg
    rep = beam_align.align(live, ref)
    return rep.result.aod_deg, rep.result.aoa_deg


def level_features(live: Scenario, ref: Scenario, aod: float, aoa: float, packets: int, n_ref: int, subcarriers: int):
    """Per-packet feature vectors for one (scene, level) cell."""
    w_tx = beam_align.beamforming_weights(live.tx, aod)
    w_rx = beam_align.beamforming_weights(live.rx, aoa)
    ref_clean = ref.clean(w_tx)
    ref_prof = average_profiles(ref.profiles(ref.packet(w_tx, k, stream=3, clean=ref_clean)) for k in range(n_ref))
    live_clean = live.clean(w_tx)
    return [
        stitch_channels(live.profiles(live.packet(w_tx, k, stream=3, clean=live_clean)), ref_prof, subcarriers, w_rx)
        for k in range(packets)
    ]


def build_dataset(plan: DatasetPlan, seed: int = 0) -> tuple[Dataset, BuildStats]:
    """Labelled per-packet features for every (environment, level) cell in the plan.

    Cells whose alignment fails are skipped and counted, not fatal.
    """
    geom = plan.resolve_geometry()
    freqs = selected_freqs(range(1, N_CHANNELS + 1), plan.subcarriers)
    stats = BuildStats()
    X, y, meta = [], [], []
    for env in plan.environments:
        cfg = scene_for(plan, env, seed)
        for i, level in enumerate(plan.levels_pct):
            stats.cells += 1
            live, ref = level_scenarios(cfg, geom, level, i, noiseless=plan.snr_db is None)
            try:
                aod, aoa = choose_beams(live, ref, plan.aligned)
            except (beam_align.TagNotDetected, beam_align.TagNotResolved) as exc:
                stats.skipped += 1
                stats.skipped_cells.append((env, level, str(exc)))
                log.warning("skipping cell env=%s level=%.4g%%: %s", env, level, exc)
                continue
            stats.alignments.append((env, level, aod, aoa))
            for k, fv in enumerate(level_features(live, ref, aod, aoa, plan.packets, plan.n_ref_packets, plan.subcarriers)):
                X.append(fv.gain_db)
                y.append(level)
                meta.append({"env": env, "level": i, "packet": k, "seed": cfg.seed})
    if not X:
        return Dataset(freqs, np.empty((0, freqs.size)), np.empty(0), []), stats
    return Dataset(freqs, np.array(X), np.array(y), meta), stats


@dataclass
class E2EResult:
    report: ErrorReport
    model: ForestModel
    stats: BuildStats
    n_train: int
    n_test: int


def run_e2e(plan: DatasetPlan, params: ForestParams | None = None, seed: int = 0, data: Dataset | None = None) -> E2EResult:
    stats = BuildStats()
    if data is None:
        data, stats = build_dataset(plan, seed)
    if len(data) == 0:
        raise ValueError("dataset is empty; every cell failed alignment")
    if np.unique(data.y).size < 2:
        from .estimator import DegenerateDataError

        raise DegenerateDataError("end-to-end run needs at least two moisture levels")
    train, test = train_test_split(data, 0.5, derive_seed(seed, "split"))
    if params is None:
        params = ForestParams(seed=derive_seed(seed, "forest"))
    model = train_forest(train, params)
    return E2EResult(evaluate(model, test), model, stats, len(train), len(test))


def sweep(plan: DatasetPlan, snr_values, params: ForestParams | None = None, seed: int = 0) -> list[tuple[float, E2EResult]]:
    """End-to-end error at each SNR, all else held fixed."""
    out = []
    for snr in snr_values:
        p = DatasetPlan.from_dict({**plan.to_dict(), "snr_db": float(snr)})
        out.append((float(snr), run_e2e(p, params, seed)))
    return out
