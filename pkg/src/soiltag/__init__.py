"""Simulator and estimators for chipless Wi-Fi tag soil-moisture sensing."""
from .soil import DomainError, SoilSample, topp_permittivity, vwc_to_gwc
from .resonator import (
    CircuitParams,
    DgsGeometry,
    FrequencyResponse,
    InfeasibleBandError,
    frequency_response,
    lump_from_geometry,
    resonant_frequency,
    tune_geometry,
)
from .channel import ArrayGeometry, CsiProfile, Path, SceneConfig, Scenario, steering_vector, synthesize_csi
from .beam_align import align, beam_scan_profile, beamforming_weights, estimate_aoa, estimate_aod, music_spectrum
from .features import FeatureVector, filter_gain, stitch_channels
from .estimator import Dataset, ForestModel, ForestParams, dtw_distance, dtw_estimate, evaluate, predict, train_forest

__version__ = "0.1.0"
